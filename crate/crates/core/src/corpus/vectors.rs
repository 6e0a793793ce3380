//! Pretrained word vectors in the whitespace-separated text format
//! (`token v1 v2 … vd` per line).

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::vocab::{Vocabulary, PAD};
use crate::error::{Error, Result};
use crate::numeric::Tensor;

/// Half-width of the uniform range used for rows the file does not cover.
pub const OOV_RANGE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorSource {
    File,
    /// The vectors file was missing; every row is random.
    RandomFallback,
}

#[derive(Debug, Clone)]
pub struct LoadedVectors {
    /// `|V| × dim`, row 0 zero.
    pub matrix: Tensor,
    /// Fraction of non-reserved vocabulary rows found in the file.
    pub coverage: f64,
    pub source: VectorSource,
}

/// Random `|V| × dim` table drawn from uniform(−0.25, 0.25), padding row zero.
pub fn random_embeddings(vocab_len: usize, dim: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data: Vec<f64> = (0..vocab_len * dim)
        .map(|_| rng.gen_range(-OOV_RANGE..OOV_RANGE))
        .collect();
    data[PAD * dim..(PAD + 1) * dim].fill(0.0);
    Tensor::new(vec![vocab_len, dim], data).expect("non-empty table")
}

/// Builds the embedding table for `vocab`.
///
/// Rows of tokens present in the file are copied verbatim; all others keep
/// their seeded uniform draw. A missing file is not an error: the table is
/// left fully random and the result is flagged [`VectorSource::RandomFallback`].
pub fn load_pretrained_vectors(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<LoadedVectors> {
    let mut matrix = random_embeddings(vocab.len(), dim, seed);
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            log::warn!(
                "vectors file {} not found: using random embeddings; results are NOT a reproduction run",
                path.display()
            );
            return Ok(LoadedVectors {
                matrix,
                coverage: 0.0,
                source: VectorSource::RandomFallback,
            });
        }
        Err(e) => return Err(Error::io(path, e)),
    };

    let mut reader = BufReader::new(file);
    let mut line = String::new();
    let mut found = vec![false; vocab.len()];
    let mut line_no = 0u64;
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
            break;
        }
        line_no += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        // word2vec-style header: "<count> <dim>"
        if line_no == 1 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok()) {
            continue;
        }
        if fields.len() < dim + 1 {
            return Err(Error::Format(format!(
                "{}:{line_no}: {} values, expected {dim}",
                path.display(),
                fields.len() - 1
            )));
        }
        if line_no == 1 && fields.len() != dim + 1 {
            return Err(Error::Format(format!(
                "{}: vectors have dimension {}, expected {dim}",
                path.display(),
                fields.len() - 1
            )));
        }
        // A few published files contain tokens with embedded spaces; the
        // trailing `dim` fields are always the vector.
        let split = fields.len() - dim;
        let token = if split == 1 {
            fields[0].to_string()
        } else {
            fields[..split].join(" ")
        };
        let Some(id) = vocab.get(&token) else {
            continue;
        };
        if id == PAD || found[id] {
            continue;
        }
        let row = &mut matrix.data_mut()[id * dim..(id + 1) * dim];
        for (slot, field) in row.iter_mut().zip(&fields[split..]) {
            *slot = field.parse().map_err(|_| {
                Error::Format(format!("{}:{line_no}: bad number {field:?}", path.display()))
            })?;
        }
        found[id] = true;
    }

    let candidates = vocab.len().saturating_sub(2).max(1);
    let hits = found.iter().skip(2).filter(|f| **f).count();
    let coverage = hits as f64 / candidates as f64;
    log::info!(
        "loaded {hits} of {} vocabulary vectors from {} ({:.1}% coverage)",
        vocab.len() - 2,
        path.display(),
        100.0 * coverage
    );
    Ok(LoadedVectors {
        matrix,
        coverage,
        source: VectorSource::File,
    })
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn vocab(words: &[&str]) -> Vocabulary {
        let mut v = Vocabulary::default();
        for w in words {
            v.insert(w);
        }
        v
    }

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn copies_rows_and_seeds_the_rest() {
        let f = write("good 0.5 -1.25 3\nbad 1e-3 2 0\n");
        let v = vocab(&["good", "bad", "unseen"]);
        let loaded = load_pretrained_vectors(f.path(), &v, 3, 7).unwrap();
        let m = &loaded.matrix;
        assert_eq!(m.row(v.id("good")), [0.5, -1.25, 3.0]);
        assert_eq!(m.row(v.id("bad")), [1e-3, 2.0, 0.0]);
        assert_eq!(m.row(PAD), [0.0; 3]);
        let unseen = m.row(v.id("unseen"));
        assert!(unseen.iter().all(|x| x.abs() < OOV_RANGE));
        assert_eq!(unseen, random_embeddings(v.len(), 3, 7).row(v.id("unseen")));
        assert!((loaded.coverage - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(loaded.source, VectorSource::File);
    }

    #[test]
    fn padding_row_ignores_file() {
        let f = write("<pad> 1 1\n");
        let v = vocab(&[]);
        let m = load_pretrained_vectors(f.path(), &v, 2, 1).unwrap().matrix;
        assert_eq!(m.row(PAD), [0.0, 0.0]);
    }

    #[test]
    fn inconsistent_dimension() {
        let f = write("a 1 2 3\nb 1 2\n");
        let err = load_pretrained_vectors(f.path(), &vocab(&["a", "b"]), 3, 1).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
        let f = write("a 1 2\n");
        assert!(load_pretrained_vectors(f.path(), &vocab(&["a"]), 3, 1).is_err());
    }

    #[test]
    fn missing_file_falls_back() {
        let v = vocab(&["x"]);
        let loaded = load_pretrained_vectors(Path::new("/nonexistent/vectors.txt"), &v, 4, 3).unwrap();
        assert_eq!(loaded.source, VectorSource::RandomFallback);
        assert_eq!(loaded.matrix, random_embeddings(v.len(), 4, 3));
    }

    #[test]
    fn spaced_tokens_and_header() {
        let f = write("2 2\nat the 0.1 0.2\nx 1 2\n");
        let v = vocab(&["at the", "x"]);
        let m = load_pretrained_vectors(f.path(), &v, 2, 1).unwrap().matrix;
        assert_eq!(m.row(v.id("at the")), [0.1, 0.2]);
    }
}
