use std::path::Path;

use crate::corpus::dataset::{Dataset, Split};
use crate::corpus::encode::{encode_all, EncodedExample};
use crate::corpus::example::{ClassCounts, Example};
use crate::corpus::vectors::{load_pretrained_vectors, random_embeddings, VectorSource};
use crate::corpus::vocab::Vocabulary;
use crate::error::Result;

/// Both splits of a dataset, encoded, with the embedding table for their
/// shared vocabulary.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: Dataset,
    pub vocab: Vocabulary,
    pub embedding: crate::numeric::Tensor,
    pub vectors: VectorSource,
    pub coverage: f64,
    pub train: Vec<EncodedExample>,
    pub test: Vec<EncodedExample>,
    pub train_counts: ClassCounts,
    pub test_counts: ClassCounts,
}

impl Prepared {
    /// False when embeddings are random, so numbers cannot be compared with
    /// published ones.
    pub fn is_reproduction(&self) -> bool {
        self.vectors == VectorSource::File
    }
}

pub fn load_splits(dataset: Dataset, data_dir: &Path) -> Result<(Vec<Example>, Vec<Example>)> {
    Ok((
        dataset.load_split(data_dir, Split::Train)?,
        dataset.load_split(data_dir, Split::Test)?,
    ))
}

/// Loads, tokenizes and encodes both splits. The vocabulary covers train and
/// test (embeddings are looked up, not learned, for test-only words). With
/// `vectors = None`, or a missing file, the table is seeded random.
pub fn prepare(
    dataset: Dataset,
    data_dir: &Path,
    vectors: Option<&Path>,
    embed_dim: usize,
    pad_len: usize,
    seed: u64,
) -> Result<Prepared> {
    let (train, test) = load_splits(dataset, data_dir)?;
    let vocab = Vocabulary::build([train.as_slice(), test.as_slice()]);
    let (embedding, source, coverage) = match vectors {
        Some(path) => {
            let v = load_pretrained_vectors(path, &vocab, embed_dim, seed)?;
            (v.matrix, v.source, v.coverage)
        }
        None => {
            log::warn!("no vectors file given: using random embeddings; results are NOT a reproduction run");
            (random_embeddings(vocab.len(), embed_dim, seed), VectorSource::RandomFallback, 0.0)
        }
    };
    Ok(Prepared {
        dataset,
        train_counts: ClassCounts::of(&train),
        test_counts: ClassCounts::of(&test),
        train: encode_all(&train, &vocab, pad_len)?,
        test: encode_all(&test, &vocab, pad_len)?,
        vocab,
        embedding,
        vectors: source,
        coverage,
    })
}
