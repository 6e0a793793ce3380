//! Checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "LCANETCK"
//! version  u32
//! hlen     u64      length of the JSON header
//! header   hlen bytes: config, vocabulary, tensor table, metrics
//! payload  f64 LE values of every tensor, in tensor-table order
//! ```
//!
//! Tensor values travel as raw bits, so a save/load round trip is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::evaluation::MetricsReport;
use crate::model::{ModelConfig, ModelParams};
use crate::numeric::{ParamKind, ParamStore, Tensor};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"LCANETCK";

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    kind: ParamKind,
    shape: Vec<usize>,
    trainable: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: ModelConfig,
    vocabulary: Vec<String>,
    tensors: Vec<TensorEntry>,
    metrics: Option<MetricsReport>,
}

/// A trained model with everything needed to run it again.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
    /// Test metrics of the final epoch, when evaluated.
    pub metrics: Option<MetricsReport>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(Error::Format(format!(
                "checkpoint truncated while reading {what} (offset {}, need {n} bytes, have {})",
                self.pos,
                self.bytes.len() - self.pos
            )));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = Header {
            config: self.config.clone(),
            vocabulary: self.vocab.tokens().to_vec(),
            tensors: self
                .params
                .store
                .iter()
                .map(|p| TensorEntry {
                    name: p.name.clone(),
                    kind: p.kind,
                    shape: p.tensor.shape().to_vec(),
                    trainable: p.tensor.requires_grad,
                })
                .collect(),
            metrics: self.metrics.clone(),
        };
        let json = serde_json::to_vec(&header)
            .map_err(|e| Error::Format(format!("cannot serialize checkpoint header: {e}")))?;
        let payload: usize = self.params.store.iter().map(|p| p.tensor.len() * 8).sum();
        let mut out = Vec::with_capacity(8 + 4 + 8 + json.len() + payload);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u64).to_le_bytes());
        out.extend_from_slice(&json);
        for p in self.params.store.iter() {
            for v in p.tensor.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.take(4, "version")?.try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(Error::IncompatibleVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let hlen = u64::from_le_bytes(r.take(8, "header length")?.try_into().expect("8 bytes"));
        let hlen = usize::try_from(hlen).map_err(|_| Error::Format("header length overflows".into()))?;
        let header: Header = serde_json::from_slice(r.take(hlen, "header")?)
            .map_err(|e| Error::Format(format!("bad checkpoint header: {e}")))?;
        header.config.validate()?;

        let mut store = ParamStore::new();
        for entry in &header.tensors {
            let n: usize = entry.shape.iter().product();
            let raw = r.take(n * 8, &entry.name)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let mut tensor = Tensor::new(entry.shape.clone(), data)
                .map_err(|e| Error::Format(format!("tensor {}: {e}", entry.name)))?;
            tensor.requires_grad = entry.trainable;
            store.add(entry.name.clone(), entry.kind, tensor);
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after checkpoint payload",
                bytes.len() - r.pos
            )));
        }
        let vocab = Vocabulary::from_tokens(header.vocabulary)
            .ok_or_else(|| Error::Format("checkpoint vocabulary is malformed".into()))?;
        let params = ModelParams::from_store(&header.config, store)?;
        if params.vocab_len() != vocab.len() {
            return Err(Error::Format(format!(
                "embedding has {} rows for a vocabulary of {}",
                params.vocab_len(),
                vocab.len()
            )));
        }
        Ok(Checkpoint {
            config: header.config,
            vocab,
            params,
            metrics: header.metrics,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    ckpt.save(path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::load(path)
}
