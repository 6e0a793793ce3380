use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::config::{LceMode, ModelConfig};
use crate::numeric::{ParamId, ParamKind, ParamStore, Tensor};

/// RNG stream reserved for weight initialization.
const INIT_STREAM: u64 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MhsaIds {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamIds {
    pub embedding: ParamId,
    pub lce: ParamId,
    pub global: MhsaIds,
    pub local: MhsaIds,
    pub fuse_w: ParamId,
    pub fuse_b: ParamId,
    pub tag_w: ParamId,
    pub tag_b: ParamId,
    pub polarity_w: ParamId,
    pub polarity_b: ParamId,
}

/// All learnable tensors of the network, addressed by role.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub store: ParamStore,
    pub ids: ParamIds,
}

/// Expected `(name, kind, shape)` of every parameter, in store order.
fn layout(config: &ModelConfig, vocab_len: usize) -> Vec<(String, ParamKind, [usize; 2])> {
    use ParamKind::*;
    let (d, e) = (config.d_h, config.embed_dim);
    let lce_width = match config.lce_mode {
        LceMode::Additive => e,
        LceMode::Dot | LceMode::Off => d,
    };
    let mut out = vec![
        ("embedding".to_string(), Weight, [vocab_len, e]),
        ("lce".to_string(), Weight, [2, lce_width]),
    ];
    for (prefix, d_in) in [("global", e), ("local", d)] {
        for w in ["w_q", "w_k", "w_v"] {
            out.push((format!("{prefix}.{w}"), Weight, [d_in, d]));
        }
        out.push((format!("{prefix}.w_o"), Weight, [d, d]));
    }
    out.extend([
        ("fuse.w".to_string(), Weight, [2 * d, d]),
        ("fuse.b".to_string(), Bias, [1, d]),
        ("tag.w".to_string(), Weight, [d, 2]),
        ("tag.b".to_string(), Bias, [1, 2]),
        ("polarity.w".to_string(), Weight, [d, 3]),
        ("polarity.b".to_string(), Bias, [1, 3]),
    ]);
    out
}

fn xavier(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Vec<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect()
}

impl ModelParams {
    /// Fresh parameters around a given word-embedding table.
    ///
    /// Projections get uniform Xavier draws, biases start at zero. The tag
    /// embedding starts as the identity of its mode: ones for `dot`, zeros
    /// for `additive`.
    pub fn init(config: &ModelConfig, embedding: Tensor) -> Result<Self> {
        config.validate()?;
        if embedding.shape().len() != 2 || embedding.cols() != config.embed_dim {
            return Err(Error::shape(
                "embedding",
                format!("{:?} does not have {} columns", embedding.shape(), config.embed_dim),
            ));
        }
        let vocab_len = embedding.rows();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(INIT_STREAM);

        let mut store = ParamStore::new();
        let mut embedding = Some(embedding);
        for (name, kind, [r, c]) in layout(config, vocab_len) {
            let tensor = match name.as_str() {
                "embedding" => {
                    let mut t = embedding.take().expect("first layout entry");
                    t.requires_grad = !config.freeze_embeddings;
                    t
                }
                "lce" => {
                    let fill = if config.lce_mode == LceMode::Additive { 0.0 } else { 1.0 };
                    Tensor::filled(&[r, c], fill).with_grad()
                }
                _ if kind == ParamKind::Bias => Tensor::zeros(&[r, c]).with_grad(),
                _ => Tensor::new(vec![r, c], xavier(&mut rng, r, c))?.with_grad(),
            };
            store.add(name, kind, tensor);
        }
        Self::from_store(config, store)
    }

    /// Wraps a store (e.g. from a checkpoint), checking every name and shape.
    pub fn from_store(config: &ModelConfig, store: ParamStore) -> Result<Self> {
        let vocab_len = store
            .find("embedding")
            .map(|id| store.tensor(id).rows())
            .ok_or_else(|| Error::Format("parameter set has no embedding".into()))?;
        let expected = layout(config, vocab_len);
        if expected.len() != store.len() {
            return Err(Error::Format(format!(
                "expected {} parameters, found {}",
                expected.len(),
                store.len()
            )));
        }
        for ((name, kind, shape), param) in expected.iter().zip(store.iter()) {
            if &param.name != name || param.kind != *kind || param.tensor.shape() != shape {
                return Err(Error::Format(format!(
                    "parameter {:?} {:?} does not match expected {name:?} {shape:?}",
                    param.name,
                    param.tensor.shape()
                )));
            }
        }
        let id = |n: &str| store.find(n).expect("layout checked");
        let mhsa = |p: &str| MhsaIds {
            w_q: id(&format!("{p}.w_q")),
            w_k: id(&format!("{p}.w_k")),
            w_v: id(&format!("{p}.w_v")),
            w_o: id(&format!("{p}.w_o")),
        };
        let ids = ParamIds {
            embedding: id("embedding"),
            lce: id("lce"),
            global: mhsa("global"),
            local: mhsa("local"),
            fuse_w: id("fuse.w"),
            fuse_b: id("fuse.b"),
            tag_w: id("tag.w"),
            tag_b: id("tag.b"),
            polarity_w: id("polarity.w"),
            polarity_b: id("polarity.b"),
        };
        Ok(ModelParams { store, ids })
    }

    pub fn vocab_len(&self) -> usize {
        self.store.tensor(self.ids.embedding).rows()
    }

    /// Whether a parameter takes part in the configured network. Parameters
    /// of disabled mechanisms stay in the store but see neither data
    /// gradient nor L2.
    pub fn is_active(&self, config: &ModelConfig, id: ParamId) -> bool {
        let ids = &self.ids;
        let local = [ids.local.w_q, ids.local.w_k, ids.local.w_v, ids.local.w_o];
        if id == ids.lce {
            config.lce_mode != LceMode::Off
        } else if local.contains(&id) {
            config.cdm_enabled
        } else if id == ids.tag_w || id == ids.tag_b {
            config.lcp_enabled
        } else {
            true
        }
    }

    fn regularized(&self, config: &ModelConfig) -> impl Iterator<Item = ParamId> + '_ {
        let config = config.clone();
        self.store.ids().filter(move |&id| {
            let p = self.store.param(id);
            p.kind == ParamKind::Weight && p.tensor.requires_grad && self.is_active(&config, id)
        })
    }

    /// `λ Σθ²` over active, trainable, non-bias parameters.
    pub fn l2_penalty(&self, config: &ModelConfig) -> f64 {
        config.lambda
            * self
                .regularized(config)
                .map(|id| self.store.tensor(id).sum_of_squares())
                .sum::<f64>()
    }

    /// Gradient of [`Self::l2_penalty`], indexed like the store.
    pub fn l2_grad(&self, config: &ModelConfig) -> Vec<Option<Vec<f64>>> {
        let mut out = vec![None; self.store.len()];
        if config.lambda == 0.0 {
            return out;
        }
        for id in self.regularized(config) {
            let g = self
                .store
                .tensor(id)
                .data()
                .iter()
                .map(|w| 2.0 * config.lambda * w)
                .collect();
            out[id.0] = Some(g);
        }
        out
    }
}
