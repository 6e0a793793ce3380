//! The LCA forward pass.
//!
//! ```text
//! ids ─ embed ─(+ tag emb)─ global MHSA ─ O^g ─┬─ ⊙ tag emb ───────────────┐
//!                                              └─ ⊙ CDM mask ─ local MHSA ─┴─ concat ─ linear ─ O^p
//! O^p ─ tag head (per position)
//! O^p ─ pool ─ polarity head
//! ```
//!
//! Each sentence is computed over its valid prefix only. Attention never sees
//! padded keys, and padded positions report tag 0 with certainty.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::local_context::{apply_mask, cdm_mask, lc_tags, LcTags};
use crate::model::config::{LceMode, ModelConfig, Pooling};
use crate::model::params::{MhsaIds, ModelParams};
use crate::numeric::{scaled_dot_attention, ParamId, ParamStore, Tape, Tensor, Var};

pub enum Mode<'a> {
    /// Dropout active, masks drawn from the given generator.
    Train(&'a mut ChaCha8Rng),
    Eval,
}

impl Mode<'_> {
    fn dropout(&mut self, tape: &mut Tape, x: Var, p: f64) -> Result<Var> {
        let Mode::Train(rng) = self else {
            return Ok(x);
        };
        if p == 0.0 {
            return Ok(x);
        }
        let shape = tape.value(x).shape().to_vec();
        let keep = 1.0 / (1.0 - p);
        let n = shape.iter().product();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<f64>() < p { 0.0 } else { keep })
            .collect();
        tape.mul_const(x, &Tensor::new(shape, mask)?)
    }
}

pub struct MhsaOutput {
    /// `n × d_h`, values in (−1, 1); rows past `valid_len` are zero.
    pub output: Var,
    /// One `n × valid_len` attention matrix per head.
    pub weights: Vec<Var>,
}

/// `tanh([H_1; …; H_h] W_o)` with `H_j` the scaled dot-product attention of
/// head j over its slice of `X W_q`, `X W_k`, `X W_v`.
pub fn mhsa(
    tape: &mut Tape,
    store: &ParamStore,
    ids: &MhsaIds,
    x: Var,
    heads: usize,
    valid_len: usize,
) -> Result<MhsaOutput> {
    let rows = tape.value(x).rows();
    if valid_len == 0 || valid_len > rows {
        return Err(Error::shape("mhsa", format!("{valid_len} valid rows of {rows}")));
    }
    let w_q = tape.param(store, ids.w_q);
    let w_k = tape.param(store, ids.w_k);
    let w_v = tape.param(store, ids.w_v);
    let w_o = tape.param(store, ids.w_o);
    let q = tape.matmul(x, w_q)?;
    let k = tape.matmul(x, w_k)?;
    let v = tape.matmul(x, w_v)?;
    let d_h = tape.value(q).cols();
    if heads == 0 || !d_h.is_multiple_of(heads) {
        return Err(Error::shape("mhsa", format!("{d_h} hidden units over {heads} heads")));
    }
    let d_head = d_h / heads;

    let mut outputs = Vec::with_capacity(heads);
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * d_head, (h + 1) * d_head);
        let (qh, kh, vh) = if heads == 1 {
            (q, k, v)
        } else {
            (
                tape.slice_cols(q, lo, hi)?,
                tape.slice_cols(k, lo, hi)?,
                tape.slice_cols(v, lo, hi)?,
            )
        };
        let att = scaled_dot_attention(tape, qh, kh, vh, Some(valid_len))?;
        outputs.push(att.output);
        weights.push(att.weights);
    }
    let joined = if heads == 1 {
        outputs[0]
    } else {
        tape.concat_cols(&outputs)?
    };
    let projected = tape.matmul(joined, w_o)?;
    let mut output = tape.tanh(projected);
    if valid_len < rows {
        let cols = tape.value(output).cols();
        let mut keep = Tensor::zeros(&[rows, cols]);
        keep.data_mut()[..valid_len * cols].fill(1.0);
        output = tape.mul_const(output, &keep)?;
    }
    Ok(MhsaOutput { output, weights })
}

/// Looks up the word vectors of `ids`.
pub fn embed(tape: &mut Tape, store: &ParamStore, table: ParamId, ids: &[usize]) -> Result<Var> {
    tape.gather_param(store, table, ids)
}

/// `E^lce[tags] ⊙ O^g`.
pub fn lce_dot(tape: &mut Tape, store: &ParamStore, lce: ParamId, tags: &[usize], global: Var) -> Result<Var> {
    let embedded = tape.gather_param(store, lce, tags)?;
    tape.mul(embedded, global).map_err(|e| e.in_stage("lce_dot"))
}

/// `X + E^lce[tags]`.
pub fn lce_additive(tape: &mut Tape, store: &ParamStore, lce: ParamId, tags: &[usize], x: Var) -> Result<Var> {
    let embedded = tape.gather_param(store, lce, tags)?;
    tape.add(x, embedded).map_err(|e| e.in_stage("lce_additive"))
}

/// Handles into one sentence's part of the graph.
#[derive(Debug, Clone)]
pub struct SentenceTrace {
    pub valid_len: usize,
    pub tags: LcTags,
    /// Global-encoder attention, one `valid_len × valid_len` matrix per head.
    pub attention: Vec<Var>,
    /// `O^g`.
    pub global: Var,
    /// Copy of `O^g` feeding only the masking branch (when enabled).
    pub local_branch_input: Option<Var>,
    /// `O^p`, `valid_len × d_h`.
    pub projected: Var,
    /// `valid_len × 2` tag distribution over valid positions.
    pub tag_probs: Var,
}

pub struct ForwardOutput {
    /// `b × 3`.
    pub polarity_probs: Var,
    /// `(b · pad_len) × 2`, sentence-major.
    pub tag_probs: Var,
    pub sentences: Vec<SentenceTrace>,
}

/// Runs the network over a batch of encoded sentences.
pub fn forward(
    tape: &mut Tape,
    params: &ModelParams,
    config: &ModelConfig,
    batch: &[&EncodedExample],
    mut mode: Mode<'_>,
) -> Result<ForwardOutput> {
    if batch.is_empty() {
        return Err(Error::Contract("forward over an empty batch".into()));
    }
    let store = &params.store;
    let ids = &params.ids;
    let pad_len = config.pad_len;

    let w_fuse = tape.param(store, ids.fuse_w);
    let b_fuse = tape.param(store, ids.fuse_b);
    let w_tag = tape.param(store, ids.tag_w);
    let b_tag = tape.param(store, ids.tag_b);
    let w_pol = tape.param(store, ids.polarity_w);
    let b_pol = tape.param(store, ids.polarity_b);

    let mut polarity_rows = Vec::with_capacity(batch.len());
    let mut tag_blocks = Vec::with_capacity(batch.len() * 2);
    let mut sentences = Vec::with_capacity(batch.len());

    for ex in batch {
        if ex.ids.len() != pad_len {
            return Err(Error::shape(
                "forward/input",
                format!("{} ids, padding length is {pad_len}", ex.ids.len()),
            ));
        }
        let n = ex.valid_len;
        let tags = lc_tags(n, pad_len, ex.target, config.alpha)?;
        let tag_ids = &tags.as_indices()[..n];

        let x = embed(tape, store, ids.embedding, &ex.ids[..n]).map_err(|e| e.in_stage("embed"))?;
        let mut x = mode.dropout(tape, x, config.dropout)?;
        if config.lce_mode == LceMode::Additive {
            x = lce_additive(tape, store, ids.lce, tag_ids, x)?;
        }

        let global_out = mhsa(tape, store, &ids.global, x, config.heads, n)
            .map_err(|e| e.in_stage("global_mhsa"))?;
        let global = global_out.output;

        let global_lce = if config.lce_mode == LceMode::Dot {
            lce_dot(tape, store, ids.lce, tag_ids, global)?
        } else {
            global
        };

        let (local, local_branch_input) = if config.cdm_enabled {
            let branch = tape.scale(global, 1.0);
            let mask = cdm_mask(&tags, config.d_h);
            let rows = tape.value(branch).rows();
            let mask = Tensor::new(vec![rows, config.d_h], mask.data()[..rows * config.d_h].to_vec())?;
            let masked = apply_mask(tape, branch, &mask)?;
            let out = mhsa(tape, store, &ids.local, masked, config.heads, n)
                .map_err(|e| e.in_stage("local_mhsa"))?;
            (out.output, Some(branch))
        } else {
            (global, None)
        };

        let joined = tape.concat_cols(&[global_lce, local]).map_err(|e| e.in_stage("fusion"))?;
        let fused = tape.matmul(joined, w_fuse).map_err(|e| e.in_stage("fusion"))?;
        let projected = tape.add_row(fused, b_fuse)?;
        let projected = mode.dropout(tape, projected, config.dropout)?;

        let tag_logits = tape.matmul(projected, w_tag).map_err(|e| e.in_stage("tag_head"))?;
        let tag_logits = tape.add_row(tag_logits, b_tag)?;
        let tag_probs = tape.softmax(tag_logits)?;
        tag_blocks.push(tag_probs);
        if n < pad_len {
            let mut pad = Tensor::zeros(&[pad_len - n, 2]);
            pad.data_mut().chunks_mut(2).for_each(|r| r[0] = 1.0);
            tag_blocks.push(tape.constant(pad));
        }

        let pooled = match config.pooling {
            Pooling::Mean => tape.mean_rows(projected, n)?,
            Pooling::First => tape.slice_rows(projected, 0, 1)?,
        };
        let logits = tape.matmul(pooled, w_pol).map_err(|e| e.in_stage("polarity_head"))?;
        let logits = tape.add_row(logits, b_pol)?;
        polarity_rows.push(tape.softmax(logits)?);

        sentences.push(SentenceTrace {
            valid_len: n,
            tags,
            attention: global_out.weights,
            global,
            local_branch_input,
            projected,
            tag_probs,
        });
    }

    let polarity_probs = tape.concat_rows(&polarity_rows)?;
    let tag_probs = tape.concat_rows(&tag_blocks)?;
    Ok(ForwardOutput {
        polarity_probs,
        tag_probs,
        sentences,
    })
}

/// Attention each key position receives from the global encoder, averaged
/// over heads and query positions. Sums to 1.
pub fn attention_received(tape: &Tape, trace: &SentenceTrace) -> Vec<f64> {
    let n = trace.valid_len;
    let mut received = vec![0.0; n];
    for &head in &trace.attention {
        let w = tape.value(head);
        for q in 0..w.rows() {
            for (k, r) in received.iter_mut().enumerate() {
                *r += w.get(q, k);
            }
        }
    }
    let norm = (trace.attention.len() * n) as f64;
    received.iter_mut().for_each(|r| *r /= norm);
    received
}
