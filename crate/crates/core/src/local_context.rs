//! Semantic relative distance, local-context tags and the feature mask built
//! from them.

use crate::corpus::Span;
use crate::error::{Error, Result};
use crate::numeric::{Tape, Tensor, Var};

/// Distance of token `i` from the target: `|i − p| − ⌊m/2⌋`, where `p` is the
/// mean target position and `m` the target length. Negative inside long
/// targets; fractional for even-length targets.
pub fn srd(i: usize, target: Span) -> Result<f64> {
    if target.is_empty() {
        return Err(Error::Contract("SRD of an empty target span".into()));
    }
    let m = target.len();
    let mean = (target.start + target.end - 1) as f64 / 2.0;
    Ok((i as f64 - mean).abs() - (m / 2) as f64)
}

/// Per-position local-context membership for one padded sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcTags {
    pub tags: Vec<u8>,
    pub alpha: usize,
}

impl LcTags {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn is_local(&self, i: usize) -> bool {
        self.tags[i] == 1
    }

    pub fn as_indices(&self) -> Vec<usize> {
        self.tags.iter().map(|&t| t as usize).collect()
    }

    pub fn local_count(&self) -> usize {
        self.tags.iter().filter(|&&t| t == 1).count()
    }
}

/// Tags positions with SRD ≤ `alpha` as local (1); padded positions
/// (`>= valid_len`, up to `pad_len`) are always 0.
pub fn lc_tags(valid_len: usize, pad_len: usize, target: Span, alpha: usize) -> Result<LcTags> {
    if target.end > valid_len || valid_len > pad_len {
        return Err(Error::Contract(format!(
            "target {}..{} / valid length {valid_len} / padding {pad_len} are inconsistent",
            target.start, target.end
        )));
    }
    let mut tags = vec![0u8; pad_len];
    for (i, tag) in tags.iter_mut().enumerate().take(valid_len) {
        if srd(i, target)? <= alpha as f64 {
            *tag = 1;
        }
    }
    Ok(LcTags { tags, alpha })
}

/// `rows × width` matrix whose row i is all ones when position i is local and
/// all zeros otherwise.
pub fn cdm_mask(tags: &LcTags, width: usize) -> Tensor {
    let data = tags
        .tags
        .iter()
        .flat_map(|&t| std::iter::repeat_n(f64::from(t), width))
        .collect();
    Tensor::new(vec![tags.len(), width], data).expect("mask dims are positive")
}

/// `features ⊙ mask`. Local rows pass through unchanged (multiplication by
/// exactly 1.0); the rest, and their gradient, are zero.
pub fn apply_mask(tape: &mut Tape, features: Var, mask: &Tensor) -> Result<Var> {
    tape.mul_const(features, mask).map_err(|e| e.in_stage("apply_mask"))
}
