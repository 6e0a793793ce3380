use crate::error::{Error, Result};
use crate::numeric::tape::{Tape, Var};

/// Output of one scaled dot-product attention.
#[derive(Debug, Clone, Copy)]
pub struct Attended {
    pub output: Var,
    /// Row-stochastic `queries × keys` weight matrix.
    pub weights: Var,
}

/// `softmax(q kᵀ / √d_k) v`.
///
/// Only the first `valid_keys` rows of `k`/`v` take part; later key positions
/// get zero weight, which is what a `-inf` logit would produce.
pub fn scaled_dot_attention(
    tape: &mut Tape,
    q: Var,
    k: Var,
    v: Var,
    valid_keys: Option<usize>,
) -> Result<Attended> {
    let (q_shape, k_shape, v_shape) = (
        tape.value(q).shape().to_vec(),
        tape.value(k).shape().to_vec(),
        tape.value(v).shape().to_vec(),
    );
    let d_k = q_shape[1];
    if d_k == 0 || k_shape[1] != d_k {
        return Err(Error::shape(
            "scaled_dot_attention",
            format!("q {q_shape:?} and k {k_shape:?} must share a non-zero d_k"),
        ));
    }
    if k_shape[0] != v_shape[0] {
        return Err(Error::shape(
            "scaled_dot_attention",
            format!("k {k_shape:?} and v {v_shape:?} must have the same rows"),
        ));
    }
    let n_keys = valid_keys.unwrap_or(k_shape[0]);
    if n_keys == 0 || n_keys > k_shape[0] {
        return Err(Error::shape(
            "scaled_dot_attention",
            format!("{n_keys} valid keys out of {}", k_shape[0]),
        ));
    }
    let (k, v) = if n_keys < k_shape[0] {
        (tape.slice_rows(k, 0, n_keys)?, tape.slice_rows(v, 0, n_keys)?)
    } else {
        (k, v)
    };
    let logits = tape.matmul_nt(q, k)?;
    let logits = tape.scale(logits, 1.0 / (d_k as f64).sqrt());
    let weights = tape.softmax(logits)?;
    let output = tape.matmul(weights, v)?;
    Ok(Attended { output, weights })
}
