use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::model::ForwardOutput;
use crate::numeric::{Tape, Tensor, Var};

/// Gold labels for one batch, laid out like the forward outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTargets {
    pub polarity: Vec<usize>,
    /// `b · pad_len` gold tags, sentence-major.
    pub tags: Vec<usize>,
    /// 1 for valid positions, 0 for padding.
    pub tag_weights: Vec<f64>,
}

impl LossTargets {
    pub fn new(batch: &[&EncodedExample], out: &ForwardOutput, pad_len: usize) -> Self {
        let mut tags = Vec::with_capacity(batch.len() * pad_len);
        let mut tag_weights = Vec::with_capacity(batch.len() * pad_len);
        for trace in &out.sentences {
            tags.extend(trace.tags.tags.iter().map(|&t| t as usize));
            tag_weights.extend((0..pad_len).map(|i| if i < trace.valid_len { 1.0 } else { 0.0 }));
        }
        LossTargets {
            polarity: batch.iter().map(|e| e.polarity.index()).collect(),
            tags,
            tag_weights,
        }
    }
}

/// Token-level cross-entropy of the tag head, averaged over valid positions.
pub fn lcp_loss(tape: &mut Tape, tag_probs: Var, gold_tags: &[usize], valid: &[f64]) -> Result<Var> {
    if tape.value(tag_probs).cols() != 2 {
        return Err(Error::shape(
            "lcp_loss",
            format!("tag probabilities {:?} are not pairs", tape.value(tag_probs).shape()),
        ));
    }
    tape.cross_entropy(tag_probs, gold_tags, Some(valid))
}

#[derive(Debug, Clone, Copy)]
pub struct JointLoss {
    pub total: Var,
    pub polarity: Var,
    pub lcp: Option<Var>,
    /// L2 penalty value; its gradient is applied outside the tape.
    pub l2: f64,
}

/// `(1 − σ)·CE_polarity + σ·L_lcp + λΣθ²`.
///
/// Both cross-entropies are non-negative; with `tag_probs = None` (the
/// auxiliary loss disabled) the objective is `CE_polarity + λΣθ²`.
pub fn joint_loss(
    tape: &mut Tape,
    polarity_probs: Var,
    tag_probs: Option<Var>,
    targets: &LossTargets,
    l2_penalty: f64,
    sigma: f64,
) -> Result<JointLoss> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::Config(format!("sigma = {sigma} outside [0, 1]")));
    }
    let polarity = tape.cross_entropy(polarity_probs, &targets.polarity, None)?;
    let l2 = tape.constant(Tensor::scalar(l2_penalty));
    let (data, lcp) = match tag_probs {
        Some(tags) => {
            let lcp = lcp_loss(tape, tags, &targets.tags, &targets.tag_weights)?;
            let a = tape.scale(polarity, 1.0 - sigma);
            let b = tape.scale(lcp, sigma);
            (tape.add(a, b)?, Some(lcp))
        }
        None => (polarity, None),
    };
    let total = tape.add(data, l2)?;
    Ok(JointLoss {
        total,
        polarity,
        lcp,
        l2: l2_penalty,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn probs(tape: &mut Tape, rows: &[Vec<f64>]) -> Var {
        tape.constant(Tensor::from_rows(rows).unwrap())
    }

    #[test]
    fn lcp_examples() {
        let mut tape = Tape::new();
        let perfect = probs(&mut tape, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.3, 0.7]]);
        let l = lcp_loss(&mut tape, perfect, &[0, 1, 0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(tape.scalar(l), 0.0);

        let uniform = probs(&mut tape, &vec![vec![0.5, 0.5]; 4]);
        let l = lcp_loss(&mut tape, uniform, &[0, 1, 1, 0], &[1.0; 4]).unwrap();
        assert!((tape.scalar(l) - 2f64.ln()).abs() < 1e-15);

        let mixed = probs(&mut tape, &[vec![0.9, 0.1], vec![0.5, 0.5]]);
        let l = lcp_loss(&mut tape, mixed, &[0, 1], &[1.0, 1.0]).unwrap();
        let expected = -(0.9f64.ln() + 0.5f64.ln()) / 2.0;
        assert!((tape.scalar(l) - expected).abs() < 1e-15);
        assert!((expected - 0.3993).abs() < 1e-4);
    }

    #[test]
    fn lcp_rejects_non_pairs() {
        let mut tape = Tape::new();
        let p = probs(&mut tape, &[vec![0.2, 0.3, 0.5]]);
        assert!(matches!(lcp_loss(&mut tape, p, &[0], &[1.0]), Err(Error::Shape { .. })));
    }

    #[test]
    fn sigma_out_of_range() {
        let mut tape = Tape::new();
        let p = probs(&mut tape, &[vec![0.2, 0.3, 0.5]]);
        let t = LossTargets {
            polarity: vec![2],
            tags: vec![],
            tag_weights: vec![],
        };
        assert!(matches!(joint_loss(&mut tape, p, None, &t, 0.0, 1.2), Err(Error::Config(_))));
    }
}
