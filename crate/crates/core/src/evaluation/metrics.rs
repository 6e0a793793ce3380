use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLASSES: usize = 3;

fn check(pred: &[usize], gold: &[usize]) -> Result<()> {
    if pred.is_empty() {
        return Err(Error::Contract("metrics over zero examples".into()));
    }
    if pred.len() != gold.len() {
        return Err(Error::Contract(format!(
            "{} predictions for {} gold labels",
            pred.len(),
            gold.len()
        )));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    check(pred, gold)?;
    let hits = pred.iter().zip(gold).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1 over `classes` classes. A class with no
/// true positives (including one absent from both sides) scores 0.
pub fn macro_f1(pred: &[usize], gold: &[usize], classes: usize) -> Result<f64> {
    check(pred, gold)?;
    let cm = ConfusionMatrix::from_labels(pred, gold, classes)?;
    Ok(cm.scores().iter().map(|s| s.f1).sum::<f64>() / classes as f64)
}

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(pred: &[usize], gold: &[usize], classes: usize) -> Result<Self> {
        let mut counts = vec![vec![0; classes]; classes];
        for (&p, &g) in pred.iter().zip(gold) {
            if p >= classes || g >= classes {
                return Err(Error::Index(format!("label {} outside {classes} classes", p.max(g))));
            }
            counts[g][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(g, row)| row.iter().enumerate().all(|(p, &c)| p == g || c == 0))
    }

    pub fn scores(&self) -> Vec<ClassScores> {
        let k = self.counts.len();
        (0..k)
            .map(|c| {
                let tp = self.counts[c][c] as f64;
                let predicted: usize = (0..k).map(|g| self.counts[g][c]).sum();
                let support: usize = self.counts[c].iter().sum();
                let ratio = |num: f64, den: usize| if den == 0 { 0.0 } else { num / den as f64 };
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                ClassScores {
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect()
    }
}

/// Polarity and tag metrics of one evaluation pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
    /// Fraction of valid tokens whose predicted tag matches the SRD rule.
    pub lc_tag_accuracy: f64,
}

impl MetricsReport {
    pub fn from_predictions(pred: &[usize], gold: &[usize], lc_tag_accuracy: f64) -> Result<Self> {
        check(pred, gold)?;
        let confusion = ConfusionMatrix::from_labels(pred, gold, CLASSES)?;
        let per_class = confusion.scores();
        Ok(MetricsReport {
            accuracy: accuracy(pred, gold)?,
            macro_f1: per_class.iter().map(|s| s.f1).sum::<f64>() / CLASSES as f64,
            per_class,
            confusion,
            lc_tag_accuracy,
        })
    }

    pub fn examples(&self) -> usize {
        self.confusion.total()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    const P: usize = 2;
    const N: usize = 0;
    const O: usize = 1;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 2]).unwrap(), 0.0);
        assert_eq!(accuracy(&[P, P, N, O], &[P, N, N, O]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(macro_f1(&[], &[], 3).is_err());
    }

    #[test]
    fn perfect_and_absent_class() {
        assert_eq!(macro_f1(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap(), 1.0);
        // class 1 never appears: contributes 0
        let f = macro_f1(&[0, 2, 2], &[0, 2, 2], 3).unwrap();
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    /// Independent route: per-class counting straight from label pairs.
    fn oracle_macro_f1(pred: &[usize], gold: &[usize]) -> f64 {
        let mut total = 0.0;
        for c in 0..3 {
            let tp = pred.iter().zip(gold).filter(|(p, g)| **p == c && **g == c).count() as f64;
            let fp = pred.iter().zip(gold).filter(|(p, g)| **p == c && **g != c).count() as f64;
            let fn_ = pred.iter().zip(gold).filter(|(p, g)| **p != c && **g == c).count() as f64;
            if tp > 0.0 {
                total += 2.0 * tp / (2.0 * tp + fp + fn_);
            }
        }
        total / 3.0
    }

    #[test]
    fn twenty_label_fixture() {
        let gold = [2, 0, 1, 2, 2, 0, 1, 1, 2, 0, 2, 2, 1, 0, 0, 2, 1, 2, 0, 1];
        let pred = [2, 0, 2, 2, 1, 0, 1, 0, 2, 2, 2, 1, 1, 0, 1, 2, 1, 2, 0, 0];
        let f = macro_f1(&pred, &gold, 3).unwrap();
        assert!((f - oracle_macro_f1(&pred, &gold)).abs() < 1e-12);
        let r = MetricsReport::from_predictions(&pred, &gold, 1.0).unwrap();
        assert_eq!(r.examples(), 20);
        assert!((r.macro_f1 - f).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60), rot in 0usize..60) {
            let (pred, gold): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let mut shuffled = pairs.clone();
            shuffled.rotate_left(rot % pairs.len());
            shuffled.reverse();
            let (p2, g2): (Vec<_>, Vec<_>) = shuffled.into_iter().unzip();
            prop_assert_eq!(accuracy(&pred, &gold).unwrap(), accuracy(&p2, &g2).unwrap());
            prop_assert!((macro_f1(&pred, &gold, 3).unwrap() - macro_f1(&p2, &g2, 3).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn matches_oracle_and_bounds(pairs in prop::collection::vec((0usize..3, 0usize..3), 1..60)) {
            let (pred, gold): (Vec<_>, Vec<_>) = pairs.iter().copied().unzip();
            let f = macro_f1(&pred, &gold, 3).unwrap();
            prop_assert!((f - oracle_macro_f1(&pred, &gold)).abs() < 1e-12);
            prop_assert!(f <= 1.0);
            let cm = ConfusionMatrix::from_labels(&pred, &gold, 3).unwrap();
            prop_assert_eq!(cm.total(), pred.len());
            let all_present = (0..3).all(|c| gold.contains(&c));
            if all_present {
                prop_assert_eq!(f == 1.0, cm.is_diagonal());
            }
        }
    }
}
