//! Metrics, ablations, the σ sweep and attention export.

pub mod metrics;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use metrics::{accuracy, macro_f1, ClassScores, ConfusionMatrix, MetricsReport, CLASSES};

use crate::corpus::{EncodedExample, Vocabulary};
use crate::error::{Error, Result};
use crate::model::{forward, predict, LceMode, ModelConfig, ModelParams, Mode, Prediction};
use crate::numeric::{Tape, Tensor};
use crate::training::{train, Checkpoint, TrainReport};

const EVAL_BATCH: usize = 32;

/// Eval-mode pass over `examples`. Tags are always scored against the SRD
/// rule at `config.alpha`, even when the tag head was not trained.
pub fn evaluate(params: &ModelParams, config: &ModelConfig, examples: &[EncodedExample]) -> Result<MetricsReport> {
    let mut pred = Vec::with_capacity(examples.len());
    let mut gold = Vec::with_capacity(examples.len());
    let (mut tag_hits, mut tag_total) = (0usize, 0usize);
    let refs: Vec<&EncodedExample> = examples.iter().collect();
    for batch in refs.chunks(EVAL_BATCH) {
        let mut tape = Tape::new();
        let out = forward(&mut tape, params, config, batch, Mode::Eval)?;
        pred.extend(tape.value(out.polarity_probs).argmax_rows());
        gold.extend(batch.iter().map(|e| e.polarity.index()));
        for trace in &out.sentences {
            let predicted = tape.value(trace.tag_probs).argmax_rows();
            tag_hits += predicted
                .iter()
                .zip(&trace.tags.tags)
                .filter(|(p, g)| **p == **g as usize)
                .count();
            tag_total += trace.valid_len;
        }
    }
    let lc_tag_accuracy = if tag_total == 0 {
        0.0
    } else {
        tag_hits as f64 / tag_total as f64
    };
    MetricsReport::from_predictions(&pred, &gold, lc_tag_accuracy)
}

/// Evaluates a checkpoint. `dataset_alpha`, when given and different from
/// the checkpoint's, only triggers a warning: tags use the checkpoint's α.
pub fn evaluate_checkpoint(
    ckpt: &Checkpoint,
    examples: &[EncodedExample],
    dataset_alpha: Option<usize>,
) -> Result<MetricsReport> {
    if let Some(alpha) = dataset_alpha.filter(|&a| a != ckpt.config.alpha) {
        log::warn!(
            "dataset alpha {alpha} differs from checkpoint alpha {}; using {}",
            ckpt.config.alpha,
            ckpt.config.alpha
        );
    }
    evaluate(&ckpt.params, &ckpt.config, examples)
}

/// One row of the ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoLce,
    NoLcp,
    NoCdm,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoLce, Variant::NoLcp, Variant::NoCdm];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoLce => "no_lce",
            Variant::NoLcp => "no_lcp",
            Variant::NoCdm => "no_cdm",
        }
    }

    /// Removes exactly one mechanism from `base`.
    pub fn apply(self, base: &ModelConfig) -> ModelConfig {
        let mut c = base.clone();
        match self {
            Variant::Full => {}
            Variant::NoLce => c.lce_mode = LceMode::Off,
            Variant::NoLcp => c.lcp_enabled = false,
            Variant::NoCdm => c.cdm_enabled = false,
        }
        c
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?} (expected full, no_lce, no_lcp or no_cdm)")))
    }
}

/// Everything a training run consumes besides its configuration.
#[derive(Clone, Copy)]
pub struct Experiment<'a> {
    pub vocab: &'a Vocabulary,
    pub embedding: &'a Tensor,
    pub train: &'a [EncodedExample],
    pub test: &'a [EncodedExample],
}

impl Experiment<'_> {
    /// Trains under `config` and evaluates the final epoch on the test split.
    pub fn run(&self, config: &ModelConfig) -> Result<(MetricsReport, TrainReport)> {
        let (ckpt, report) = train(config, self.vocab, self.embedding.clone(), self.train, Some(self.test))?;
        let metrics = match ckpt.metrics {
            Some(m) => m,
            None => evaluate(&ckpt.params, &ckpt.config, self.test)?,
        };
        Ok((metrics, report))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub metrics: MetricsReport,
    pub report: TrainReport,
}

/// Trains each variant from the same seed, so data order and initial
/// weights are shared.
pub fn run_ablation(base: &ModelConfig, data: &Experiment<'_>, variants: &[Variant]) -> Result<Vec<AblationRow>> {
    variants
        .iter()
        .map(|&variant| {
            log::info!("ablation variant {variant}");
            let (metrics, report) = data.run(&variant.apply(base))?;
            Ok(AblationRow {
                variant,
                metrics,
                report,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub sigma: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// One full training per σ, all from the same seed.
pub fn sigma_sweep(base: &ModelConfig, data: &Experiment<'_>, sigmas: &[f64]) -> Result<Vec<SweepPoint>> {
    if let Some(s) = sigmas.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Config(format!("sigma = {s} outside [0, 1]")));
    }
    sigmas
        .iter()
        .map(|&sigma| {
            log::info!("sigma sweep: {sigma}");
            let (m, _) = data.run(&ModelConfig { sigma, ..base.clone() })?;
            Ok(SweepPoint {
                sigma,
                accuracy: m.accuracy,
                macro_f1: m.macro_f1,
            })
        })
        .collect()
}

/// Writes one row per token of `sentence`: the token, its gold and predicted
/// LC-tag, and the mean global attention it receives.
pub fn export_attention(ckpt: &Checkpoint, sentence: &str, target: &str, path: &Path) -> Result<Prediction> {
    let p = predict(&ckpt.params, &ckpt.config, &ckpt.vocab, sentence, target)?;
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Format(format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["token", "gold_tag", "pred_tag", "attention"]).map_err(io)?;
    for (i, token) in p.tokens.iter().enumerate() {
        w.write_record([
            token.clone(),
            p.gold_tags[i].to_string(),
            p.predicted_tags[i].to_string(),
            p.attention[i].to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(p)
}
