//! Joint optimization of the polarity and local-context objectives.

pub mod checkpoint;
pub mod loss;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use loss::{joint_loss, lcp_loss, JointLoss, LossTargets};

use crate::corpus::{EncodedExample, Vocabulary};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, metrics, MetricsReport};
use crate::model::{forward, ModelConfig, ModelParams, Mode};
use crate::numeric::{adam_step, AdamState, Tape, Tensor};

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

/// Loss components of one optimizer step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub loss: f64,
    pub polarity_loss: f64,
    pub lcp_loss: Option<f64>,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub polarity_loss: f64,
    pub lcp_loss: Option<f64>,
    pub l2: f64,
    /// Computed from the training-mode predictions made during the epoch.
    pub train_accuracy: f64,
    pub train_macro_f1: f64,
    pub test: Option<MetricsReport>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Total loss of every optimizer step, in order.
    pub batch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_epoch(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// Per-epoch metrics as CSV. Wall-clock time is left out so identical
    /// runs produce identical files.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let row = |w: &mut csv::Writer<Vec<u8>>, fields: Vec<String>| {
            w.write_record(fields).map_err(|e| Error::Format(e.to_string()))
        };
        row(
            &mut w,
            [
                "epoch", "loss", "polarity_loss", "lcp_loss", "l2", "train_accuracy", "train_macro_f1",
                "test_accuracy", "test_macro_f1", "test_lc_tag_accuracy",
            ]
            .map(String::from)
            .to_vec(),
        )?;
        for e in &self.epochs {
            let test = e.test.as_ref();
            row(
                &mut w,
                vec![
                    e.epoch.to_string(),
                    e.loss.to_string(),
                    e.polarity_loss.to_string(),
                    fmt(e.lcp_loss),
                    e.l2.to_string(),
                    e.train_accuracy.to_string(),
                    e.train_macro_f1.to_string(),
                    fmt(test.map(|m| m.accuracy)),
                    fmt(test.map(|m| m.macro_f1)),
                    fmt(test.map(|m| m.lc_tag_accuracy)),
                ],
            )?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of ASCII fields"))
    }

    /// Epoch with the highest test accuracy (earliest on ties).
    pub fn best_epoch(&self) -> Option<&EpochRecord> {
        self.epochs
            .iter()
            .filter(|e| e.test.is_some())
            .fold(None, |best: Option<&EpochRecord>, e| match best {
                Some(b) if b.test.as_ref().unwrap().accuracy >= e.test.as_ref().unwrap().accuracy => Some(b),
                _ => Some(e),
            })
    }
}

/// Forward, joint loss, backward and one Adam update on a single batch.
/// Returns the loss before the update and the batch's polarity predictions.
pub fn train_step(
    params: &mut ModelParams,
    state: &mut AdamState,
    config: &ModelConfig,
    batch: &[&EncodedExample],
    mode: Mode<'_>,
) -> Result<(StepStats, Vec<usize>)> {
    params.store.zero_grad();
    let mut tape = Tape::new();
    let out = forward(&mut tape, params, config, batch, mode)?;
    let targets = LossTargets::new(batch, &out, config.pad_len);
    let tags = config.lcp_enabled.then_some(out.tag_probs);
    let l2 = params.l2_penalty(config);
    let loss = joint_loss(&mut tape, out.polarity_probs, tags, &targets, l2, config.sigma)?;
    let stats = StepStats {
        loss: tape.scalar(loss.total),
        polarity_loss: tape.scalar(loss.polarity),
        lcp_loss: loss.lcp.map(|v| tape.scalar(v)),
        l2,
    };
    let predictions = tape.value(out.polarity_probs).argmax_rows();
    if !stats.loss.is_finite() {
        return Ok((stats, predictions));
    }
    tape.backward(loss.total, &mut params.store)?;
    let l2_grad = params.l2_grad(config);
    adam_step(
        &mut params.store,
        state,
        &config.adam(),
        config.learning_rate,
        Some(&l2_grad),
    )?;
    Ok((stats, predictions))
}

/// Trains from freshly initialized parameters around `embedding`.
///
/// Mini-batches are reshuffled every epoch from a generator seeded by
/// `config.seed`; identical inputs give bit-identical results. When a test
/// split is given it is evaluated after every epoch.
pub fn train(
    config: &ModelConfig,
    vocab: &Vocabulary,
    embedding: Tensor,
    train_set: &[EncodedExample],
    test_set: Option<&[EncodedExample]>,
) -> Result<(Checkpoint, TrainReport)> {
    let params = ModelParams::init(config, embedding)?;
    let mut trainer = Trainer::new(config, vocab, params, train_set)?;
    for _ in 0..config.epochs {
        trainer.run_epoch(test_set)?;
    }
    Ok(trainer.finish())
}

/// Epoch-by-epoch training state. [`train`] is the usual entry point; this
/// is for callers that inspect the model between epochs.
pub struct Trainer<'a> {
    config: ModelConfig,
    vocab: &'a Vocabulary,
    params: ModelParams,
    train_set: &'a [EncodedExample],
    state: AdamState,
    shuffle_rng: ChaCha8Rng,
    dropout_rng: ChaCha8Rng,
    order: Vec<usize>,
    report: TrainReport,
    last_metrics: Option<MetricsReport>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        config: &ModelConfig,
        vocab: &'a Vocabulary,
        params: ModelParams,
        train_set: &'a [EncodedExample],
    ) -> Result<Self> {
        config.validate()?;
        if train_set.is_empty() {
            return Err(Error::Contract("empty training set".into()));
        }
        if params.vocab_len() != vocab.len() {
            return Err(Error::Contract(format!(
                "embedding has {} rows, vocabulary {}",
                params.vocab_len(),
                vocab.len()
            )));
        }
        log::info!(
            "training: {} parameters ({} trainable), {} examples, seed {}",
            params.store.scalar_count(),
            params.store.trainable_scalar_count(),
            train_set.len(),
            config.seed
        );
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
        shuffle_rng.set_stream(SHUFFLE_STREAM);
        let mut dropout_rng = ChaCha8Rng::seed_from_u64(config.seed);
        dropout_rng.set_stream(DROPOUT_STREAM);
        Ok(Trainer {
            config: config.clone(),
            vocab,
            state: AdamState::new(&params.store),
            params,
            train_set,
            shuffle_rng,
            dropout_rng,
            order: (0..train_set.len()).collect(),
            report: TrainReport {
                seed: config.seed,
                epochs: Vec::new(),
                batch_losses: Vec::new(),
            },
            last_metrics: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    /// One pass over the shuffled training set, then an optional test
    /// evaluation.
    pub fn run_epoch(&mut self, test_set: Option<&[EncodedExample]>) -> Result<&EpochRecord> {
        let epoch = self.report.epochs.len() + 1;
        let started = Instant::now();
        self.order.shuffle(&mut self.shuffle_rng);
        let (mut loss, mut pol, mut lcp, mut l2) = (0.0, 0.0, 0.0, 0.0);
        let mut preds = Vec::with_capacity(self.train_set.len());
        let mut gold = Vec::with_capacity(self.train_set.len());

        for (b, chunk) in self.order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<&EncodedExample> = chunk.iter().map(|&i| &self.train_set[i]).collect();
            let (stats, p) = train_step(
                &mut self.params,
                &mut self.state,
                &self.config,
                &batch,
                Mode::Train(&mut self.dropout_rng),
            )?;
            if !stats.loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b,
                    loss: stats.loss,
                });
            }
            let w = batch.len() as f64;
            loss += stats.loss * w;
            pol += stats.polarity_loss * w;
            lcp += stats.lcp_loss.unwrap_or(0.0) * w;
            l2 += stats.l2 * w;
            self.report.batch_losses.push(stats.loss);
            preds.extend(p);
            gold.extend(batch.iter().map(|e| e.polarity.index()));
        }

        let n = self.train_set.len() as f64;
        let test = test_set
            .map(|t| evaluate(&self.params, &self.config, t))
            .transpose()?;
        let record = EpochRecord {
            epoch,
            loss: loss / n,
            polarity_loss: pol / n,
            lcp_loss: self.config.lcp_enabled.then_some(lcp / n),
            l2: l2 / n,
            train_accuracy: metrics::accuracy(&preds, &gold)?,
            train_macro_f1: metrics::macro_f1(&preds, &gold, metrics::CLASSES)?,
            test: test.clone(),
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: loss {:.4} train acc {:.4}{}",
            record.loss,
            record.train_accuracy,
            test.as_ref()
                .map(|m| format!(" test acc {:.4} macro-F1 {:.4}", m.accuracy, m.macro_f1))
                .unwrap_or_default()
        );
        self.last_metrics = test;
        self.report.epochs.push(record);
        Ok(self.report.epochs.last().expect("just pushed"))
    }

    /// Checkpoint of the current (final) epoch and the full report.
    pub fn finish(mut self) -> (Checkpoint, TrainReport) {
        self.params.store.clear_grad();
        let ckpt = Checkpoint {
            config: self.config,
            vocab: self.vocab.clone(),
            params: self.params,
            metrics: self.last_metrics,
        };
        (ckpt, self.report)
    }
}
