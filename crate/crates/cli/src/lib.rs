//! Command-line front end: argument and config-file resolution, and the
//! dispatch of each command to the library.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use lcanet::corpus::{data_dir_from_env, encode_all, prepare, ClassCounts, Dataset, Prepared, Split};
use lcanet::evaluation::{
    evaluate_checkpoint, export_attention, run_ablation, sigma_sweep, Experiment, MetricsReport, Variant,
};
use lcanet::model::{predict, LceMode, ModelConfig, Pooling};
use lcanet::training::{load_checkpoint, train, Checkpoint};
use lcanet::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "lcanet", version, about = "Local context-aware sentiment classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse both splits of a dataset and print their class counts.
    Ingest(CommonArgs),
    /// Train on a dataset, evaluating on its test split every epoch.
    Train(CommonArgs),
    /// Evaluate a checkpoint on a dataset's test split.
    Eval(CommonArgs),
    /// Train and compare ablated variants.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated subset of full, no_lce, no_lcp, no_cdm.
        #[arg(long, value_delimiter = ',', default_value = "full,no_lce,no_lcp,no_cdm")]
        variants: Vec<Variant>,
    },
    /// Train once per σ value.
    SweepSigma {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', value_parser = unit_interval, default_value = "0,0.2,0.4,0.6,0.8,1")]
        sigmas: Vec<f64>,
    },
    /// Classify one target in one sentence with a checkpoint.
    Predict {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        query: Query,
    },
    /// Write per-token tags and attention for one sentence.
    ExportAttention {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        query: Query,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Query {
    #[arg(long)]
    pub sentence: String,
    #[arg(long)]
    pub target: String,
}

#[derive(Debug, Clone, Args)]
#[command(rename_all = "snake_case")]
pub struct CommonArgs {
    #[arg(long)]
    pub dataset: Option<Dataset>,
    /// Defaults to $LCANET_DATA_DIR.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Whitespace-separated word vectors (GloVe text format).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Directory for metric files and default outputs.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
    /// Flat TOML file of configuration values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
}

/// Optional values for every [`ModelConfig`] field, under the same names in
/// flags and config files.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[command(rename_all = "snake_case")]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[arg(long)]
    pub d_h: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub pad_len: Option<usize>,
    #[arg(long)]
    pub alpha: Option<usize>,
    #[arg(long, value_parser = unit_interval)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lce_mode: Option<LceMode>,
    #[arg(long)]
    pub lcp_enabled: Option<bool>,
    #[arg(long)]
    pub cdm_enabled: Option<bool>,
    #[arg(long)]
    pub pooling: Option<Pooling>,
    #[arg(long)]
    pub freeze_embeddings: Option<bool>,
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    #[arg(long)]
    pub adam_epsilon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn unit_interval(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{s} is outside [0, 1]"))
    }
}

impl ConfigOverrides {
    fn apply(&self, c: &mut ModelConfig) {
        macro_rules! set {
            ($($field:ident),+) => { $(if let Some(v) = self.$field.clone() { c.$field = v; })+ };
        }
        set!(
            d_h, heads, embed_dim, dropout, pad_len, alpha, sigma, lambda, learning_rate, batch_size, epochs,
            lce_mode, lcp_enabled, cdm_enabled, pooling, freeze_embeddings, adam_beta1, adam_beta2, adam_epsilon,
            seed
        );
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Ingest,
    Train,
    Eval,
    Ablate,
    SweepSigma,
    Predict,
    ExportAttention,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Ingest => "ingest",
            CommandKind::Train => "train",
            CommandKind::Eval => "eval",
            CommandKind::Ablate => "ablate",
            CommandKind::SweepSigma => "sweep-sigma",
            CommandKind::Predict => "predict",
            CommandKind::ExportAttention => "export-attention",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub output: PathBuf,
}

/// A fully resolved invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSpec {
    pub command: CommandKind,
    pub dataset: Option<Dataset>,
    pub paths: Paths,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub variants: Vec<Variant>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sigmas: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentence: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    pub config: ModelConfig,
}

/// Failure to turn arguments into a [`RunSpec`].
#[derive(Debug)]
pub enum ArgsError {
    /// Bad command line; clap has the message and exit code.
    Usage(clap::Error),
    /// Config-file or value problem.
    Invalid(Error),
}

impl From<clap::Error> for ArgsError {
    fn from(e: clap::Error) -> Self {
        ArgsError::Usage(e)
    }
}

impl From<Error> for ArgsError {
    fn from(e: Error) -> Self {
        ArgsError::Invalid(e)
    }
}

/// Resolves `argv` (program name first). Precedence: flags, then the config
/// file, then the dataset's defaults.
pub fn parse_args<I, T>(argv: I) -> std::result::Result<RunSpec, ArgsError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (command, common, variants, sigmas, query) = match cli.command {
        Command::Ingest(c) => (CommandKind::Ingest, c, vec![], vec![], None),
        Command::Train(c) => (CommandKind::Train, c, vec![], vec![], None),
        Command::Eval(c) => (CommandKind::Eval, c, vec![], vec![], None),
        Command::Ablate { common, variants } => (CommandKind::Ablate, common, variants, vec![], None),
        Command::SweepSigma { common, sigmas } => (CommandKind::SweepSigma, common, vec![], sigmas, None),
        Command::Predict { common, query } => (CommandKind::Predict, common, vec![], vec![], Some(query)),
        Command::ExportAttention { common, query } => {
            (CommandKind::ExportAttention, common, vec![], vec![], Some(query))
        }
    };

    let mut config = common.dataset.map(ModelConfig::for_dataset).unwrap_or_default();
    if let Some(path) = &common.config {
        read_config_file(path)?.apply(&mut config);
    }
    common.overrides.apply(&mut config);
    config.validate()?;

    Ok(RunSpec {
        command,
        dataset: common.dataset,
        paths: Paths {
            data_dir: common.data_dir.or_else(data_dir_from_env),
            vectors: common.vectors,
            checkpoint: common.checkpoint,
            output: common.output,
        },
        variants,
        sigmas,
        sentence: query.as_ref().map(|q| q.sentence.clone()),
        target: query.map(|q| q.target),
        config,
    })
}

pub fn read_config_file(path: &Path) -> Result<ConfigOverrides> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Distinct process status per error kind.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 3,
        Error::Io { .. } => 4,
        Error::Parse { .. } => 5,
        Error::Format(_) => 6,
        Error::IncompatibleVersion { .. } => 7,
        Error::Lookup(_) => 8,
        Error::Unrepresentable(_) => 9,
        Error::Divergence { .. } => 10,
        Error::Shape { .. } | Error::Index(_) | Error::Contract(_) => 11,
    }
}

/// Exit status for command-line usage errors.
pub const USAGE_EXIT: u8 = 2;

impl RunSpec {
    /// The resolved spec as TOML, printed before every run.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# cannot render configuration: {e}\n"))
    }

    fn dataset(&self) -> Result<Dataset> {
        self.dataset
            .ok_or_else(|| Error::Config(format!("`{}` needs --dataset", self.command.name())))
    }

    fn data_dir(&self) -> Result<&Path> {
        self.paths
            .data_dir
            .as_deref()
            .ok_or_else(|| Error::Config("no data directory: pass --data_dir or set LCANET_DATA_DIR".into()))
    }

    fn checkpoint_in(&self) -> Result<&Path> {
        self.paths
            .checkpoint
            .as_deref()
            .ok_or_else(|| Error::Config(format!("`{}` needs --checkpoint", self.command.name())))
    }

    /// `<output>/<dataset>_<command>_<seed>.csv`.
    pub fn metrics_path(&self) -> PathBuf {
        let dataset = self.dataset.map_or("model", Dataset::name);
        self.paths
            .output
            .join(format!("{dataset}_{}_{}.csv", self.command.name(), self.config.seed))
    }

    fn write_metrics(&self, contents: &str, out: &mut String) -> Result<()> {
        let path = self.metrics_path();
        let io = |source| Error::Io {
            path: path.clone(),
            source,
        };
        fs::create_dir_all(&self.paths.output).map_err(io)?;
        fs::write(&path, contents).map_err(io)?;
        let _ = writeln!(out, "metrics written to {}", path.display());
        Ok(())
    }

    fn prepared(&self, out: &mut String) -> Result<Prepared> {
        let dataset = self.dataset()?;
        let p = prepare(
            dataset,
            self.data_dir()?,
            self.paths.vectors.as_deref(),
            self.config.embed_dim,
            self.config.pad_len,
            self.config.seed,
        )?;
        if p.is_reproduction() {
            let _ = writeln!(out, "vectors: {:.1}% of the vocabulary covered", 100.0 * p.coverage);
        } else {
            let _ = writeln!(out, "NOTE: non-reproduction run (random embeddings, no vectors file)");
        }
        Ok(p)
    }
}

/// Runs a resolved spec, returning everything it printed.
pub fn run(spec: &RunSpec) -> Result<String> {
    let mut out = String::new();
    match spec.command {
        CommandKind::Ingest => ingest(spec, &mut out)?,
        CommandKind::Train => train_cmd(spec, &mut out)?,
        CommandKind::Eval => eval_cmd(spec, &mut out)?,
        CommandKind::Ablate => ablate_cmd(spec, &mut out)?,
        CommandKind::SweepSigma => sweep_cmd(spec, &mut out)?,
        CommandKind::Predict => predict_cmd(spec, &mut out)?,
        CommandKind::ExportAttention => export_cmd(spec, &mut out)?,
    }
    Ok(out)
}

fn ingest(spec: &RunSpec, out: &mut String) -> Result<()> {
    let dataset = spec.dataset()?;
    let dir = spec.data_dir()?;
    let mut csv = String::from("split,positive,negative,neutral,total\n");
    let _ = writeln!(out, "{:<12}{:<7}{:>9}{:>9}{:>9}{:>8}", "dataset", "split", "positive", "negative", "neutral", "total");
    for split in [Split::Train, Split::Test] {
        let c = ClassCounts::of(&dataset.load_split(dir, split)?);
        let name = format!("{split:?}").to_lowercase();
        let _ = writeln!(
            out,
            "{:<12}{:<7}{:>9}{:>9}{:>9}{:>8}",
            dataset.name(),
            name,
            c.positive,
            c.negative,
            c.neutral,
            c.total()
        );
        let _ = writeln!(csv, "{name},{},{},{},{}", c.positive, c.negative, c.neutral, c.total());
    }
    spec.write_metrics(&csv, out)
}

fn metrics_table(m: &MetricsReport, out: &mut String) {
    let _ = writeln!(out, "accuracy  {:.2}%", 100.0 * m.accuracy);
    let _ = writeln!(out, "macro-F1  {:.2}%", 100.0 * m.macro_f1);
    let _ = writeln!(out, "LC-tag accuracy  {:.2}%", 100.0 * m.lc_tag_accuracy);
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}{:>9}", "class", "precision", "recall", "F1", "support");
    for (p, s) in lcanet::corpus::Polarity::ALL.iter().zip(&m.per_class) {
        let _ = writeln!(
            out,
            "{:<10}{:>10.4}{:>10.4}{:>10.4}{:>9}",
            p.name(),
            s.precision,
            s.recall,
            s.f1,
            s.support
        );
    }
}

fn metrics_csv(m: &MetricsReport) -> String {
    let mut csv = String::from("metric,value\n");
    let _ = writeln!(csv, "accuracy,{}", m.accuracy);
    let _ = writeln!(csv, "macro_f1,{}", m.macro_f1);
    let _ = writeln!(csv, "lc_tag_accuracy,{}", m.lc_tag_accuracy);
    for (p, s) in lcanet::corpus::Polarity::ALL.iter().zip(&m.per_class) {
        let n = p.name();
        let _ = writeln!(csv, "{n}_precision,{}\n{n}_recall,{}\n{n}_f1,{}", s.precision, s.recall, s.f1);
    }
    for (g, row) in m.confusion.counts.iter().enumerate() {
        for (p, c) in row.iter().enumerate() {
            let _ = writeln!(csv, "confusion_{g}_{p},{c}");
        }
    }
    csv
}

fn experiment(p: &Prepared) -> Experiment<'_> {
    Experiment {
        vocab: &p.vocab,
        embedding: &p.embedding,
        train: &p.train,
        test: &p.test,
    }
}

fn train_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let p = spec.prepared(out)?;
    let (ckpt, report) = train(&spec.config, &p.vocab, p.embedding.clone(), &p.train, Some(&p.test))?;
    let _ = writeln!(
        out,
        "{:>5}{:>10}{:>10}{:>10}{:>10}{:>10}{:>10}{:>9}",
        "epoch", "loss", "pol", "lcp", "train_acc", "test_acc", "test_f1", "seconds"
    );
    for e in &report.epochs {
        let t = e.test.as_ref();
        let _ = writeln!(
            out,
            "{:>5}{:>10.4}{:>10.4}{:>10}{:>10.4}{:>10.4}{:>10.4}{:>9.1}",
            e.epoch,
            e.loss,
            e.polarity_loss,
            e.lcp_loss.map_or("-".into(), |l| format!("{l:.4}")),
            e.train_accuracy,
            t.map_or(f64::NAN, |m| m.accuracy),
            t.map_or(f64::NAN, |m| m.macro_f1),
            e.seconds
        );
    }
    if let Some(best) = report.best_epoch() {
        let m = best.test.as_ref().expect("best epoch has test metrics");
        let _ = writeln!(
            out,
            "best epoch {}: accuracy {:.2}% macro-F1 {:.2}%",
            best.epoch,
            100.0 * m.accuracy,
            100.0 * m.macro_f1
        );
    }
    if let Some(m) = &ckpt.metrics {
        let _ = writeln!(out, "final epoch:");
        metrics_table(m, out);
    }
    let path = spec.paths.checkpoint.clone().unwrap_or_else(|| {
        spec.paths
            .output
            .join(format!("{}_{}.ckpt", p.dataset.name(), spec.config.seed))
    });
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    ckpt.save(&path)?;
    let _ = writeln!(out, "checkpoint written to {}", path.display());
    spec.write_metrics(&report.to_csv()?, out)
}

fn load(spec: &RunSpec) -> Result<Checkpoint> {
    load_checkpoint(spec.checkpoint_in()?)
}

fn eval_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let ckpt = load(spec)?;
    let dataset = spec.dataset()?;
    let test = dataset.load_split(spec.data_dir()?, Split::Test)?;
    let encoded = encode_all(&test, &ckpt.vocab, ckpt.config.pad_len)?;
    let metrics = evaluate_checkpoint(&ckpt, &encoded, Some(spec.config.alpha))?;
    metrics_table(&metrics, out);
    spec.write_metrics(&metrics_csv(&metrics), out)
}

fn ablate_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let p = spec.prepared(out)?;
    let rows = run_ablation(&spec.config, &experiment(&p), &spec.variants)?;
    let mut csv = String::from("variant,accuracy,macro_f1,best_accuracy,best_macro_f1\n");
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>12}{:>10}", "variant", "acc", "F1", "best acc", "best F1");
    for r in &rows {
        let best = r.report.best_epoch().and_then(|e| e.test.as_ref());
        let (ba, bf) = best.map_or((f64::NAN, f64::NAN), |m| (m.accuracy, m.macro_f1));
        let _ = writeln!(
            out,
            "{:<10}{:>10.2}{:>10.2}{:>12.2}{:>10.2}",
            r.variant.as_str(),
            100.0 * r.metrics.accuracy,
            100.0 * r.metrics.macro_f1,
            100.0 * ba,
            100.0 * bf
        );
        let _ = writeln!(csv, "{},{},{},{ba},{bf}", r.variant, r.metrics.accuracy, r.metrics.macro_f1);
    }
    spec.write_metrics(&csv, out)
}

fn sweep_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let p = spec.prepared(out)?;
    let curve = sigma_sweep(&spec.config, &experiment(&p), &spec.sigmas)?;
    let mut csv = String::from("sigma,accuracy,macro_f1\n");
    let _ = writeln!(out, "{:>6}{:>10}{:>10}", "sigma", "acc", "F1");
    for pt in &curve {
        let _ = writeln!(out, "{:>6}{:>10.2}{:>10.2}", pt.sigma, 100.0 * pt.accuracy, 100.0 * pt.macro_f1);
        let _ = writeln!(csv, "{},{},{}", pt.sigma, pt.accuracy, pt.macro_f1);
    }
    spec.write_metrics(&csv, out)
}

fn query(spec: &RunSpec) -> (&str, &str) {
    (
        spec.sentence.as_deref().unwrap_or_default(),
        spec.target.as_deref().unwrap_or_default(),
    )
}

fn predict_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let ckpt = load(spec)?;
    let (sentence, target) = query(spec);
    let p = predict(&ckpt.params, &ckpt.config, &ckpt.vocab, sentence, target)?;
    let probs = p.polarity_probs;
    let _ = writeln!(
        out,
        "polarity: {} (negative {:.4}, neutral {:.4}, positive {:.4})",
        p.polarity, probs[0], probs[1], probs[2]
    );
    let _ = writeln!(out, "{:<16}{:>5}{:>5}{:>11}", "token", "gold", "pred", "attention");
    for (i, t) in p.tokens.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<16}{:>5}{:>5}{:>11.5}",
            t, p.gold_tags[i], p.predicted_tags[i], p.attention[i]
        );
    }
    Ok(())
}

fn export_cmd(spec: &RunSpec, out: &mut String) -> Result<()> {
    let ckpt = load(spec)?;
    let (sentence, target) = query(spec);
    let path = spec.metrics_path();
    fs::create_dir_all(&spec.paths.output).map_err(|source| Error::Io {
        path: spec.paths.output.clone(),
        source,
    })?;
    let p = export_attention(&ckpt, sentence, target, &path)?;
    let _ = writeln!(out, "{} rows written to {}", p.tokens.len(), path.display());
    Ok(())
}
