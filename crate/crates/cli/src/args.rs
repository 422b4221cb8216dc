use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use efignn::experiment::{ModelKind, Precision};
use efignn::interpret::EffectRule;
use efignn::model::SkipMode;

#[derive(Debug, Parser)]
#[command(
    name = "efignn",
    version,
    about = "Explicit feature-interaction graph networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train over one or more seeds and print a run summary.
    Train(TrainArgs),
    /// Accuracy of a saved model on each split.
    Evaluate(EvaluateArgs),
    /// Export interaction effects of one node for one class.
    Explain(ExplainArgs),
    /// Run gradient checks, oracle equivalences and invariants.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Efignn,
    Gcn,
    Joint,
}

impl From<Kind> for ModelKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Efignn => ModelKind::Efignn,
            Kind::Gcn => ModelKind::Gcn,
            Kind::Joint => ModelKind::Joint,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Skip {
    None,
    Additive,
    Dense,
}

impl From<Skip> for SkipMode {
    fn from(s: Skip) -> Self {
        match s {
            Skip::None => SkipMode::None,
            Skip::Additive => SkipMode::Additive,
            Skip::Dense => SkipMode::Dense,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Prec {
    F32,
    F64,
}

impl From<Prec> for Precision {
    fn from(p: Prec) -> Self {
        match p {
            Prec::F32 => Precision::F32,
            Prec::F64 => Precision::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Rule {
    Forward,
    Verbatim,
}

impl From<Rule> for EffectRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Forward => EffectRule::Forward,
            Rule::Verbatim => EffectRule::Verbatim,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Svg,
    Both,
}

/// Unset options fall back to the defaults for the dataset named in its
/// `meta.txt`.
#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "efignn")]
    pub model: Kind,
    #[arg(long)]
    pub efi_layers: Option<usize>,
    #[arg(long)]
    pub gnn_layers: Option<usize>,
    #[arg(long)]
    pub units: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum)]
    pub batch_norm: Option<Toggle>,
    #[arg(long, value_enum)]
    pub skip: Option<Skip>,
    #[arg(long, value_enum)]
    pub include_block0: Option<Toggle>,
    /// Leaky-ReLU negative slope of the GCN branch.
    #[arg(long)]
    pub slope: Option<f64>,
    /// Where to write the best-validation model of the first seed.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    pub precision: Prec,
    /// Leave wall-clock time out of the summary so reruns compare equal.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub node: usize,
    #[arg(long)]
    pub class: usize,
    #[arg(long, default_value_t = 1)]
    pub order: usize,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, value_enum, default_value = "both")]
    pub format: Format,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "forward")]
    pub rule: Rule,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Corrupt one backward rule (negative control).
    #[arg(long, hide = true)]
    pub inject_fault: Option<String>,
}
