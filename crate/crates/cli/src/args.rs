use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use subspace_shot_core::{BankFormat, Method, PrototypeStyle, SolverConfig};

#[derive(Debug, Parser)]
#[command(
    name = "subspace-shot",
    version,
    about = "Transductive one-shot evaluation by non-negative subspace decomposition"
)]
pub struct Cli {
    /// Worker threads for episode evaluation (defaults to all cores).
    #[arg(long, global = true, env = "SUBSPACE_SHOT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "args", rename_all = "kebab-case")]
pub enum Command {
    /// Run an episodic benchmark and print the report JSON.
    Evaluate(EvaluateArgs),
    /// Solve a single explicitly selected episode and dump W, Y and the trace.
    Decompose(DecomposeArgs),
    /// Write a synthetic embedding bank.
    GenSynth(GenSynthArgs),
    /// Re-run the command recorded in a manifest (or in a report containing one).
    #[serde(skip)]
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Subspace,
    ProtoEuclid,
    ProtoCosine,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Subspace => Method::Subspace,
            MethodArg::ProtoEuclid => Method::ProtoEuclidean,
            MethodArg::ProtoCosine => Method::ProtoCosine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankFormatArg {
    Binary,
    Csv,
}

impl From<BankFormatArg> for BankFormat {
    fn from(f: BankFormatArg) -> Self {
        match f {
            BankFormatArg::Binary => BankFormat::Binary,
            BankFormatArg::Csv => BankFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BankArgs {
    /// Embedding bank (EMB1 binary, or CSV when the name ends in .csv).
    #[arg(long)]
    pub bank: PathBuf,

    /// Override the format inferred from the file extension.
    #[arg(long, value_enum)]
    pub bank_format: Option<BankFormatArg>,

    /// Clamp negative entries to zero instead of rejecting the bank.
    #[arg(long)]
    pub allow_negative: bool,

    /// Scale every embedding column to unit L2 norm before solving.
    #[arg(long)]
    pub l2_normalize_columns: bool,
}

impl BankArgs {
    pub fn format(&self) -> BankFormat {
        self.bank_format
            .map(Into::into)
            .unwrap_or_else(|| BankFormat::from_path(&self.bank))
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Maximum (W, Y) sweeps; 0 reads labels from the initial prototypes.
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,

    /// Relative objective decrease per sweep below which the solver stops.
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,

    /// Keep support columns of Y fixed at their one-hot labels.
    #[arg(long)]
    pub freeze_support: bool,

    #[arg(long, default_value_t = 1e-6)]
    pub basis_jitter: f64,
}

impl SolverArgs {
    pub fn config(&self, seed: u64) -> SolverConfig {
        SolverConfig {
            max_iters: self.max_iters,
            rel_tol: self.rel_tol,
            freeze_support_columns: self.freeze_support,
            basis_jitter_eps: self.basis_jitter,
            seed,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub bank: BankArgs,

    #[arg(long, value_enum)]
    pub method: MethodArg,

    #[arg(long, default_value_t = 5)]
    pub n_way: usize,

    #[arg(long, default_value_t = 1)]
    pub k_shot: usize,

    /// Query samples per class.
    #[arg(long, default_value_t = 15)]
    pub n_query: usize,

    #[arg(long, default_value_t = 10_000)]
    pub episodes: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Independent runs; run r uses seed + r.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,

    #[command(flatten)]
    pub solver: SolverArgs,

    /// Write the report here instead of stdout.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub bank: BankArgs,

    /// Comma-separated class names or indices; their order fixes the labels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub classes: Vec<String>,

    #[arg(long, default_value_t = 1)]
    pub k_shot: usize,

    /// Query samples per class.
    #[arg(long, default_value_t = 15)]
    pub n_query: usize,

    /// Index of the first vector taken from each class.
    #[arg(long, default_value_t = 0)]
    pub offset: usize,

    #[command(flatten)]
    pub solver: SolverArgs,

    #[arg(long, value_enum, default_value_t = DumpFormat::Json)]
    pub format: DumpFormat,

    /// JSON file (stdout if omitted) or, for csv, an output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleArg {
    OnehotBlocks,
    RandomNonneg,
}

impl From<StyleArg> for PrototypeStyle {
    fn from(s: StyleArg) -> Self {
        match s {
            StyleArg::OnehotBlocks => PrototypeStyle::OnehotBlocks,
            StyleArg::RandomNonneg => PrototypeStyle::RandomNonneg,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct GenSynthArgs {
    #[arg(long, default_value_t = 20)]
    pub classes: usize,

    #[arg(long, default_value_t = 100)]
    pub per_class: usize,

    #[arg(long, default_value_t = 64)]
    pub dim: usize,

    /// Standard deviation of the Gaussian noise added to each coordinate.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,

    #[arg(long, value_enum, default_value_t = StyleArg::OnehotBlocks)]
    pub style: StyleArg,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, value_enum)]
    pub format: Option<BankFormatArg>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ReplayArgs {
    /// Manifest JSON, or any output document with a top-level "manifest".
    #[arg(long)]
    pub manifest: PathBuf,

    /// Override the recorded output path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
