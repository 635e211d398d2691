use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::input::DeltaSpec;

#[derive(Debug, Parser)]
#[command(name = "suffcheck", version, about = "Exact comparisons of multi-period experiments")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads for the data-parallel engines (1 runs sequentially).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare two uncontrolled experiments.
    Compare(CompareArgs),
    /// Per-history comparison of two experiments linked by a coupling.
    CompareSeq(SeqArgs),
    /// Compare controlled experiments over a family of test kernels.
    CompareControlled(ControlledArgs),
    /// Two-period Bernoulli pair: closed form with cross-checks.
    Bernoulli(BernoulliArgs),
    /// Compare optimal values on random decision problems.
    Audit(AuditArgs),
    /// Check an input file and list every problem found.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// One discount factor, through the discounted mixtures.
    Delta,
    /// Every discount factor: period-by-period comparison.
    BigDelta,
    /// Garblings that may only use the past.
    Adapted,
    /// State redrawn along a path; see `--state-law`.
    Evolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StateLaw {
    /// The state is drawn once from the prior and never moves.
    Persistent,
    /// The state is redrawn from the prior every period.
    Iid,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Source experiment file.
    pub f: PathBuf,
    /// Target experiment file.
    pub g: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Delta)]
    pub mode: Mode,
    /// Discount factor: "1/2,1/2", "geometric r T", "uniform T" or "degenerate t".
    #[arg(long)]
    pub delta: Option<DeltaSpec>,
    /// Prior over states, comma-separated. Defaults to uniform.
    #[arg(long)]
    pub prior: Option<String>,
    /// State dynamics for `--mode evolving`.
    #[arg(long, value_enum, default_value_t = StateLaw::Persistent)]
    pub state_law: StateLaw,
}

#[derive(Debug, Args)]
pub struct SeqArgs {
    /// Coupling file holding both experiments.
    pub coupling: PathBuf,
    #[arg(long)]
    pub delta: DeltaSpec,
}

#[derive(Debug, Args)]
pub struct ControlledArgs {
    /// Source experiment file.
    #[arg(required_unless_present = "arrival", requires = "g")]
    pub f: Option<PathBuf>,
    /// Target experiment file.
    pub g: Option<PathBuf>,
    /// Arrival instance file, instead of two experiment files.
    #[arg(long, conflicts_with_all = ["f", "g", "kernels"])]
    pub arrival: Option<PathBuf>,
    /// Extra test kernels, written over the target's alphabets.
    #[arg(long)]
    pub kernels: Option<PathBuf>,
    /// Skip the deterministic kernel family and use only `--kernels`.
    #[arg(long, requires = "kernels")]
    pub user_only: bool,
    #[arg(long)]
    pub delta: DeltaSpec,
    /// Largest deterministic kernel family to enumerate.
    #[arg(long, default_value_t = 4096)]
    pub cap: usize,
}

#[derive(Debug, Args)]
pub struct BernoulliArgs {
    /// Parameters as key=value: p, q, p', q' (or p2, q2) and d2.
    #[arg(required = true, num_args = 5)]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    /// Source experiment file.
    pub f: PathBuf,
    /// Target experiment file.
    pub g: PathBuf,
    #[arg(long)]
    pub delta: DeltaSpec,
    /// Prior over states, comma-separated. Defaults to uniform.
    #[arg(long)]
    pub prior: Option<String>,
    /// Number of random decision problems.
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Actions per random problem.
    #[arg(long, default_value_t = 3)]
    pub actions: usize,
    /// Add the separating problem of a negative verdict to the suite.
    #[arg(long)]
    pub inject_certificate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FileKind {
    Experiment,
    Coupling,
    Kernels,
    Arrival,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub file: PathBuf,
    /// File kind; guessed from the top-level fields when omitted.
    #[arg(long, value_enum)]
    pub kind: Option<FileKind>,
    /// Target experiment a kernel-family file is written against.
    #[arg(long)]
    pub against: Option<PathBuf>,
}
