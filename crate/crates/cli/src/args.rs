use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "bmguide", version, about = "Business-model validation engine")]
pub struct Cli {
    /// Write the result here (atomically, with a `.manifest.json` sidecar) instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Log level for stderr: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: String,
    /// Taxonomy TOML; the bundled IoT taxonomy when omitted.
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One-hot encode a venture table.
    Encode(EncodeArgs),
    /// Scan k with k-modes and pick it by silhouette.
    Cluster(ClusterArgs),
    /// Component types, then success archetypes over their memberships.
    Archetypes(ArchetypeArgs),
    /// Fit one model family on labeled ventures and write its document.
    Train(TrainArgs),
    /// Random-forest feature importance.
    Importance(ImportanceArgs),
    /// Cross-validated MCC for every predictor and weighting scheme.
    Evaluate(EvaluateArgs),
    /// Truth table and QCA solutions for a case table.
    Qca(QcaArgs),
    /// Seeded synthetic crowd ratings and their aggregates.
    SimulateCrowd(SimulateCrowdArgs),
    /// Seeded synthetic venture table.
    Synth(SynthArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EncodeArgs {
    /// Venture CSV: `venture_id`, one column per dimension, `series_a`.
    #[arg(long, short)]
    pub input: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricArg {
    Hamming,
    Frequency,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub k_min: usize,
    #[arg(long, default_value_t = 30)]
    pub k_max: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = MetricArg::Hamming)]
    pub metric: MetricArg,
    /// Cluster only this sub-layer's bits (e.g. "Solution").
    #[arg(long)]
    pub component: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ArchetypeArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub component_k_min: usize,
    #[arg(long, default_value_t = 30)]
    pub component_k_max: usize,
    #[arg(long, default_value_t = 2)]
    pub success_k_min: usize,
    #[arg(long, default_value_t = 20)]
    pub success_k_max: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    RandomForest,
    Cart,
    Logistic,
    NaiveBayes,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Family::RandomForest)]
    pub family: Family,
    #[arg(long, default_value_t = 1000)]
    pub n_trees: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    /// Venture CSV to fit a forest on; ignored with `--model`.
    #[arg(long, short, required_unless_present = "model")]
    pub input: Option<PathBuf>,
    /// A random-forest document from `train`.
    #[arg(long, conflicts_with = "input")]
    pub model: Option<PathBuf>,
    #[arg(long, required_unless_present = "model")]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1000)]
    pub n_trees: usize,
    /// Rows to show in text output; 0 shows all.
    #[arg(long, default_value_t = 20)]
    pub top: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 1000)]
    pub n_trees: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Crowd probabilities: CSV with `venture_id` and one column per crowd lane.
    #[arg(long)]
    pub crowd: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationArg {
    Direct,
    Precalibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectArg {
    Present,
    Absent,
    None,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct QcaArgs {
    /// Case CSV: case id, one column per condition, outcome last.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, default_value_t = bmguide_core::qca::DEFAULT_FREQUENCY)]
    pub freq: usize,
    #[arg(long, default_value_t = bmguide_core::qca::DEFAULT_CONSISTENCY)]
    pub consistency: f64,
    #[arg(long, value_enum, default_value_t = CalibrationArg::Direct)]
    pub calibration: CalibrationArg,
    /// Directional expectations, one per condition, comma separated;
    /// a single value applies to every condition.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "present")]
    pub expect: Vec<ExpectArg>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateCrowdArgs {
    #[arg(long)]
    pub seed: u64,
    /// True quality on the schema's scale.
    #[arg(long)]
    pub quality: f64,
    #[arg(long, default_value_t = 20)]
    pub raters: usize,
    #[arg(long, default_value_t = 1.5)]
    pub noise_sd: f64,
    #[arg(long, default_value = bmguide_core::judge::DEFAULT_SCHEMA)]
    pub schema: String,
    #[arg(long, default_value = "sim-venture")]
    pub venture_id: String,
    /// Independent rounds, each with its own derived seed.
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, short, default_value_t = 120)]
    pub n: usize,
    /// Label by a single characteristic instead of the noisy driver rule.
    #[arg(long)]
    pub separable: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ServeArgs {
    /// Service TOML; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub host: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
}
