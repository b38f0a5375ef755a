//! Argument definitions.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "finder",
    about = "Formula-graph self-attention network: training, prediction, edge-attribute export and epsilon-near-zero screening",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Train a model (or run a sample-efficiency sweep) and write the run
    /// artifacts into a run directory.
    Train(TrainArgs),
    /// Predict targets for compositions or structures with a trained model.
    Predict(PredictArgs),
    /// Screen candidate compositions for low-loss epsilon-near-zero
    /// behavior using real/imaginary dielectric spectrum models.
    ScreenEnz(ScreenArgs),
    /// Export the edge attribute matrix of a composition from a trained
    /// formula-domain model.
    ExportEam(EamArgs),
    /// Two-sample t-test between two files of per-run metric values.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct TrainArgs {
    /// Rerun from a fully resolved config file; all other flags are ignored.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// Dataset file (delimited text with header).
    #[arg(long, required_unless_present = "config")]
    pub dataset: Option<PathBuf>,

    /// Representation domain: formula | crystal.
    #[arg(long, default_value = "formula")]
    pub domain: String,

    /// Output directory for config, checkpoint, history and metrics.
    #[arg(long, default_value = "run")]
    pub run_dir: PathBuf,

    /// Element embeddings: "one-hot" or a path to an embedding table file.
    #[arg(long, default_value = "one-hot")]
    pub embedding: String,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value_t = 128)]
    pub batch_size: usize,

    /// Defaults to 500 in the formula domain and 1000 in the crystal domain.
    #[arg(long)]
    pub max_epochs: Option<usize>,

    #[arg(long, default_value_t = 50)]
    pub patience: usize,

    #[arg(long, default_value_t = 3e-4)]
    pub base_lr: f64,

    /// Learning-rate multiplier applied every iteration.
    #[arg(long, default_value_t = 0.999)]
    pub lr_decay: f64,

    /// Global gradient-norm clipping threshold.
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,

    /// Explicit ratios "train,val,test"; overrides --split-preset.
    #[arg(long)]
    pub split: Option<String>,

    /// standard (70/15/15) | matbench-gnn (60/20/20) |
    /// matbench-composition (72/8/20).
    #[arg(long, default_value = "standard")]
    pub split_preset: String,

    /// Comma-separated ablation flags (no_self_attention, soft_attention,
    /// no_residuals, sum_pool, no_post_net).
    #[arg(long)]
    pub ablation: Option<String>,

    /// Number of message-passing layers (1..=3).
    #[arg(long, default_value_t = 2)]
    pub layers: usize,

    #[arg(long, default_value_t = 200)]
    pub state_dim: usize,

    /// Use the small smoke-test architecture instead of the reference one.
    #[arg(long, default_value_t = false)]
    pub compact: bool,

    #[arg(long, default_value_t = 12)]
    pub max_denominator: u64,

    #[arg(long, default_value_t = 64)]
    pub node_cap: usize,

    /// Crystal-domain neighbor cutoff in angstroms.
    #[arg(long, default_value_t = 4.0)]
    pub cutoff: f64,

    /// Comma-separated training-set sizes; runs the sample-efficiency sweep
    /// instead of a single training run.
    #[arg(long)]
    pub train_sizes: Option<String>,

    /// Metrics report format: csv | json.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// Input file with a composition column (plus structure_file in the
    /// crystal domain).
    #[arg(long)]
    pub input: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Also write the pooled material embeddings.
    #[arg(long)]
    pub embeddings_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ScreenArgs {
    /// Spectrum model for the real permittivity.
    #[arg(long, required_unless_present = "use_provided_spectra")]
    pub re_checkpoint: Option<PathBuf>,

    /// Spectrum model for the imaginary permittivity.
    #[arg(long, required_unless_present = "use_provided_spectra")]
    pub im_checkpoint: Option<PathBuf>,

    /// Candidate file: composition, optional e_hull_meV (and eps_re_file /
    /// eps_im_file with --use-provided-spectra).
    #[arg(long)]
    pub candidates: PathBuf,

    #[arg(long)]
    pub out: PathBuf,

    /// Element-pair co-occurrence edge list output.
    #[arg(long)]
    pub cooccurrence_out: Option<PathBuf>,

    /// Keep element pairs present in at least this many candidates.
    #[arg(long, default_value_t = 5)]
    pub min_pair_count: usize,

    /// Take spectra from per-candidate raw point files instead of models.
    #[arg(long, default_value_t = false)]
    pub use_provided_spectra: bool,

    /// Report format: csv | json.
    #[arg(long, default_value = "csv")]
    pub format: String,
}

#[derive(Args)]
pub struct EamArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long)]
    pub composition: String,

    #[arg(long)]
    pub out: PathBuf,

    /// Message-passing layer to probe; defaults to the final layer.
    #[arg(long)]
    pub layer: Option<usize>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// File with one metric value per line (one run each).
    #[arg(long)]
    pub runs_a: PathBuf,

    #[arg(long)]
    pub runs_b: PathBuf,

    /// Output format: csv | json (printed to stdout).
    #[arg(long, default_value = "csv")]
    pub format: String,
}
