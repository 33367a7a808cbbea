use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cdrs", version, about = "Refine dynamic-score maps of multi-view image sets")]
pub struct Cli {
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic moving-square scene with ground truth.
    Synth(SynthArgs),
    /// Compute initial score maps from epipolar consistency.
    Geoscore(GeoscoreArgs),
    /// Refine score maps with the appearance-mixed MRF.
    Refine(RefineArgs),
    /// Jaccard evaluation against ground-truth masks.
    Eval(EvalArgs),
    /// Refine and evaluate once per value of one parameter.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Receives the manifest, images, features, scores, masks and matches.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Omit the moving square.
    #[arg(long = "static")]
    pub static_scene: bool,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = 5)]
    pub images: usize,
    #[arg(long, default_value_t = 10)]
    pub square: usize,
    /// Probability of a pixel of the initial maps being set to 1.
    #[arg(long, default_value_t = 0.2)]
    pub salt: f64,
    #[arg(long, default_value_t = 80)]
    pub matches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CombineArg {
    Mean,
    Min,
    Median,
}

#[derive(Debug, Clone, Args)]
pub struct GeoscoreArgs {
    /// Scene manifest (JSON).
    pub manifest: PathBuf,
    /// Receives `score_NNN.fmap` per image and a derived manifest.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// RANSAC iterations.
    #[arg(long, default_value_t = 1000)]
    pub iterations: usize,
    /// Sampson inlier threshold in pixels.
    #[arg(long, default_value_t = 1.0)]
    pub inlier_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Half-width of the search strip around each epipolar line.
    #[arg(long, default_value_t = 1)]
    pub band: usize,
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Feature distance at which a pixel scores 1.
    #[arg(long, default_value_t = 0.5)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = CombineArg::Mean)]
    pub combine: CombineArg,
    /// Also write each map as an 8-bit PGM.
    #[arg(long)]
    pub dump_png8: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    /// Cluster each image on its own (CDRSs).
    Single,
    /// Cluster all images together (CDRSm).
    Multi,
}

/// Refinement parameters. Unset flags fall back to the manifest, then to
/// the built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamFlags {
    /// Weight of the geometric distribution in the mixture.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Smoothness weight.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Number of appearance clusters.
    #[arg(long)]
    pub k: Option<usize>,
    /// Sharpness of the distance weighting inside a cluster.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of score labels.
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_enum)]
    pub scope: Option<ScopeArg>,
    /// Per-pixel argmax instead of the MRF (the lambda = 0 variant).
    #[arg(long)]
    pub ml: bool,
    /// Seed of the k-means initialization.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probability floor inside the log of the unary term.
    #[arg(long)]
    pub eps_log: Option<f64>,
    /// Gradient floor of the pairwise weights.
    #[arg(long)]
    pub eps_grad: Option<f64>,
    /// Multiplier applied to gray levels before the gradient.
    #[arg(long)]
    pub intensity_scale: Option<f64>,
    /// Fit k-means on every n-th pixel.
    #[arg(long)]
    pub sample_stride: Option<usize>,
    #[arg(long)]
    pub max_sweeps: Option<usize>,
    /// Window of the built-in features used when a record names none.
    #[arg(long)]
    pub feature_window: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct RefineArgs {
    /// Scene manifest (JSON).
    pub manifest: PathBuf,
    /// Receives `map_NNN.fmap` per image.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub params: ParamFlags,
    /// Also write binary masks of the refined maps at this threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub dump_png8: bool,
    /// Write the per-pixel distributions and ML labeling of every image.
    #[arg(long)]
    pub dump_stages: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    /// Scene manifest (JSON) naming the ground-truth masks.
    pub manifest: PathBuf,
    /// Directory of `map_NNN.fmap` files; the manifest's score maps when omitted.
    #[arg(long)]
    pub maps: Option<PathBuf>,
    /// Number of evenly spaced thresholds in [0, 1].
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Write the report as JSON here as well.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Alpha,
    Lambda,
    K,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Scene manifest (JSON) with score maps and masks.
    pub manifest: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub params: ParamFlags,
    #[arg(long)]
    pub grid_size: Option<usize>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
