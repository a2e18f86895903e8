use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rdd", version, about = "Road-damage dataset toolkit and scoring harness")]
pub struct Cli {
    /// TOML or JSON file with default values for any flag below.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Class distribution, box histograms, pixel means and anchor hints.
    Stats(StatsArgs),
    /// Country-stratified train/eval split.
    Split(SplitArgs),
    /// Score predictions at one threshold (prints one TSV line).
    Eval(EvalArgs),
    /// Score predictions over a threshold grid.
    Sweep(SweepArgs),
    /// Copy-paste damage augmentation.
    Augment(AugmentArgs),
    /// Write a challenge submission file.
    Submit(SubmitArgs),
    /// Merge confident predictions into the annotations as pseudo-labels.
    MergeLabels(MergeArgs),
    /// Overlays, brightness probes and charts.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LayoutArg {
    Train,
    Test,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AreaScaleArg {
    Area,
    Sqrt,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset root.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "train")]
    pub layout: LayoutArg,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, value_enum, default_value = "area")]
    pub area_scale: AreaScaleArg,
    /// Also compute per-channel pixel means (reads every image).
    #[arg(long)]
    pub pixel_means: bool,
    /// Also suggest anchor sizes and ratios.
    #[arg(long)]
    pub anchors: bool,
    /// Directory for histogram CSV files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub fraction: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// Restrict ground truth to the ids listed in this file (e.g. eval.txt).
    #[arg(long)]
    pub subset: Option<PathBuf>,
    #[arg(long)]
    pub iou: Option<f64>,
    /// Skip class-wise NMS before matching.
    #[arg(long)]
    pub no_nms: bool,
    /// Warn instead of failing on predictions for unknown images.
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Print the full JSON report instead of the TSV line.
    #[arg(long)]
    pub json: bool,
    /// Print the TSV column header first.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Comma-separated thresholds; defaults to 0.01..0.99 in steps of 0.01.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Schedule as JSON or CSV; defaults to the built-in balancing schedule.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
    /// Also apply crop, brightness/contrast and cutout.
    #[arg(long)]
    pub photometric: bool,
}

#[derive(Debug, Args)]
pub struct SubmitArgs {
    #[arg(long)]
    pub preds: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub max_dets: usize,
    /// Directory of test images; every image gets a line even without detections.
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// Directory of unlabeled images to register before merging.
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub lenient: bool,
    /// Directory for the merged XML files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ReportCommand {
    /// Draw ground truth (red) and predictions (blue) on one image.
    Overlay(OverlayArgs),
    /// CSV and SVG charts for a dataset.
    Charts(ChartsArgs),
    /// Crop a box, brighten it and zoom in.
    Probe(ProbeArgs),
}

#[derive(Debug, Args)]
pub struct OverlayArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// VOC annotation for the image.
    #[arg(long)]
    pub xml: Option<PathBuf>,
    #[arg(long)]
    pub preds: Option<PathBuf>,
    /// Hide predictions scoring below this.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub label_gt: bool,
    #[arg(long, default_value_t = 2)]
    pub thickness: u32,
    /// Output PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ChartsArgs {
    #[arg(long)]
    pub gt: Option<PathBuf>,
    /// Directory holding split.json from `rdd split`.
    #[arg(long)]
    pub split_dir: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Region as `xmin,ymin,xmax,ymax`.
    #[arg(long = "box", value_delimiter = ',', required = true)]
    pub bbox: Vec<u32>,
    #[arg(long, default_value_t = 1.5)]
    pub brightness: f64,
    #[arg(long, default_value_t = 2.0)]
    pub zoom: f64,
    /// Output PNG.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
