//! Command-line surface: `normalize`, `detect`, `expand`, `cyto`,
//! `features`, `eval`, `sweep` and `report`.
//!
//! Every command writes `manifest.json` into its output directory with the
//! resolved settings and SHA-256 digests of all inputs and outputs. Work is
//! spread over `--jobs` threads; results are merged in patch order, so
//! outputs do not depend on the thread count.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 data error.

mod commands;
mod manifest;
mod settings;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;

pub use commands::{parse_radii, PREDICTIONS_FILE};
pub use manifest::{sha256_hex, Manifest, MANIFEST_FILE};
pub use settings::{Overrides, RunConfig, RUN_KEYS};

#[derive(Debug, Parser)]
#[command(name = "cytobench", version, about = "Whole-cell segmentation benchmark for H&E patches")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// key = value run configuration; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (0: one per core).
    #[arg(long, global = true, env = "CYTOBENCH_JOBS", default_value_t = 0)]
    pub jobs: usize,
    /// Patient split to process: train, validation, test or all.
    #[arg(long, global = true)]
    pub split: Option<String>,
    /// Seed of the patient split.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Micrometres per pixel of the input images.
    #[arg(long = "um-per-px", global = true)]
    pub scale: Option<f64>,
    /// Detection parameters: default, finetuned or file:<path>.
    #[arg(long, global = true)]
    pub params: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Macenko-normalize every patch to the reference stain profile.
    Normalize {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Watershed nucleus detection.
    Detect {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grow detected nuclei into cells by a fixed radius.
    Expand {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        /// Expansion radius in µm.
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Scale nucleus ROIs, refine cytoplasm, pair and suppress.
    Cyto {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        scale_factor: Option<f64>,
        /// Mask IoU threshold of the non-maximum suppression.
        #[arg(long)]
        nms: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// The 17 per-cell features as CSV.
    Features {
        #[arg(long)]
        images: PathBuf,
        /// COCO file, or a prediction directory.
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// AP and feature agreement of predictions against gold annotations.
    Eval {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Defaults to annotations.json inside the image directory.
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        model: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cell AP50 over a grid of expansion radii.
    Sweep {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        gold: Option<PathBuf>,
        /// start:stop:step or a comma-separated list, µm.
        #[arg(long, default_value = "0.5:10:0.5")]
        radii: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Side-by-side tables of several evaluation reports.
    Report {
        /// report.json files or eval output directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Run(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(Error::Io(e))
    }
}

impl From<rayon::ThreadPoolBuildError> for CliError {
    fn from(e: rayon::ThreadPoolBuildError) -> Self {
        CliError::Usage(format!("cannot start worker pool: {e}"))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Run(Error::Config { .. } | Error::InvalidParam(_)) => 2,
            CliError::Run(_) => 3,
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let mut flags = Overrides {
        params: g.params.clone(),
        split: g.split.clone(),
        seed: g.seed,
        scale: g.scale,
        ..Overrides::default()
    };
    match &cli.command {
        Command::Expand { radius, .. } => flags.radius = *radius,
        Command::Cyto { scale_factor, nms, .. } => {
            flags.scale_factor = *scale_factor;
            flags.nms = *nms;
        }
        _ => {}
    }
    let cfg = RunConfig::resolve(g.config.as_deref(), &flags)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(g.jobs).build()?;
    let ctx = commands::Context { cfg, pool };

    match &cli.command {
        Command::Normalize { dataset, out } => commands::normalize(&ctx, dataset, out),
        Command::Detect { images, out } => commands::detect(&ctx, images, out),
        Command::Expand { images, detections, out, .. } => {
            commands::expand_cells(&ctx, images, detections, out)
        }
        Command::Cyto { images, detections, out, .. } => commands::cyto(&ctx, images, detections, out),
        Command::Features { images, annotations, out } => {
            commands::features(&ctx, images, annotations, out)
        }
        Command::Eval { images, predictions, gold, model, out } => {
            commands::eval(&ctx, images, predictions, gold.as_deref(), model, out)
        }
        Command::Sweep { images, detections, gold, radii, out } => {
            let radii = parse_radii(radii)?;
            commands::sweep(&ctx, images, detections, gold.as_deref(), &radii, out)
        }
        Command::Report { inputs, out } => commands::report(&ctx, inputs, out),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
