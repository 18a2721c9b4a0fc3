//! `amco`: run trials, regenerate calibration assets, score images and
//! re-aggregate logs.
//!
//! Exit codes: 0 success, 2 input error, 3 runtime failure.

mod commands;
mod overlay;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amco", version, about = "Adaptive vision/proprioception cost-map coupling for legged navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trials and write logs, a metrics report and trajectory overlays.
    Run(RunArgs),
    /// Re-run the calibration traverses and write the ellipse table and PCA model.
    Calibrate(CalibrateArgs),
    /// Print the reliability components and score of an image.
    ScoreImage(ScoreArgs),
    /// Re-aggregate trial logs written by `run`.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct RunArgs {
    /// Scenario JSON files.
    #[arg(long = "scenario", required = true, num_args = 1..)]
    pub scenarios: Vec<PathBuf>,
    /// Comma-separated policies.
    #[arg(long, value_delimiter = ',', default_value = "amco")]
    pub policies: Vec<String>,
    /// Trials per policy; defaults to the scenario's own count.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed of the first trial; trial i uses seed + i. Defaults to the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short, default_value = "amco-out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, short, default_value_t = 1)]
    pub jobs: usize,
    /// Write the four cost maps of every step as PGM rasters.
    #[arg(long)]
    pub export_maps: bool,
    /// Skip the SVG trajectory overlays.
    #[arg(long)]
    pub no_overlay: bool,
    /// Parameter override such as `fusion.alpha=4.5`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Directory that receives ellipses.json and pca.json.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Samples per (terrain, gait) traverse.
    #[arg(long, default_value_t = amco_core::assets::CALIBRATION_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = amco_core::assets::CALIBRATION_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = amco_core::proprio::DEFAULT_CONFIDENCE)]
    pub confidence: f64,
}

#[derive(Args)]
pub struct ScoreArgs {
    /// PNG, JPEG or PPM image.
    pub image: PathBuf,
    /// Blur oracle: wavelet, or a fixed sharpness percentage.
    #[arg(long, default_value = "wavelet")]
    pub oracle: String,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Log files or directories searched recursively for `*.jsonl`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Also write the report as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

/// Failure classes with stable exit codes.
#[derive(Debug)]
pub enum Failure {
    Input(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::ScoreImage(a) => commands::score_image(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Input(m) => eprintln!("error: {m}"),
                Failure::Runtime(m) => eprintln!("runtime failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
