use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod io;

use config::{ToolConfig, UsageError};

#[derive(Debug, Parser)]
#[command(name = "fishpano", version, about = "Overhead fisheye panorama toolkit")]
struct Cli {
    /// JSON file with defaults for any flag; flags given on the command line win
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Panorama geometry shared by several subcommands.
#[derive(Debug, Clone, Args)]
pub struct PanoArgs {
    /// Panorama width in pixels; height is width / 4 [default: 3072]
    #[arg(long)]
    pub width: Option<u32>,
    /// Azimuth of panorama column 0, degrees
    #[arg(long, value_name = "DEG", allow_negative_numbers = true)]
    pub azimuth_origin: Option<f64>,
    /// Camera calibration JSON {"width","height","circle_radius_px"?,"principal_point"?}
    #[arg(long, value_name = "PATH")]
    pub camera: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convert a fisheye image to an equirectangular panorama
    Remap(RemapArgs),
    /// Draw the distortion-aware tiling of a feature map and dump it as JSON
    TileViz(TileVizArgs),
    /// Boost the maximum of every tile of a significance map
    PdatScale(PdatScaleArgs),
    /// Convert annotation boxes between the fisheye and panorama frames
    ProjectBoxes(ProjectArgs),
    /// Per-degree statistics of panorama box sizes
    AnalyzeDist(AnalyzeArgs),
    /// Ground-plane positions of detections
    Localize(LocalizeArgs),
    /// Score detections against ground truth
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct RemapArgs {
    #[command(flatten)]
    pub pano: PanoArgs,
    /// Image circle radius in pixels, overriding the camera file
    #[arg(long, value_name = "PX")]
    pub circle_radius: Option<f64>,
    /// Fisheye image (PNG, PGM or PPM)
    pub input: Option<PathBuf>,
    /// Panorama image; the format follows the extension
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TileVizArgs {
    /// Feature map height
    #[arg(long = "Hf")]
    pub hf: usize,
    /// Feature map width
    #[arg(long = "Wf")]
    pub wf: usize,
    /// Number of regions [default: 5]
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Division factor between neighbouring regions [default: 2]
    #[arg(long = "M")]
    pub m: Option<u32>,
    /// Output pixels per feature cell when no background is given
    #[arg(long, default_value_t = 4)]
    pub scale: u32,
    /// Image to draw the tiling over (stretched to the feature map)
    #[arg(long, value_name = "PATH")]
    pub background: Option<PathBuf>,
    /// Directory receiving tiles.png and tiles.json
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PdatScaleArgs {
    /// Scale factor for each tile maximum [default: 2]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Number of regions [default: 5]
    #[arg(long = "K")]
    pub k: Option<usize>,
    /// Division factor [default: 2]
    #[arg(long = "M")]
    pub m: Option<u32>,
    /// Where to write the boosted coordinates [default: <output>.boosted.json]
    #[arg(long, value_name = "PATH")]
    pub boosted: Option<PathBuf>,
    /// Significance map: CSV grid or single-channel PNG
    pub input: Option<PathBuf>,
    /// Scaled map, same formats as the input
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    ToPano,
    ToFisheye,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long, value_enum)]
    pub direction: Direction,
    #[command(flatten)]
    pub pano: PanoArgs,
    /// Pick the azimuth origin so that no box crosses the panorama seam
    #[arg(long)]
    pub auto_seam: bool,
    /// Annotation JSON
    pub input: Option<PathBuf>,
    /// Converted annotation JSON
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub pano: PanoArgs,
    /// Statistics CSV
    #[arg(long, default_value = "dist_stats.csv")]
    pub output: PathBuf,
    /// Annotation JSON
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LocalizeArgs {
    #[command(flatten)]
    pub pano: PanoArgs,
    /// Camera height in meters for images that do not list one
    #[arg(long, value_name = "M")]
    pub camera_height: Option<f64>,
    /// Positions CSV
    #[arg(long, default_value = "positions.csv")]
    pub output: PathBuf,
    /// Detection JSON
    pub input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth annotation JSON
    #[arg(long)]
    pub gt: PathBuf,
    /// Detection JSON (annotations with "score")
    #[arg(long)]
    pub dets: PathBuf,
    /// Report JSON
    #[arg(long, default_value = "report.json")]
    pub report: PathBuf,
    /// Report CSV [default: report path with .csv extension]
    #[arg(long, value_name = "PATH")]
    pub report_csv: Option<PathBuf>,
    #[command(flatten)]
    pub pano: PanoArgs,
    /// Camera height in meters for images that do not list one; enables distance metrics
    #[arg(long, value_name = "M")]
    pub camera_height: Option<f64>,
    /// Minimum confidence for precision, recall, F1 and position error [default: 0.3]
    #[arg(long)]
    pub confidence_threshold: Option<f64>,
}

fn configure_threads() -> Result<(), UsageError> {
    let Ok(value) = std::env::var("TOOL_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("TOOL_THREADS must be a positive integer, got {value:?}")))?;
    // only fails if a pool already exists, which cannot happen this early
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(path) => ToolConfig::load(path)?,
        None => ToolConfig::default(),
    };
    match cli.command {
        Command::Remap(a) => commands::remap(&a, &cfg),
        Command::TileViz(a) => commands::tile_viz(&a, &cfg),
        Command::PdatScale(a) => commands::pdat_scale(&a, &cfg),
        Command::ProjectBoxes(a) => commands::project_boxes(&a, &cfg),
        Command::AnalyzeDist(a) => commands::analyze_dist(&a, &cfg),
        Command::Localize(a) => commands::localize(&a, &cfg),
        Command::Eval(a) => commands::eval(&a, &cfg),
    }
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let message = e.kind().as_str().unwrap_or("invalid command line").to_string();
            return report_error("usage", &message, 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let message = format!("{err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                report_error("usage", &message, 2)
            } else if let Some(e) = err.downcast_ref::<fishpano::Error>() {
                report_error(e.kind(), &message, 1)
            } else if err.downcast_ref::<std::io::Error>().is_some() {
                report_error("io", &message, 1)
            } else {
                report_error("failure", &message, 1)
            }
        }
    }
}
