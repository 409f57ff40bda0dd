use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radiofill::experiment::BenchMethod;
use radiofill::Rect;

#[derive(Debug, Parser)]
#[command(name = "radiofill", version, about = "Fill restricted regions of gridded radio maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reconstruct the masked cells of a map.
    Reconstruct(ReconstructArgs),
    /// Score an estimate against the truth and append the result to a CSV.
    Evaluate(EvaluateArgs),
    /// Compare every method over random masks of several sizes.
    Sweep(SweepArgs),
    /// Write a synthetic scene (map, obstacles, manifest).
    Genscene(SceneArgs),
}

/// `top,left,height,width`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectArg(pub Rect);

impl FromStr for RectArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("expected top,left,height,width: {e}"))?;
        match parts[..] {
            [top, left, h, w] => Ok(RectArg(Rect::new(top, left, h, w))),
            _ => Err(format!("expected 4 comma-separated integers, got {}", parts.len())),
        }
    }
}

/// `row,col`, fractional and negative positions allowed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointArg(pub f64, pub f64);

impl FromStr for PointArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| format!("expected row,col: {e}"))?;
        match parts[..] {
            [r, c] if r.is_finite() && c.is_finite() => Ok(PointArg(r, c)),
            _ => Err("expected two finite numbers row,col".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Epc,
    Epd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PriorityArg {
    Full,
    Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Empty,
    VerticalStripes,
    CityBlocks,
}

#[derive(Debug, Clone, Args)]
pub struct EngineArgs {
    #[arg(long, default_value_t = 15)]
    pub patch_size: usize,
    /// Inverse-distance exponent of the propagation term.
    #[arg(long, default_value_t = 2.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.01)]
    pub lambda: f64,
    #[arg(long, default_value_t = 500)]
    pub dict_size: usize,
    #[arg(long, default_value_t = 2000)]
    pub train_patches: usize,
    #[arg(long, default_value_t = 15)]
    pub ksvd_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Clip dictionary estimates to [0, 1].
    #[arg(long)]
    pub clamp: bool,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Power map CSV; normalized to [0, 1] on load.
    #[arg(long)]
    pub map: PathBuf,
    /// 0/1 CSV, 1 = restricted.
    #[arg(long, conflicts_with = "rect", required_unless_present = "rect")]
    pub mask: Option<PathBuf>,
    #[arg(long, value_name = "TOP,LEFT,H,W")]
    pub rect: Option<RectArg>,
    /// Transmitter position; repeat for several transmitters.
    #[arg(long = "tx", value_name = "ROW,COL", required = true, allow_hyphen_values = true)]
    pub tx: Vec<PointArg>,
    /// 0/1 CSV, 1 = building. Defaults to no buildings.
    #[arg(long)]
    pub obstacles: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Epc)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value_t = PriorityArg::Full)]
    pub priority: PriorityArg,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Reconstructed map (normalized values).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub fill_order: Option<PathBuf>,
    /// Write watts instead of normalized values.
    #[arg(long)]
    pub watts: bool,
    /// Directory for PGM heatmaps.
    #[arg(long)]
    pub heatmap_dir: Option<PathBuf>,
    /// Ground-truth map, for the error heatmap and a printed score.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Reuse a trained dictionary instead of training one.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    #[arg(long)]
    pub save_dictionary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long, conflicts_with = "rect", required_unless_present = "rect")]
    pub mask: Option<PathBuf>,
    #[arg(long, value_name = "TOP,LEFT,H,W")]
    pub rect: Option<RectArg>,
    /// Results CSV; created with a header if absent.
    #[arg(long)]
    pub results: Option<PathBuf>,
    #[arg(long, default_value = "unknown")]
    pub method: String,
    #[arg(long, default_value = "custom")]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat both inputs as watts and normalize them by the truth's range.
    #[arg(long)]
    pub watts: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scene: SceneFlags,
    #[arg(long, value_delimiter = ',', default_value = "epc,epd,ebc,rbf,mbi", value_parser = parse_method)]
    pub methods: Vec<BenchMethod>,
    #[arg(long, value_delimiter = ',', default_value = "6,14,20,26,32")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Minimum distance from a mask to the grid edge.
    #[arg(long, default_value_t = 8)]
    pub margin: usize,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Aggregate CSV of mean MSE/NE per method and mask size.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-trial results CSV.
    #[arg(long)]
    pub results: Option<PathBuf>,
}

fn parse_method(s: &str) -> Result<BenchMethod, String> {
    s.parse().map_err(|e: radiofill::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct SceneFlags {
    #[arg(long, default_value_t = 120)]
    pub rows: usize,
    #[arg(long, default_value_t = 160)]
    pub cols: usize,
    #[arg(long = "scene-tx", value_name = "ROW,COL", default_value = "-40,80", allow_hyphen_values = true)]
    pub scene_tx: PointArg,
    #[arg(long, default_value_t = 2.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.3)]
    pub attenuation: f64,
    #[arg(long, value_enum, default_value_t = LayoutArg::VerticalStripes)]
    pub layout: LayoutArg,
    #[arg(long, default_value_t = 0.3)]
    pub shadow: f64,
    #[arg(long, default_value_t = 12.0)]
    pub corr_length: f64,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    #[command(flatten)]
    pub scene: SceneFlags,
    #[arg(long)]
    pub out_dir: PathBuf,
}
