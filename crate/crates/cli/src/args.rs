use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "spectracube",
    version,
    about = "Recover hyperspectral cubes from RGB images and extract hemodynamic maps"
)]
pub struct Cli {
    /// Worker threads for parallel stages
    #[arg(long, global = true, env = "SPECTRACUBE_THREADS")]
    pub threads: Option<usize>,

    /// Suppress progress messages
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert raw intensities to reflectance with white and black references
    Normalize(NormalizeArgs),
    /// Fit a 3x3 color-correction matrix between two cameras
    Colorfit(ColorfitArgs),
    /// Check that a sampled line represents the whole image
    ValidateSampling(ValidateArgs),
    /// Train the RGB-to-spectrum regression on sampled lines
    TrainRegression(TrainRegressionArgs),
    /// Recover a hypercube from an RGB image
    Recover(RecoverArgs),
    /// Fit the tissue reflectance model to every pixel of a cube
    FitHemo(FitHemoArgs),
    /// Train the informed MLP on sampled lines
    TrainNn(TrainNnArgs),
    /// Infer hemodynamic maps from an RGB image with a trained MLP
    InferNn(InferNnArgs),
    /// Validation metrics
    #[command(subcommand)]
    Metrics(MetricsCommand),
    /// Hemodynamic time series and phase analysis over a frame sequence
    Video(VideoArgs),
    /// Render a synthetic phantom scene
    Synth(SynthArgs),
    /// Run the configured end-to-end pipeline
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct NormalizeArgs {
    /// White reference (same format and size as the input)
    #[arg(long)]
    pub white: PathBuf,
    /// Black (dark) reference
    #[arg(long)]
    pub black: PathBuf,
    /// Raw image (.png/.ppm) or cube (.hsc)
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Upper clamp for cube reflectance
    #[arg(long, default_value_t = spectracube::preprocess::CLAMP_MAX)]
    pub clamp_max: f64,
    /// Average each reference to one value per channel (flat field)
    #[arg(long)]
    pub per_channel: bool,
    /// Bit depth for integer image output
    #[arg(long)]
    pub bits: Option<u8>,
}

#[derive(Debug, Args)]
pub struct ColorfitArgs {
    /// CSV with columns r,g,b from the source camera
    #[arg(long)]
    pub src: PathBuf,
    /// CSV with columns r,g,b from the reference camera, same patches
    #[arg(long)]
    pub dst: PathBuf,
    /// Output JSON with the matrix
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Sampled line CSV files
    #[arg(long, required = true, num_args = 1..)]
    pub line: Vec<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
    /// Exit with status 4 when the check fails
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = spectracube::sampling::DEFAULT_TAU_QQ)]
    pub tau_qq: f64,
    #[arg(long, default_value_t = spectracube::sampling::DEFAULT_TAU_RC)]
    pub tau_rc: f64,
    /// Number of quantile levels
    #[arg(long, default_value_t = 99)]
    pub levels: usize,
}

#[derive(Debug, Args)]
pub struct TrainRegressionArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub line: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Train/test split seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Prepend a constant feature
    #[arg(long)]
    pub bias: bool,
    /// Ridge penalty: a number or "auto"
    #[arg(long)]
    pub ridge: Option<String>,
    #[arg(long, default_value_t = 0.8)]
    pub train_frac: f64,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON summary with the out-of-range pixel count
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitHemoArgs {
    #[arg(long)]
    pub cube: PathBuf,
    /// Extinction CSV; the bundled table when omitted
    #[arg(long)]
    pub ext: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also fit lipid absorption
    #[arg(long)]
    pub lipid: bool,
    /// Fit window "lo:hi" in nm, or "full"
    #[arg(long, default_value = "450:650")]
    pub window: String,
    /// Fit every n-th row and column only
    #[arg(long, default_value_t = 1)]
    pub decimate: usize,
    /// Directory for false-color PNGs of the maps
    #[arg(long)]
    pub png_dir: Option<PathBuf>,
    #[arg(long, default_value = "viridis")]
    pub colormap: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LabelSource {
    /// Labels supplied in a CSV (columns hbo2,hb)
    ModelFree,
    /// Labels from tissue-model fits of the line spectra
    Fit,
}

#[derive(Debug, Args)]
pub struct TrainNnArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub line: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelSource::Fit)]
    pub labels_from: LabelSource,
    /// Label CSV for --labels-from model-free
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub ext: Option<PathBuf>,
    #[arg(long, default_value = "450:650")]
    pub window: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Per-epoch loss history as JSON
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InferNnArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub png_dir: Option<PathBuf>,
    #[arg(long, default_value = "viridis")]
    pub colormap: String,
}

#[derive(Debug, Subcommand)]
pub enum MetricsCommand {
    /// Spectral angle between two cubes
    Sam(SamArgs),
    /// Global SSIM between two planes
    Ssim(SsimArgs),
    /// Per-wavelength residuals of a regression model on its test split
    Residuals(ResidualArgs),
}

#[derive(Debug, Args)]
pub struct SamArgs {
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// Restrict to "lo:hi" nm
    #[arg(long)]
    pub window: Option<String>,
    /// Write the per-pixel angles (planes sam, sam_deg) as a container
    #[arg(long)]
    pub map_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SsimArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    /// Plane name, used when a container has several planes
    #[arg(long, default_value = "spo2")]
    pub plane: String,
    #[arg(long)]
    pub report: PathBuf,
    /// Dynamic range H; the data range of the pair when omitted
    #[arg(long)]
    pub range: Option<f64>,
    #[arg(long, default_value_t = spectracube::analytics::SSIM_O1)]
    pub o1: f64,
    #[arg(long, default_value_t = spectracube::analytics::SSIM_O2)]
    pub o2: f64,
}

#[derive(Debug, Args)]
pub struct ResidualArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub line: Vec<PathBuf>,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
    /// CSV with wavelength, mean and interval bounds
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Roi {
    Vessel,
    Avascular,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Hilbert,
    Xspec,
}

#[derive(Debug, Args)]
pub struct VideoArgs {
    /// Directory of frame images, processed in file-name order
    #[arg(long)]
    pub frames: PathBuf,
    /// Trained MLP (.mdl) or regression model (.hsl)
    #[arg(long)]
    pub model: PathBuf,
    /// Segmentation thresholds JSON; the published table when omitted
    #[arg(long)]
    pub mask_thresholds: Option<PathBuf>,
    #[arg(long)]
    pub report: PathBuf,
    /// Directory for per-frame map containers
    #[arg(long)]
    pub maps_out: Option<PathBuf>,
    /// Frame rate; read from the frame directory's meta.json when omitted
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long, value_enum, default_value_t = Roi::Vessel)]
    pub roi: Roi,
    #[arg(long = "phase-method", alias = "method", value_enum, default_value_t = Method::Hilbert)]
    pub method: Method,
    #[arg(long, default_value_t = spectracube::analytics::DEFAULT_F_LO)]
    pub f_lo: f64,
    #[arg(long, default_value_t = spectracube::analytics::DEFAULT_F_HI)]
    pub f_hi: f64,
    /// Extinction table for regression models
    #[arg(long)]
    pub ext: Option<PathBuf>,
    #[arg(long, default_value = "450:650")]
    pub window: String,
    #[arg(long, default_value_t = 1)]
    pub decimate: usize,
    /// CSV export of the region time series
    #[arg(long)]
    pub series_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene script JSON
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long)]
    pub ext: Option<PathBuf>,
    /// Sensitivity CSV (wavelength_nm,r,g,b); Gaussian bands when omitted
    #[arg(long)]
    pub sens: Option<PathBuf>,
    /// Output directory for RGB frames
    #[arg(long)]
    pub frames: PathBuf,
    /// Output directory for ground truth
    #[arg(long)]
    pub truth: PathBuf,
    /// Gaussian RGB noise standard deviation
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Quantize frames to this bit depth (PNG for 8/16, PPM otherwise)
    #[arg(long)]
    pub bits: Option<u8>,
    /// Wavelength grid "start:end:step" in nm
    #[arg(long, default_value = "380:720:1")]
    pub grid: String,
    /// Column of the sampled line written with the truth (center by default)
    #[arg(long)]
    pub line_col: Option<usize>,
    /// Skip the truth cubes, keeping maps and lines
    #[arg(long)]
    pub no_cubes: bool,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides out_dir from the config
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides seed from the config
    #[arg(long)]
    pub seed: Option<u64>,
}
