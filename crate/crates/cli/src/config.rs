use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spectracube::phantom::SceneScript;

use crate::error::{CliError, CliResult};

/// End-to-end run description. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid: String,
    #[serde(default)]
    pub extinction: Option<PathBuf>,
    #[serde(default)]
    pub sensitivity: Option<PathBuf>,
    pub input: Input,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub regression: RegressionConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub nn: NnConfig,
    /// Write false-color PNGs next to every map container
    #[serde(default)]
    pub maps_png: bool,
    #[serde(default = "default_colormap")]
    pub colormap: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Input {
    Phantom(PhantomInput),
    Captured(CapturedInput),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptSource {
    Path(PathBuf),
    Inline(Box<SceneScript>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomInput {
    pub script: ScriptSource,
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub bits: Option<u8>,
    #[serde(default)]
    pub line_col: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapturedInput {
    pub image: PathBuf,
    pub lines: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingConfig {
    pub tau_qq: f64,
    pub tau_rc: f64,
    pub levels: usize,
    /// Stop the run when the sampled line fails the check
    pub strict: bool,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            tau_qq: spectracube::sampling::DEFAULT_TAU_QQ,
            tau_rc: spectracube::sampling::DEFAULT_TAU_RC,
            levels: 99,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegressionConfig {
    pub bias: bool,
    pub ridge: Option<String>,
    pub train_frac: f64,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        Self {
            bias: false,
            ridge: None,
            train_frac: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub window: String,
    pub lipid: bool,
    pub decimate: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            window: "450:650".into(),
            lipid: false,
            decimate: 1,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnConfig {
    pub epochs: Option<usize>,
    /// Skip MLP training and inference
    pub skip: bool,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("run")
}

fn default_grid() -> String {
    "380:720:1".into()
}

fn default_colormap() -> String {
    "viridis".into()
}

impl PipelineConfig {
    /// Parses the file, resolves relative paths and checks that every referenced file exists.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.check_files()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        self.extinction.iter_mut().for_each(fix);
        self.sensitivity.iter_mut().for_each(fix);
        match &mut self.input {
            Input::Phantom(p) => {
                if let ScriptSource::Path(s) = &mut p.script {
                    fix(s);
                }
            }
            Input::Captured(c) => {
                fix(&mut c.image);
                c.lines.iter_mut().for_each(fix);
            }
        }
    }

    pub fn referenced_files(&self) -> Vec<&Path> {
        let mut files: Vec<&Path> = Vec::new();
        files.extend(self.extinction.as_deref());
        files.extend(self.sensitivity.as_deref());
        match &self.input {
            Input::Phantom(p) => {
                if let ScriptSource::Path(s) = &p.script {
                    files.push(s);
                }
            }
            Input::Captured(c) => {
                files.push(&c.image);
                files.extend(c.lines.iter().map(PathBuf::as_path));
            }
        }
        files
    }

    fn check_files(&self) -> CliResult<()> {
        let missing: Vec<String> = self
            .referenced_files()
            .into_iter()
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!("missing input files: {}", missing.join(", "))));
        }
        if let Input::Captured(c) = &self.input {
            if c.lines.is_empty() {
                return Err(CliError::Config("captured input needs at least one line file".into()));
            }
        }
        Ok(())
    }
}
