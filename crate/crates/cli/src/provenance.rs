//! Artifact bookkeeping: provenance sidecars and `.partial` renaming.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputRef {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    tool: &'static str,
    version: &'static str,
    stage: &'a str,
    artifact: String,
    sha256: String,
    inputs: &'a [InputRef],
    parameters: &'a serde_json::Value,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut f = fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| CliError::stage(&path.display().to_string(), e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Name and hash of an input file. Only the file name is kept so sidecars do
/// not depend on where a run happens.
pub fn input_ref(path: &Path) -> CliResult<InputRef> {
    Ok(InputRef {
        name: file_name(path),
        sha256: sha256_file(path)?,
    })
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".prov.json");
    PathBuf::from(s)
}

pub fn partial_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".partial");
    PathBuf::from(s)
}

/// Tracks the artifacts of one stage.
#[derive(Debug)]
pub struct Outputs {
    stage: String,
    inputs: Vec<InputRef>,
    parameters: serde_json::Value,
    written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(stage: &str, inputs: &[&Path], parameters: serde_json::Value) -> CliResult<Self> {
        Ok(Self {
            stage: stage.to_string(),
            inputs: inputs.iter().map(|p| input_ref(p)).collect::<CliResult<_>>()?,
            parameters,
            written: Vec::new(),
        })
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(input_ref(path)?);
        Ok(())
    }

    /// Writes one artifact through `f`.
    pub fn write<F>(&mut self, path: &Path, f: F) -> CliResult<()>
    where
        F: FnOnce(&Path) -> spectracube::Result<()>,
    {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::stage(&dir.display().to_string(), e))?;
        }
        // a stale partial from an earlier failed run would be misleading
        let _ = fs::remove_file(partial_path(path));
        self.written.push(path.to_path_buf());
        f(path).map_err(|e| CliError::stage(&format!("writing {}", path.display()), e))
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        self.write(path, |p| {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            fs::write(p, text).map_err(|e| spectracube::Error::Io {
                path: p.to_path_buf(),
                source: e,
            })
        })
    }

    /// Renames everything written so far to `<name>.partial`.
    pub fn fail(self, err: CliError) -> CliError {
        for p in &self.written {
            if p.exists() {
                let _ = fs::rename(p, partial_path(p));
            }
        }
        err
    }

    /// Emits a provenance sidecar next to every artifact.
    pub fn finish(self) -> CliResult<()> {
        for p in &self.written {
            let prov = Provenance {
                tool: "spectracube",
                version: env!("CARGO_PKG_VERSION"),
                stage: &self.stage,
                artifact: file_name(p),
                sha256: sha256_file(p)?,
                inputs: &self.inputs,
                parameters: &self.parameters,
            };
            let mut text = serde_json::to_string_pretty(&prov)
                .map_err(|e| CliError::stage("provenance", e))?;
            text.push('\n');
            let side = sidecar_path(p);
            fs::write(&side, text).map_err(|e| CliError::stage(&side.display().to_string(), e))?;
        }
        Ok(())
    }
}

/// Runs `f`, then writes sidecars on success or marks outputs partial on failure.
pub fn run_stage<F>(mut out: Outputs, f: F) -> CliResult<()>
where
    F: FnOnce(&mut Outputs) -> CliResult<()>,
{
    match f(&mut out) {
        Ok(()) => out.finish(),
        Err(e) => Err(out.fail(e)),
    }
}
