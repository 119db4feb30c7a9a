#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spectracube"));
    c.env_remove("SPECTRACUBE_THREADS");
    c
}

/// Runs the binary in `dir` and returns its output.
pub fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[track_caller]
pub fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert_eq!(
        code(&out),
        0,
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Textured static scene; `oscillate` adds a 0.05 Hz saturation swing over 1 fps frames.
pub fn write_scene(dir: &Path, name: &str, rows: usize, cols: usize, frames: usize, oscillate: bool) -> PathBuf {
    let b5 = if oscillate {
        r#"{"kind": "sum", "terms": [
            {"kind": "texture", "mean": 0.6, "amplitude": 0.2, "scale_px": 20, "seed": 3},
            {"kind": "oscillation", "mean": 0.0, "amplitude": 0.1, "freq_hz": 0.05, "phase_rad": 0.0}]}"#
    } else {
        r#"{"kind": "texture", "mean": 0.6, "amplitude": 0.2, "scale_px": 20, "seed": 3}"#
    };
    let text = format!(
        r#"{{"rows": {rows}, "cols": {cols}, "frames": {frames}, "frame_interval_s": 1.0,
  "b1": {{"kind": "texture", "mean": 0.4, "amplitude": 0.05, "scale_px": 20, "seed": 1}},
  "b2": {{"kind": "constant", "value": -1.2}},
  "b3": {{"kind": "constant", "value": 0.025}},
  "b4": {{"kind": "texture", "mean": 1.2, "amplitude": 0.8, "scale_px": 20, "seed": 2}},
  "b5": {b5}}}"#
    );
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Every regular file under `root`, relative, sorted.
pub fn tree(root: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

#[track_caller]
pub fn assert_same_tree(a: &Path, b: &Path) {
    let (ta, tb) = (tree(a), tree(b));
    assert_eq!(ta, tb);
    for rel in &ta {
        assert!(
            fs::read(a.join(rel)).unwrap() == fs::read(b.join(rel)).unwrap(),
            "{} differs",
            rel.display()
        );
    }
}
