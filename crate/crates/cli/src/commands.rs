use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use spectracube::analytics::{
    phase_difference, residual_band, roi_timeseries, sam_map_bands, segment_vessels, ssim, ssim_auto,
    PhaseMethod, PhaseOptions, SegmentationThresholds,
};
use spectracube::io::{read_cube, read_line, read_rgb, write_cube, write_line, write_rgb};
use spectracube::neural::{infer_maps, train_mlp, MlpModel, TrainConfig};
use spectracube::phantom::{extract_line, render_rgb, RenderOptions, ScaleMode, SceneScript, SensitivityFunction};
use spectracube::preprocess::{fit_color_correction, normalize_reflectance, Reference, ReferencePair};
use spectracube::regression::{train, RegressionModel, Ridge, TrainOptions};
use spectracube::sampling::{qq_compare, SamplingThresholds};
use spectracube::tissue::{fit_cube, fit_spectrum, ExtinctionTable, FitOptions, HemodynamicMaps};
use spectracube::{Hypercube, RgbImage, SampledLine, WavelengthGrid};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::provenance::{run_stage, Outputs};
use crate::render::{render_map_png, Colormap};

pub struct Ctx {
    pub quiet: bool,
}

impl Ctx {
    pub fn note(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

pub fn require(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Config(format!("input file {} does not exist", path.display())))
    }
}

fn require_all(paths: &[PathBuf]) -> CliResult<()> {
    paths.iter().try_for_each(|p| require(p).map(|_| ()))
}

fn config<T>(what: &str, r: spectracube::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Config(format!("{what}: {e}")))
}

/// `start:end:step` in nm.
pub fn parse_grid(s: &str) -> CliResult<WavelengthGrid> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("grid {s:?} must be start:end:step")))?;
    match parts[..] {
        [a, b, step] => config("grid", WavelengthGrid::spanning(a, b, step)),
        _ => Err(CliError::Config(format!("grid {s:?} must be start:end:step"))),
    }
}

/// `lo:hi` in nm, or `full`.
pub fn parse_window(s: &str) -> CliResult<Option<(f64, f64)>> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(None);
    }
    let bad = || CliError::Config(format!("window {s:?} must be lo:hi or full"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok(Some((lo, hi)))
}

fn parse_ridge(s: Option<&str>) -> CliResult<Ridge> {
    match s {
        None => Ok(Ridge::Off),
        Some(v) if v.eq_ignore_ascii_case("auto") => Ok(Ridge::Auto),
        Some(v) => match v.parse::<f64>() {
            Ok(l) if l >= 0.0 => Ok(Ridge::Fixed(l)),
            _ => Err(CliError::Config(format!("ridge {v:?} must be a non-negative number or auto"))),
        },
    }
}

pub fn load_ext(path: Option<&Path>, grid: WavelengthGrid) -> CliResult<ExtinctionTable> {
    match path {
        Some(p) => config("extinction table", ExtinctionTable::load(require(p)?, grid)),
        None => Ok(ExtinctionTable::default_for(grid)?),
    }
}

pub fn load_sensitivity(path: Option<&Path>, grid: WavelengthGrid) -> CliResult<SensitivityFunction> {
    match path {
        Some(p) => config("sensitivity", SensitivityFunction::load(require(p)?, grid)),
        None => Ok(SensitivityFunction::default_for(grid)?),
    }
}

fn read_lines(paths: &[PathBuf]) -> CliResult<SampledLine> {
    let lines = paths
        .iter()
        .map(|p| config(&p.display().to_string(), read_line(require(p)?)))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SampledLine::concat(&lines)?)
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

/// Bit depth used when writing `img` to `path`: none for containers.
fn image_bits(path: &Path, requested: Option<u8>, img: &RgbImage) -> Option<u8> {
    match extension(path).as_str() {
        "hsc" => None,
        "png" => Some(match requested.or(img.bit_depth_origin()) {
            Some(b) if b <= 8 => 8,
            _ => 16,
        }),
        _ => Some(requested.or(img.bit_depth_origin()).unwrap_or(16)),
    }
}

fn write_maps(out: &mut Outputs, path: &Path, maps: &HemodynamicMaps) -> CliResult<()> {
    let cube = maps.to_cube()?;
    out.write(path, |p| write_cube(&cube, p))
}

fn map_pngs(
    out: &mut Outputs,
    dir: &Path,
    prefix: &str,
    maps: &HemodynamicMaps,
    colormap: Colormap,
) -> CliResult<()> {
    let top = maps.hbo2.iter().chain(&maps.hb).copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let top = if top > 0.0 { top } else { 1.0 };
    for (name, plane, range) in [
        ("spo2", &maps.spo2, (0.0, 1.0)),
        ("hbo2", &maps.hbo2, (0.0, top)),
        ("hb", &maps.hb, (0.0, top)),
    ] {
        let path = dir.join(format!("{prefix}{name}.png"));
        out.write(&path, |p| render_map_png(plane, maps.rows, maps.cols, colormap, range, p).map(|_| ()))?;
    }
    Ok(())
}

fn parse_colormap(s: &str) -> CliResult<Colormap> {
    s.parse().map_err(CliError::Config)
}

pub fn normalize(ctx: &Ctx, a: &NormalizeArgs) -> CliResult<()> {
    for p in [&a.white, &a.black, &a.input] {
        require(p)?;
    }
    let out = Outputs::new(
        "normalize",
        &[&a.input, &a.white, &a.black],
        json!({"clamp_max": a.clamp_max, "per_channel": a.per_channel}),
    )?;
    let refs = |w: &[f64], b: &[f64], ch: usize| {
        if a.per_channel {
            let mean = |v: &[f64]| {
                (0..ch)
                    .map(|c| v.iter().skip(c).step_by(ch).sum::<f64>() / (v.len() / ch) as f64)
                    .collect::<Vec<_>>()
            };
            ReferencePair {
                white: Reference::PerChannel(mean(w)),
                black: Reference::PerChannel(mean(b)),
            }
        } else {
            ReferencePair::full(w.to_vec(), b.to_vec())
        }
    };
    run_stage(out, |out| {
        if extension(&a.input) == "hsc" {
            let raw = read_cube(&a.input)?;
            let (w, b) = (read_cube(&a.white)?, read_cube(&a.black)?);
            let cube = normalize_reflectance(&raw, &refs(w.data(), b.data(), raw.bands()), a.clamp_max)?;
            out.write(&a.out, |p| write_cube(&cube, p))?;
        } else {
            let raw = read_rgb(&a.input)?;
            let (w, b) = (read_rgb(&a.white)?, read_rgb(&a.black)?);
            let img = normalize_reflectance(&raw, &refs(w.data(), b.data(), 3), a.clamp_max)?;
            let bits = image_bits(&a.out, a.bits, &img);
            out.write(&a.out, |p| write_rgb(&img, p, bits))?;
        }
        ctx.note(format!("wrote {}", a.out.display()));
        Ok(())
    })
}

fn read_rgb_csv(path: &Path) -> CliResult<Vec<[f64; 3]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(require(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let idx = |n: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(n))
            .ok_or_else(|| CliError::Config(format!("{} lacks column {n}", path.display())))
    };
    let cols = [idx("r")?, idx("g")?, idx("b")?];
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
            let mut px = [0.0; 3];
            for (v, &c) in px.iter_mut().zip(&cols) {
                *v = rec
                    .get(c)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| CliError::Config(format!("{}: bad number in {rec:?}", path.display())))?;
            }
            Ok(px)
        })
        .collect()
}

pub fn colorfit(ctx: &Ctx, a: &ColorfitArgs) -> CliResult<()> {
    let src = read_rgb_csv(&a.src)?;
    let dst = read_rgb_csv(&a.dst)?;
    let out = Outputs::new("colorfit", &[&a.src, &a.dst], json!({}))?;
    run_stage(out, |out| {
        let cc = fit_color_correction(&src, &dst)?;
        out.write_json(&a.out, &cc)?;
        ctx.note(format!("condition number {:.3e}", cc.condition_number));
        Ok(())
    })
}

pub fn validate_sampling(ctx: &Ctx, a: &ValidateArgs) -> CliResult<()> {
    require(&a.image)?;
    require_all(&a.line)?;
    let thresholds = SamplingThresholds {
        tau_qq: a.tau_qq,
        tau_rc: a.tau_rc,
    };
    let mut inputs: Vec<&Path> = vec![&a.image];
    inputs.extend(a.line.iter().map(PathBuf::as_path));
    let out = Outputs::new(
        "validate-sampling",
        &inputs,
        json!({"tau_qq": a.tau_qq, "tau_rc": a.tau_rc, "levels": a.levels}),
    )?;
    let mut pass = true;
    run_stage(out, |out| {
        let img = read_rgb(&a.image)?;
        let line = read_lines(&a.line)?;
        let parent: Vec<[f64; 3]> = img.pixels().collect();
        let report = qq_compare(line.rgb(), &parent, a.levels, thresholds)?;
        pass = report.pass;
        out.write_json(&a.report, &report)?;
        ctx.note(format!(
            "sampling {}: max Q-Q deviation {:.4}, coverage {:.4}",
            if report.pass { "passed" } else { "failed" },
            report.max_qq_deviation,
            report.range_coverage
        ));
        Ok(())
    })?;
    if a.strict && !pass {
        return Err(CliError::Sampling(format!("see {}", a.report.display())));
    }
    Ok(())
}

pub fn train_regression(ctx: &Ctx, a: &TrainRegressionArgs) -> CliResult<()> {
    require_all(&a.line)?;
    let opts = TrainOptions {
        split_seed: a.seed,
        train_frac: a.train_frac,
        bias: a.bias,
        ridge: parse_ridge(a.ridge.as_deref())?,
    };
    let inputs: Vec<&Path> = a.line.iter().map(PathBuf::as_path).collect();
    let out = Outputs::new("train-regression", &inputs, serde_json::to_value(opts).unwrap_or_default())?;
    run_stage(out, |out| {
        let line = read_lines(&a.line)?;
        let model = train(&line, &opts)?;
        out.write(&a.out, |p| model.save(p))?;
        let s = model.stats();
        ctx.note(format!(
            "m = {}, rmse train {:.3e}, test {:.3e}, condition {:.3e}",
            s.m, s.rmse_train, s.rmse_test, s.condition_number
        ));
        Ok(())
    })
}

pub fn recover(ctx: &Ctx, a: &RecoverArgs) -> CliResult<()> {
    require(&a.model)?;
    require(&a.image)?;
    let out = Outputs::new("recover", &[&a.model, &a.image], json!({}))?;
    run_stage(out, |out| {
        let model = RegressionModel::load(&a.model)?;
        let img = read_rgb(&a.image)?;
        let rec = model.recover_cube(&img)?;
        out.write(&a.out, |p| write_cube(&rec.cube, p))?;
        let oor = rec.out_of_range.iter().filter(|&&b| b).count();
        if let Some(r) = &a.report {
            out.write_json(r, &json!({"pixels": rec.out_of_range.len(), "out_of_range": oor}))?;
        }
        ctx.note(format!("{oor} of {} pixels outside the training RGB range", rec.out_of_range.len()));
        Ok(())
    })
}

pub fn fit_hemo(ctx: &Ctx, a: &FitHemoArgs) -> CliResult<()> {
    require(&a.cube)?;
    let window = parse_window(&a.window)?;
    let colormap = parse_colormap(&a.colormap)?;
    if a.decimate == 0 {
        return Err(CliError::Config("decimate must be at least 1".into()));
    }
    let cube = config("cube", read_cube(&a.cube))?;
    let ext = load_ext(a.ext.as_deref(), *cube.grid())?;
    let opts = FitOptions {
        window,
        lipid: a.lipid,
        ..Default::default()
    };
    let mut out = Outputs::new(
        "fit-hemo",
        &[&a.cube],
        json!({"window": window, "lipid": a.lipid, "decimate": a.decimate}),
    )?;
    if let Some(p) = &a.ext {
        out.add_input(p)?;
    }
    run_stage(out, |out| {
        let cube = if a.decimate > 1 { cube.decimate(a.decimate) } else { cube };
        let maps = fit_cube(&cube, &ext, &opts)?;
        write_maps(out, &a.out, &maps)?;
        if let Some(dir) = &a.png_dir {
            map_pngs(out, dir, "", &maps, colormap)?;
        }
        ctx.note(format!(
            "fitted {} pixels, {:.1} % converged",
            maps.rows * maps.cols,
            100.0 * maps.converged_fraction()
        ));
        Ok(())
    })
}

fn read_labels(path: &Path) -> CliResult<Vec<[f64; 2]>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(require(path)?)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    let idx = |n: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(n))
            .ok_or_else(|| CliError::Config(format!("{} lacks column {n}", path.display())))
    };
    let (i, j) = (idx("hbo2")?, idx("hb")?);
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
            let get = |k: usize| {
                rec.get(k)
                    .and_then(|s| s.parse::<f64>().ok())
                    .ok_or_else(|| CliError::Config(format!("{}: bad number in {rec:?}", path.display())))
            };
            Ok([get(i)?, get(j)?])
        })
        .collect()
}

/// `(HbO2, Hb)` from tissue-model fits of every line spectrum.
pub fn fit_labels(line: &SampledLine, ext: &ExtinctionTable, opts: &FitOptions) -> CliResult<Vec<[f64; 2]>> {
    use rayon::prelude::*;
    (0..line.len())
        .into_par_iter()
        .map(|i| {
            let spec = spectracube::Spectrum::new(*line.grid(), line.spectrum_row(i).to_vec())?;
            let fit = fit_spectrum(&spec, ext, &opts.init, opts)?;
            Ok([fit.hbo2, fit.hb])
        })
        .collect::<spectracube::Result<Vec<_>>>()
        .map_err(CliError::from)
}

pub fn train_nn(ctx: &Ctx, a: &TrainNnArgs) -> CliResult<()> {
    require_all(&a.line)?;
    let window = parse_window(&a.window)?;
    if a.labels_from == LabelSource::ModelFree && a.labels.is_none() {
        return Err(CliError::Config("--labels-from model-free needs --labels <csv>".into()));
    }
    let line = read_lines(&a.line)?;
    let labels = match a.labels_from {
        LabelSource::ModelFree => {
            let l = read_labels(a.labels.as_deref().unwrap_or(Path::new("")))?;
            if l.len() != line.len() {
                return Err(CliError::Config(format!(
                    "{} label rows for {} line samples",
                    l.len(),
                    line.len()
                )));
            }
            Some(l)
        }
        LabelSource::Fit => None,
    };
    let ext = match a.labels_from {
        LabelSource::Fit => Some(load_ext(a.ext.as_deref(), *line.grid())?),
        LabelSource::ModelFree => None,
    };
    let mut cfg = TrainConfig {
        seed: a.seed,
        split_seed: a.seed,
        ..Default::default()
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    let mut inputs: Vec<&Path> = a.line.iter().map(PathBuf::as_path).collect();
    if let Some(l) = &a.labels {
        inputs.push(l);
    }
    if let Some(e) = &a.ext {
        inputs.push(e);
    }
    let out = Outputs::new(
        "train-nn",
        &inputs,
        json!({"labels_from": format!("{:?}", a.labels_from), "window": window, "config": cfg}),
    )?;
    run_stage(out, |out| {
        let labels = match (labels, &ext) {
            (Some(l), _) => l,
            (None, Some(ext)) => fit_labels(&line, ext, &FitOptions { window, ..Default::default() })?,
            (None, None) => unreachable!("label source resolved above"),
        };
        let (model, report) = train_mlp(line.rgb(), &labels, &cfg)?;
        out.write(&a.out, |p| model.save(p))?;
        if let Some(h) = &a.history {
            out.write_json(h, &report.history)?;
        }
        if let Some(last) = report.history.last() {
            ctx.note(format!("final train loss {:.4e}, validation {:.4e}", last.train, last.val));
        }
        Ok(())
    })
}

pub fn infer_nn(ctx: &Ctx, a: &InferNnArgs) -> CliResult<()> {
    require(&a.model)?;
    require(&a.image)?;
    let colormap = parse_colormap(&a.colormap)?;
    let out = Outputs::new("infer-nn", &[&a.model, &a.image], json!({}))?;
    run_stage(out, |out| {
        let model = MlpModel::load(&a.model)?;
        let img = read_rgb(&a.image)?;
        let maps = infer_maps(&model, &img);
        write_maps(out, &a.out, &maps)?;
        if let Some(dir) = &a.png_dir {
            map_pngs(out, dir, "", &maps, colormap)?;
        }
        ctx.note(format!("wrote {}", a.out.display()));
        Ok(())
    })
}

pub fn metrics(ctx: &Ctx, cmd: &MetricsCommand) -> CliResult<()> {
    match cmd {
        MetricsCommand::Sam(a) => {
            require(&a.truth)?;
            require(&a.estimate)?;
            let window = a.window.as_deref().map(parse_window).transpose()?.flatten();
            let out = Outputs::new("metrics-sam", &[&a.truth, &a.estimate], json!({"window": window}))?;
            run_stage(out, |out| {
                let t = read_cube(&a.truth)?;
                let e = read_cube(&a.estimate)?;
                let bands = match window {
                    Some((lo, hi)) => t.grid().window_indices(lo, hi)?,
                    None => 0..t.bands(),
                };
                let m = sam_map_bands(&t, &e, bands.clone())?;
                out.write_json(
                    &a.report,
                    &json!({
                        "mean_rad": m.mean,
                        "median_rad": m.median,
                        "rows": m.rows,
                        "cols": m.cols,
                        "bands": [bands.start, bands.end],
                    }),
                )?;
                if let Some(p) = &a.map_out {
                    // containers need two planes, so degrees ride along
                    let data = m.values.iter().flat_map(|&v| [v, v.to_degrees()]).collect();
                    let cube = Hypercube::new(m.rows, m.cols, WavelengthGrid::new(0.0, 1.0, 2)?, data)?
                        .with_plane_names(vec!["sam".into(), "sam_deg".into()])?;
                    out.write(p, |p| write_cube(&cube, p))?;
                }
                ctx.note(format!("mean SAM {:.5} rad, median {:.5} rad", m.mean, m.median));
                Ok(())
            })
        }
        MetricsCommand::Ssim(a) => {
            require(&a.a)?;
            require(&a.b)?;
            let out = Outputs::new(
                "metrics-ssim",
                &[&a.a, &a.b],
                json!({"plane": a.plane, "range": a.range, "o1": a.o1, "o2": a.o2}),
            )?;
            run_stage(out, |out| {
                let pa = select_plane(&read_cube(&a.a)?, &a.plane)?;
                let pb = select_plane(&read_cube(&a.b)?, &a.plane)?;
                let r = match a.range {
                    Some(h) => ssim(&pa, &pb, a.o1, a.o2, h)?,
                    None if a.o1 == spectracube::analytics::SSIM_O1 && a.o2 == spectracube::analytics::SSIM_O2 => {
                        ssim_auto(&pa, &pb)?
                    }
                    None => {
                        let (lo, hi) = pa
                            .iter()
                            .chain(&pb)
                            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
                        ssim(&pa, &pb, a.o1, a.o2, hi - lo)?
                    }
                };
                out.write_json(&a.report, &r)?;
                ctx.note(format!("SSIM {:.6}", r.value));
                Ok(())
            })
        }
        MetricsCommand::Residuals(a) => {
            require_all(&a.line)?;
            require(&a.model)?;
            let mut inputs: Vec<&Path> = a.line.iter().map(PathBuf::as_path).collect();
            inputs.push(&a.model);
            let out = Outputs::new("metrics-residuals", &inputs, json!({}))?;
            run_stage(out, |out| {
                let line = read_lines(&a.line)?;
                let model = RegressionModel::load(&a.model)?;
                let test = &model.stats().test_indices;
                if line.len() != model.stats().m || test.iter().any(|&i| i >= line.len()) {
                    return Err(CliError::Stage(format!(
                        "line has {} samples, model was trained on {}",
                        line.len(),
                        model.stats().m
                    )));
                }
                let k = line.grid().count();
                let truth: Vec<f64> = test.iter().flat_map(|&i| line.spectrum_row(i).to_vec()).collect();
                let est: Vec<f64> = test.iter().flat_map(|&i| model.predict_values(line.rgb()[i])).collect();
                let band = residual_band(&truth, &est, k)?;
                out.write_json(&a.report, &json!({"wavelengths_nm": line.grid().wavelengths(), "band": band}))?;
                if let Some(csv_path) = &a.csv {
                    let wls = line.grid().wavelengths();
                    out.write(csv_path, |p| {
                        let mut text = String::from("wavelength_nm,mean,lower,upper\n");
                        for (j, wl) in wls.iter().enumerate() {
                            let (m, h) = (band.mean[j], band.half_width[j]);
                            text.push_str(&format!("{wl},{m},{},{}\n", m - h, m + h));
                        }
                        fs::write(p, text).map_err(|e| spectracube::Error::Io {
                            path: p.to_path_buf(),
                            source: e,
                        })
                    })?;
                }
                let worst = band.mean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                ctx.note(format!("{} test pixels, largest |mean residual| {worst:.3e}", band.m));
                Ok(())
            })
        }
    }
}

fn select_plane(cube: &Hypercube, name: &str) -> CliResult<Vec<f64>> {
    if let Some(p) = cube.named_plane(name) {
        return Ok(p);
    }
    if cube.bands() == 1 {
        return Ok(cube.plane(0));
    }
    Err(CliError::Stage(format!("container has no plane named {name:?}")))
}

fn list_frames(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut frames: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && matches!(extension(p).as_str(), "png" | "ppm" | "pnm" | "hsc"))
        .collect();
    frames.sort();
    if frames.is_empty() {
        return Err(CliError::Config(format!("no frames in {}", dir.display())));
    }
    Ok(frames)
}

#[derive(Debug, Serialize, serde::Deserialize)]
pub struct FrameMeta {
    pub fps: f64,
    pub frames: usize,
    pub rows: usize,
    pub cols: usize,
}

enum FrameModel {
    Mlp(MlpModel),
    Regression(Box<(RegressionModel, ExtinctionTable, FitOptions)>),
}

impl FrameModel {
    fn maps(&self, img: &RgbImage) -> CliResult<HemodynamicMaps> {
        Ok(match self {
            FrameModel::Mlp(m) => infer_maps(m, img),
            FrameModel::Regression(r) => fit_cube(&r.0.recover_cube(img)?.cube, &r.1, &r.2)?,
        })
    }
}

#[derive(Debug, Serialize)]
struct VideoReport {
    frames: usize,
    fps: f64,
    roi: String,
    roi_pixels: usize,
    phase_deg: f64,
    magnitude: f64,
    method: PhaseMethod,
    edge_samples: usize,
    low_confidence: bool,
    hbo2: Vec<f64>,
    hb: Vec<f64>,
    delta_hbo2_filtered: Vec<f64>,
    delta_hb_filtered: Vec<f64>,
}

pub fn video(ctx: &Ctx, a: &VideoArgs) -> CliResult<()> {
    require(&a.model)?;
    let frames = list_frames(&a.frames)?;
    let window = parse_window(&a.window)?;
    if a.decimate == 0 {
        return Err(CliError::Config("decimate must be at least 1".into()));
    }
    let fps = match a.fps {
        Some(f) => f,
        None => {
            let meta = a.frames.join("meta.json");
            let text = fs::read_to_string(&meta)
                .map_err(|_| CliError::Config(format!("--fps not given and {} missing", meta.display())))?;
            let m: FrameMeta = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            m.fps
        }
    };
    if !(fps > 0.0) {
        return Err(CliError::Config(format!("frame rate {fps} must be positive")));
    }
    let thresholds = match &a.mask_thresholds {
        Some(p) => {
            let text = fs::read_to_string(require(p)?).map_err(|e| CliError::Config(e.to_string()))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => SegmentationThresholds::default(),
    };
    let model = match extension(&a.model).as_str() {
        "hsl" => {
            let m = config("model", RegressionModel::load(&a.model))?;
            let ext = load_ext(a.ext.as_deref(), *m.grid())?;
            FrameModel::Regression(Box::new((m, ext, FitOptions { window, ..Default::default() })))
        }
        _ => FrameModel::Mlp(config("model", MlpModel::load(&a.model))?),
    };
    let mut inputs: Vec<&Path> = vec![&a.model];
    if let Some(p) = &a.mask_thresholds {
        inputs.push(p);
    }
    inputs.extend(frames.iter().map(PathBuf::as_path));
    let method = match a.method {
        Method::Hilbert => PhaseMethod::Hilbert,
        Method::Xspec => PhaseMethod::Xspec,
    };
    let out = Outputs::new(
        "video",
        &inputs,
        json!({"fps": fps, "roi": format!("{:?}", a.roi), "method": method, "f_lo": a.f_lo, "f_hi": a.f_hi,
               "decimate": a.decimate, "thresholds": thresholds}),
    )?;
    run_stage(out, |out| {
        let mut all = Vec::with_capacity(frames.len());
        let mut mask: Option<Vec<bool>> = None;
        for (i, f) in frames.iter().enumerate() {
            let img = read_rgb(f)?;
            let img = if a.decimate > 1 { img.decimate(a.decimate) } else { img };
            if mask.is_none() {
                let seg = segment_vessels(&img, &thresholds)?;
                mask = Some(match a.roi {
                    Roi::Vessel => seg.vessel,
                    Roi::Avascular => seg.avascular,
                    Roi::All => vec![true; img.len()],
                });
            }
            let maps = model.maps(&img)?;
            if let Some(dir) = &a.maps_out {
                write_maps(out, &dir.join(format!("maps_{i:05}.hsc")), &maps)?;
            }
            all.push(maps);
        }
        let mask = mask.unwrap_or_default();
        let series = roi_timeseries(&all, &mask)?;
        let opts = PhaseOptions {
            method,
            f_lo: a.f_lo,
            f_hi: a.f_hi,
            ..Default::default()
        };
        let phase = phase_difference(&series.delta_hbo2, &series.delta_hb, fps, &opts)?;
        if let Some(p) = &a.series_csv {
            out.write(p, |p| {
                let mut text = String::from("time_s,hbo2,hb,delta_hbo2_filtered,delta_hb_filtered\n");
                for i in 0..series.hbo2.len() {
                    text.push_str(&format!(
                        "{},{},{},{},{}\n",
                        i as f64 / fps,
                        series.hbo2[i],
                        series.hb[i],
                        phase.delta_hbo2[i],
                        phase.delta_hb[i]
                    ));
                }
                fs::write(p, text).map_err(|e| spectracube::Error::Io {
                    path: p.to_path_buf(),
                    source: e,
                })
            })?;
        }
        let report = VideoReport {
            frames: frames.len(),
            fps,
            roi: format!("{:?}", a.roi).to_lowercase(),
            roi_pixels: mask.iter().filter(|&&m| m).count(),
            phase_deg: phase.phase_deg,
            magnitude: phase.magnitude,
            method: phase.method,
            edge_samples: phase.edge_samples,
            low_confidence: phase.low_confidence,
            hbo2: series.hbo2,
            hb: series.hb,
            delta_hbo2_filtered: phase.delta_hbo2,
            delta_hb_filtered: phase.delta_hb,
        };
        out.write_json(&a.report, &report)?;
        ctx.note(format!(
            "phase {:.2} deg (resultant length {:.3}) over {} frames",
            report.phase_deg, report.magnitude, report.frames
        ));
        Ok(())
    })
}

fn frame_extension(bits: Option<u8>) -> &'static str {
    match bits {
        None => "hsc",
        Some(8) | Some(16) => "png",
        Some(_) => "ppm",
    }
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> CliResult<()> {
    require(&a.script)?;
    let script = config("scene script", SceneScript::load(&a.script))?;
    let scene = config("scene script", script.compile())?;
    let grid = parse_grid(&a.grid)?;
    let ext = load_ext(a.ext.as_deref(), grid)?;
    let sens = load_sensitivity(a.sens.as_deref(), grid)?;
    if let Some(b) = a.bits {
        if !(1..=16).contains(&b) {
            return Err(CliError::Config(format!("bit depth {b} outside 1..=16")));
        }
    }
    let line_col = a.line_col.unwrap_or(script.cols / 2);
    if line_col >= script.cols {
        return Err(CliError::Config(format!("line column {line_col} outside 0..{}", script.cols)));
    }
    let mut inputs: Vec<&Path> = vec![&a.script];
    if let Some(p) = &a.ext {
        inputs.push(p);
    }
    if let Some(p) = &a.sens {
        inputs.push(p);
    }
    let out = Outputs::new(
        "synth",
        &inputs,
        json!({"noise": a.noise, "seed": a.seed, "bits": a.bits, "grid": a.grid, "line_col": line_col}),
    )?;
    run_stage(out, |out| {
        let mut scale = ScaleMode::Auto;
        let fext = frame_extension(a.bits);
        for f in 0..script.frames {
            let cube = scene.render_cube(&ext, f)?;
            let opts = RenderOptions {
                noise_sigma: a.noise,
                seed: a.seed.wrapping_add(f as u64),
                scale,
                bits: a.bits,
            };
            let rendered = render_rgb(&cube, &sens, &opts)?;
            // keep one intensity scale across the sequence
            scale = ScaleMode::Fixed(rendered.scale);
            let img = rendered.image;
            out.write(&a.frames.join(format!("frame_{f:05}.{fext}")), |p| write_rgb(&img, p, a.bits))?;
            let maps = scene.truth_maps(f)?;
            write_maps(out, &a.truth.join(format!("maps_{f:05}.hsc")), &maps)?;
            if !a.no_cubes {
                out.write(&a.truth.join(format!("cube_{f:05}.hsc")), |p| write_cube(&cube, p))?;
            }
            if f == 0 {
                let line = extract_line(&cube, &img, line_col)?;
                out.write(&a.truth.join("line.csv"), |p| write_line(&line, p))?;
                let labels: String = std::iter::once("row,col,hbo2,hb\n".to_string())
                    .chain((0..script.rows).map(|r| {
                        let i = r * script.cols + line_col;
                        format!("{r},{line_col},{},{}\n", maps.hbo2[i], maps.hb[i])
                    }))
                    .collect();
                out.write(&a.truth.join("line_labels.csv"), |p| {
                    fs::write(p, &labels).map_err(|e| spectracube::Error::Io {
                        path: p.to_path_buf(),
                        source: e,
                    })
                })?;
                out.write_json(&a.frames.join("meta.json"), &FrameMeta {
                    fps: 1.0 / script.frame_interval_s,
                    frames: script.frames,
                    rows: script.rows,
                    cols: script.cols,
                })?;
            }
        }
        ctx.note(format!(
            "rendered {} frame(s) of {}x{} on {} bands",
            script.frames,
            script.rows,
            script.cols,
            grid.count()
        ));
        Ok(())
    })
}
