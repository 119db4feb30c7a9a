use std::path::{Path, PathBuf};

use serde_json::json;
use spectracube::analytics::{sam_map, ssim_auto};
use spectracube::io::read_cube;
use spectracube::tissue::HemodynamicMaps;

use crate::args::*;
use crate::commands::{self, Ctx};
use crate::config::{Input, PipelineConfig, ScriptSource};
use crate::error::{CliError, CliResult};
use crate::provenance::{run_stage, Outputs};

struct Layout {
    root: PathBuf,
}

impl Layout {
    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }
}

fn frame_name(bits: Option<u8>) -> &'static str {
    match bits {
        None => "frame_00000.hsc",
        Some(8) | Some(16) => "frame_00000.png",
        Some(_) => "frame_00000.ppm",
    }
}

/// synth (phantom input) → sampling check → regression → recovery → tissue fit → MLP → metrics.
pub fn run(ctx: &Ctx, a: &PipelineArgs) -> CliResult<()> {
    let mut cfg = PipelineConfig::load(&a.config)?;
    if let Some(d) = &a.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    // reject bad values before anything is written
    commands::parse_grid(&cfg.grid)?;
    commands::parse_window(&cfg.fit.window)?;
    cfg.colormap
        .parse::<crate::render::Colormap>()
        .map_err(CliError::Config)?;
    if cfg.fit.decimate == 0 {
        return Err(CliError::Config("fit.decimate must be at least 1".into()));
    }
    let lay = Layout {
        root: cfg.out_dir.clone(),
    };
    std::fs::create_dir_all(&lay.root).map_err(|e| CliError::Config(format!("{}: {e}", lay.root.display())))?;
    let png_dir = cfg.maps_png.then(|| lay.path("png"));

    let (image, lines, truth_dir) = match &cfg.input {
        Input::Phantom(p) => {
            let script = match &p.script {
                ScriptSource::Path(s) => s.clone(),
                ScriptSource::Inline(s) => {
                    let path = lay.path("scene.json");
                    let out = Outputs::new("pipeline", &[], json!({}))?;
                    run_stage(out, |out| {
                        let text = s.to_json()?;
                        out.write(&path, |q| {
                            std::fs::write(q, text + "\n").map_err(|e| spectracube::Error::Io {
                                path: q.to_path_buf(),
                                source: e,
                            })
                        })
                    })?;
                    path
                }
            };
            let truth = lay.path("truth");
            ctx.note("synthesizing phantom");
            commands::synth(
                ctx,
                &SynthArgs {
                    script,
                    ext: cfg.extinction.clone(),
                    sens: cfg.sensitivity.clone(),
                    frames: lay.path("frames"),
                    truth: truth.clone(),
                    noise: p.noise,
                    seed: cfg.seed,
                    bits: p.bits,
                    grid: cfg.grid.clone(),
                    line_col: p.line_col,
                    no_cubes: false,
                },
            )?;
            (
                lay.path("frames").join(frame_name(p.bits)),
                vec![truth.join("line.csv")],
                Some(truth),
            )
        }
        Input::Captured(c) => (c.image.clone(), c.lines.clone(), None),
    };

    ctx.note("checking line sampling");
    commands::validate_sampling(
        ctx,
        &ValidateArgs {
            image: image.clone(),
            line: lines.clone(),
            report: lay.path("sampling.json"),
            strict: cfg.sampling.strict,
            tau_qq: cfg.sampling.tau_qq,
            tau_rc: cfg.sampling.tau_rc,
            levels: cfg.sampling.levels,
        },
    )?;

    ctx.note("training regression");
    let model = lay.path("regression.hsl");
    commands::train_regression(
        ctx,
        &TrainRegressionArgs {
            line: lines.clone(),
            out: model.clone(),
            seed: cfg.seed,
            bias: cfg.regression.bias,
            ridge: cfg.regression.ridge.clone(),
            train_frac: cfg.regression.train_frac,
        },
    )?;
    commands::metrics(
        ctx,
        &MetricsCommand::Residuals(ResidualArgs {
            line: lines.clone(),
            model: model.clone(),
            report: lay.path("residuals.json"),
            csv: Some(lay.path("residuals.csv")),
        }),
    )?;

    ctx.note("recovering cube");
    let recovered = lay.path("recovered.hsc");
    commands::recover(
        ctx,
        &RecoverArgs {
            model: model.clone(),
            image: image.clone(),
            out: recovered.clone(),
            report: Some(lay.path("recover.json")),
        },
    )?;

    ctx.note("fitting tissue model");
    let fit_maps = lay.path("maps_fit.hsc");
    commands::fit_hemo(
        ctx,
        &FitHemoArgs {
            cube: recovered.clone(),
            ext: cfg.extinction.clone(),
            out: fit_maps.clone(),
            lipid: cfg.fit.lipid,
            window: cfg.fit.window.clone(),
            decimate: cfg.fit.decimate,
            png_dir: png_dir.as_ref().map(|d| d.join("fit")),
            colormap: cfg.colormap.clone(),
        },
    )?;

    let nn_maps = lay.path("maps_nn.hsc");
    if !cfg.nn.skip {
        ctx.note("training MLP");
        let mlp = lay.path("mlp.mdl");
        commands::train_nn(
            ctx,
            &TrainNnArgs {
                line: lines.clone(),
                labels_from: LabelSource::Fit,
                labels: None,
                ext: cfg.extinction.clone(),
                window: cfg.fit.window.clone(),
                out: mlp.clone(),
                seed: cfg.seed,
                epochs: cfg.nn.epochs,
                history: Some(lay.path("mlp_history.json")),
            },
        )?;
        commands::infer_nn(
            ctx,
            &InferNnArgs {
                model: mlp,
                image: image.clone(),
                out: nn_maps.clone(),
                png_dir: png_dir.as_ref().map(|d| d.join("nn")),
                colormap: cfg.colormap.clone(),
            },
        )?;
    }

    if let Some(truth) = truth_dir {
        summarize(&lay, &truth, &recovered, &fit_maps, (!cfg.nn.skip).then_some(nn_maps.as_path()), cfg.fit.decimate)?;
    }
    ctx.note(format!("pipeline finished in {}", lay.root.display()));
    Ok(())
}

/// Truth comparisons for phantom runs.
fn summarize(lay: &Layout, truth: &Path, recovered: &Path, fit: &Path, nn: Option<&Path>, decimate: usize) -> CliResult<()> {
    let truth_cube = truth.join("cube_00000.hsc");
    let truth_maps = truth.join("maps_00000.hsc");
    let mut inputs: Vec<&Path> = vec![&truth_cube, &truth_maps, recovered, fit];
    inputs.extend(nn);
    let out = Outputs::new("pipeline-metrics", &inputs, json!({"decimate": decimate}))?;
    run_stage(out, |out| {
        let sam = sam_map(&read_cube(&truth_cube)?, &read_cube(recovered)?)?;
        let truth_full = read_cube(&truth_maps)?;
        let truth_dec = HemodynamicMaps::from_cube(&truth_full.decimate(decimate))?;
        let fit_maps = HemodynamicMaps::from_cube(&read_cube(fit)?)?;
        let fit_ssim = ssim_auto(&truth_dec.spo2, &fit_maps.spo2)?;
        let mut report = json!({
            "sam_mean_rad": sam.mean,
            "sam_median_rad": sam.median,
            "ssim_spo2_fit": fit_ssim.value,
            "fit_converged_fraction": fit_maps.converged_fraction(),
        });
        if let Some(nn) = nn {
            let truth = HemodynamicMaps::from_cube(&truth_full)?;
            let nn_maps = HemodynamicMaps::from_cube(&read_cube(nn)?)?;
            let mae = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64;
            report["ssim_spo2_nn"] = json!(ssim_auto(&truth.spo2, &nn_maps.spo2)?.value);
            report["mae_hbo2_nn"] = json!(mae(&truth.hbo2, &nn_maps.hbo2));
            report["mae_hb_nn"] = json!(mae(&truth.hb, &nn_maps.hb));
        }
        out.write_json(&lay.path("metrics.json"), &report)
    })
}
