//! Command-line front end for the spectracube processing chain.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod provenance;
pub mod render;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use commands::Ctx;
use error::{CliError, EXIT_CONFIG, EXIT_OK};

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("{}", CliError::Config("--threads must be at least 1".into()));
            return EXIT_CONFIG;
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let ctx = Ctx { quiet: cli.quiet };
    match dispatch(&ctx, &cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("spectracube: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(ctx: &Ctx, cmd: &Command) -> error::CliResult<()> {
    match cmd {
        Command::Normalize(a) => commands::normalize(ctx, a),
        Command::Colorfit(a) => commands::colorfit(ctx, a),
        Command::ValidateSampling(a) => commands::validate_sampling(ctx, a),
        Command::TrainRegression(a) => commands::train_regression(ctx, a),
        Command::Recover(a) => commands::recover(ctx, a),
        Command::FitHemo(a) => commands::fit_hemo(ctx, a),
        Command::TrainNn(a) => commands::train_nn(ctx, a),
        Command::InferNn(a) => commands::infer_nn(ctx, a),
        Command::Metrics(m) => commands::metrics(ctx, m),
        Command::Video(a) => commands::video(ctx, a),
        Command::Synth(a) => commands::synth(ctx, a),
        Command::Pipeline(a) => pipeline::run(ctx, a),
    }
}
