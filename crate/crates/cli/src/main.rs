use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qd_exciton::config::{ExperimentConfig, ExperimentName};
use qd_exciton::experiments::run_experiment;
use qd_exciton::parallel::Execution;

/// Run a named exciton-qubit experiment and write its CSV/JSON data.
#[derive(Debug, Parser)]
#[command(name = "qd-exciton", version)]
struct Args {
    /// TOML config; without it the built-in defaults are used.
    #[arg(long)]
    config: Option<PathBuf>,

    /// fig1d, fig2, fig3b, fig3cf, fig4 or sweep (overrides the config).
    #[arg(long)]
    experiment: Option<String>,

    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads: 0 = all cores, 1 = sequential.
    #[arg(long)]
    workers: Option<usize>,

    /// Exit non-zero when any acceptance threshold fails.
    #[arg(long)]
    check: bool,
}

fn load(args: &Args) -> qd_exciton::Result<ExperimentConfig> {
    let experiment = args
        .experiment
        .as_deref()
        .map(str::parse::<ExperimentName>)
        .transpose()?;
    let mut cfg = match (&args.config, experiment) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(e)) => ExperimentConfig::defaults(e),
        (None, None) => {
            return Err(qd_exciton::Error::Config(
                "either --config or --experiment is required".into(),
            ))
        }
    };
    if let Some(e) = experiment {
        cfg.experiment = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cfg = match load(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let output = match run_experiment(&cfg, Execution::from_workers(cfg.workers)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {} failed: {e}", cfg.experiment);
            return ExitCode::from(2);
        }
    };
    if let Err(e) = output.write_to(&cfg.output_dir, &cfg) {
        eprintln!("error: writing to {}: {e}", cfg.output_dir.display());
        return ExitCode::from(2);
    }
    println!("{}", output.status_line());
    if args.check && !output.passed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
