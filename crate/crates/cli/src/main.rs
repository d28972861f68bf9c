//! Command-line driver: builds regularized Cantor sets, evaluates Riesz
//! transforms on them and writes the estimate reports.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use cantor_riesz::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands::{Outcome, Run};
use crate::config::{read_sigma_file, BackendName, ConfigError, DepthRange, RunConfig};
use crate::output::{progress, unix_seconds, ErrorRecord, Meta, OutDir};

#[derive(Debug, Parser)]
#[command(name = "cantor-riesz", version, about = "Riesz transforms on regularized Cantor sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print and write the regularized ladder table.
    Regularize,
    /// Export the leaf cubes of the set.
    Build,
    /// Evaluate the transform at the measure nodes.
    Transform,
    /// Transform norm against the density sum over a depth sweep.
    VerifyNorm,
    /// Operator norm against the density sum over a depth sweep.
    VerifyOperator,
    /// Capacity proxy against the density band.
    Capacity,
    /// Survival curve of the squared transform.
    Distribution,
    /// Threshold cube counts.
    Cubes,
    /// Randomized checks of the combinatorial lemmas.
    Lemmas,
    /// Gauge-calibrated superlevel and capacity experiment.
    Gauge,
    /// Naive against tree backend: deviation, and wall time in meta.json.
    Bench,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Regularize => "regularize",
            Command::Build => "build",
            Command::Transform => "transform",
            Command::VerifyNorm => "verify-norm",
            Command::VerifyOperator => "verify-operator",
            Command::Capacity => "capacity",
            Command::Distribution => "distribution",
            Command::Cubes => "cubes",
            Command::Lemmas => "lemmas",
            Command::Gauge => "gauge",
            Command::Bench => "bench",
        }
    }
}

/// Flags override fields of the `--config` document.
#[derive(Debug, Args)]
struct Overrides {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    d: Option<usize>,
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Depth or inclusive range, e.g. `5` or `1..5`.
    #[arg(long, global = true)]
    n: Option<DepthRange>,
    #[arg(long, global = true)]
    ratio: Option<f64>,
    /// File of scales, whitespace or comma separated.
    #[arg(long, global = true)]
    sigma_file: Option<PathBuf>,
    /// Gauge function, `power:<beta>`.
    #[arg(long, global = true)]
    gauge: Option<String>,
    #[arg(long, global = true)]
    sigma0: Option<f64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(long = "T", global = true)]
    frame: Option<f64>,
    #[arg(long, global = true)]
    q: Option<usize>,
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long, global = true)]
    mac: Option<f64>,
    #[arg(long, global = true)]
    eps: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    level: Option<f64>,
    #[arg(long, global = true)]
    c0: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    cases: Option<usize>,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum BackendArg {
    Naive,
    Tree,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() { cfg.$field = v; })*
            };
        }
        take!(d, s, n, ratio, sigma0, alpha, frame, q, mac, eps, seed, out, workers, level, trials, cases);
        if let Some(g) = &self.gauge {
            cfg.gauge = Some(g.clone());
        }
        if let Some(c0) = self.c0 {
            cfg.c0 = Some(c0);
        }
        if let Some(b) = self.backend {
            cfg.backend = match b {
                BackendArg::Naive => BackendName::Naive,
                BackendArg::Tree => BackendName::Tree,
            };
        }
        if let Some(path) = &self.sigma_file {
            cfg.sigma = Some(read_sigma_file(path)?);
        }
        Ok(cfg)
    }
}

fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<ConfigError>().is_some() {
        return ("config", 2);
    }
    match err.downcast_ref::<cantor_riesz::Error>().map(|e| e.kind()) {
        Some(ErrorKind::Numeric) => ("numeric", 3),
        Some(ErrorKind::Invariant) => ("invariant", 1),
        // input files, output paths and parameters are all configuration
        _ => ("config", 2),
    }
}

fn execute(command: &Command, cfg: &RunConfig, out: &OutDir) -> anyhow::Result<Outcome> {
    let mut meta = Meta {
        command: command.name().to_string(),
        version: env!("CARGO_PKG_VERSION"),
        started: unix_seconds(),
        finished: 0.0,
        workers: rayon::current_num_threads(),
        files: Vec::new(),
        timings: serde_json::Map::new(),
    };
    out.write_json("config.json", cfg)?;
    let mut run = Run {
        name: command.name(),
        cfg,
        out,
        meta: &mut meta,
    };
    let outcome = match command {
        Command::Regularize => commands::regularize_cmd(&mut run),
        Command::Build => commands::build_cmd(&mut run),
        Command::Transform => commands::transform_cmd(&mut run),
        Command::VerifyNorm => commands::verify_norm_cmd(&mut run),
        Command::VerifyOperator => commands::verify_operator_cmd(&mut run),
        Command::Capacity => commands::capacity_cmd(&mut run),
        Command::Distribution => commands::distribution_cmd(&mut run),
        Command::Cubes => commands::cubes_cmd(&mut run),
        Command::Lemmas => commands::lemmas_cmd(&mut run),
        Command::Gauge => commands::gauge_cmd(&mut run),
        Command::Bench => commands::bench_cmd(&mut run),
    }?;
    meta.finished = unix_seconds();
    out.write_json("meta.json", &meta)?;
    Ok(outcome)
}

fn fail(out: Option<&OutDir>, record: ErrorRecord) -> ExitCode {
    eprintln!("error ({}): {}", record.kind, record.message);
    for name in &record.failed_checks {
        eprintln!("  failed check: {name}");
    }
    if let Some(out) = out {
        if let Err(e) = out.write_json("error.json", &record) {
            eprintln!("could not write error.json: {e:#}");
        }
    }
    ExitCode::from(record.exit_code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let cfg = match cli.overrides.resolve().and_then(|c| c.validate().map(|_| c)) {
        Ok(cfg) => cfg,
        Err(e) => {
            let (kind, exit_code) = classify(&e);
            // the output directory is still created for the error record
            let out = cli.overrides.out.clone().unwrap_or_else(|| RunConfig::default().out);
            return fail(
                OutDir::create(&out).ok().as_ref(),
                ErrorRecord {
                    kind,
                    exit_code,
                    message: format!("{e:#}"),
                    failed_checks: Vec::new(),
                },
            );
        }
    };
    if cfg.workers > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
            progress(name, format!("worker pool already initialized: {e}"));
        }
    }
    let out = match OutDir::create(&cfg.out).and_then(|o| o.clear_error().map(|_| o)) {
        Ok(out) => out,
        Err(e) => {
            return fail(
                None,
                ErrorRecord {
                    kind: "config",
                    exit_code: 2,
                    message: format!("{e:#}"),
                    failed_checks: Vec::new(),
                },
            )
        }
    };
    match execute(&cli.command, &cfg, &out) {
        Ok(outcome) if outcome.failed_checks.is_empty() => {
            progress(name, format!("done, outputs in {}", cfg.out.display()));
            ExitCode::SUCCESS
        }
        Ok(outcome) => fail(
            Some(&out),
            ErrorRecord {
                kind: "invariant",
                exit_code: 1,
                message: format!("{} checks failed", outcome.failed_checks.len()),
                failed_checks: outcome.failed_checks,
            },
        ),
        Err(e) => {
            let (kind, exit_code) = classify(&e);
            fail(
                Some(&out),
                ErrorRecord {
                    kind,
                    exit_code,
                    message: format!("{e:#}"),
                    failed_checks: Vec::new(),
                },
            )
        }
    }
}
