// Guards like `!(x > 0.0)` are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{json, Value};

use config::{ConfigError, ExperimentConfig, ExperimentName};
use output::Artifacts;

/// Runs one numerical experiment on a Lorentzian 2-torus and writes CSV,
/// SVG and `results.json` artifacts.
#[derive(Debug, Parser)]
#[command(name = "lortorus", version)]
struct Args {
    /// TOML experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment to run, overriding the config.
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<ExperimentName>,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_experiment(s: &str) -> Result<ExperimentName, String> {
    ExperimentName::parse(s).ok_or_else(|| {
        let names: Vec<_> = ExperimentName::ALL.iter().map(|e| e.as_str()).collect();
        format!("unknown experiment; expected one of {}", names.join(", "))
    })
}

const PASS: u8 = 0;
const CHECK_FAILED: u8 = 1;
const BAD_INPUT: u8 = 2;
const SOLVER_FAILED: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return BAD_INPUT;
    }
    match err.downcast_ref::<lortorus::Error>() {
        Some(lortorus::Error::Domain(_) | lortorus::Error::NoTimelikeClass(_)) => BAD_INPUT,
        Some(_) => SOLVER_FAILED,
        None if err.downcast_ref::<std::io::Error>().is_some() => BAD_INPUT,
        None => SOLVER_FAILED,
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(BAD_INPUT);
        }
    }
    let mut config = match &args.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(BAD_INPUT);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let Some(name) = args.experiment.or(config.experiment) else {
        eprintln!("error: no experiment given; pass --experiment or set `experiment` in the config");
        return ExitCode::from(BAD_INPUT);
    };
    config.experiment = Some(name);
    let dir = args
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("lortorus-out"));
    let mut artifacts = match Artifacts::create(&dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", dir.display());
            return ExitCode::from(BAD_INPUT);
        }
    };

    let outcome = experiments::run(name, &config, &mut artifacts);
    let (code, status, error, checks, values) = match outcome {
        Ok(o) => {
            let ok = o.checks.iter().all(|c| c.passed);
            let code = if ok { PASS } else { CHECK_FAILED };
            (code, if ok { "pass" } else { "fail" }, Value::Null, o.checks, o.values)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            (exit_code(&e), "error", json!(format!("{e:#}")), Vec::new(), Value::Null)
        }
    };
    for c in &checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{mark} {}: measured {:.3e} (tolerance {:.1e}) {}",
            c.name, c.measured, c.tolerance, c.detail
        );
    }

    artifacts.written.push("results.json".into());
    let results = json!({
        "tool": "lortorus",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": name.as_str(),
        "seed": config.seed,
        "status": status,
        "error": error,
        "exit_code": code,
        "config": config,
        "checks": checks,
        "values": values,
        "artifacts": artifacts.written,
    });
    let body = serde_json::to_string_pretty(&results).expect("json values serialise") + "\n";
    if let Err(e) = std::fs::write(dir.join("results.json"), body) {
        eprintln!("error: cannot write results.json: {e}");
        return ExitCode::from(code.max(BAD_INPUT));
    }
    println!("{status}: {} in {}", name, dir.display());
    ExitCode::from(code)
}
