//! `lp-hodge`: experiment runner writing `report.json` and `diagnostics.csv`.
//!
//! Exit status is 0 when every check passes, 1 when a check fails and 2 when
//! the configuration is invalid or the run cannot complete.

mod config;
mod run;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use serde_json::json;

use config::{Command, ExperimentConfig};
use lp_hodge::probe::write_probe_csv;
use run::{Dumps, Outcome};

const SCHEMA: &str = "lp-hodge/1";
const THREADS_ENV: &str = "LP_HODGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "lp-hodge", version, about = "Littlewood-Paley, bounded approximation and Hodge experiments")]
struct Cli {
    /// Command to run; overrides `command` in the config.
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON experiment config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. `grid.n=32`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Write ω, ζ, U and G of the approximation as `.gfn` files.
    #[arg(long)]
    dump_control: bool,
    /// Worker threads (falls back to the config, then to LP_HODGE_THREADS).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::resolve(cli.config.as_deref(), &cli.overrides).map_err(|e| e.to_string())?;
    if let Some(c) = cli.command {
        cfg.command = c;
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    let env_threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| format!("{THREADS_ENV}={v:?} is not a thread count"))?),
        Err(_) => None,
    };
    cfg.threads = cli.threads.or(cfg.threads).or(env_threads);
    if cfg.threads == Some(0) {
        return Err("thread count must be positive".into());
    }
    Ok(cfg)
}

fn write_artifacts(dir: &Path, cfg: &ExperimentConfig, dump_control: bool, outcome: &Outcome) -> std::io::Result<bool> {
    let ok = outcome.checks.iter().all(|c| c.pass);
    let report = json!({
        "schema": SCHEMA,
        "command": cfg.command,
        "config": cfg,
        "dump_control": dump_control,
        "ok": ok,
        "checks": outcome.checks,
        "result": outcome.result,
    });
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    fs::write(dir.join("report.json"), text)?;
    let mut csv = BufWriter::new(File::create(dir.join("diagnostics.csv"))?);
    write_probe_csv(&mut csv, &outcome.rows).map_err(std::io::Error::other)?;
    csv.flush()?;
    Ok(ok)
}

fn write_run_info(dir: &Path, started: SystemTime, elapsed: f64) -> std::io::Result<()> {
    let since_epoch = started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
    let info = json!({
        "started_unix": since_epoch,
        "elapsed_seconds": elapsed,
        "threads_effective": rayon::current_num_threads(),
        "version": env!("CARGO_PKG_VERSION"),
    });
    fs::write(dir.join("run_info.json"), serde_json::to_string_pretty(&info)? + "\n")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lp-hodge: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("lp-hodge: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let dir = cfg.output.dir.clone();
    if let Err(e) = fs::create_dir_all(&dir) {
        eprintln!("lp-hodge: cannot create {}: {e}", dir.display());
        return ExitCode::from(2);
    }

    let started = SystemTime::now();
    let clock = Instant::now();
    let dumps = Dumps { dir: dir.clone(), fields: cfg.output.dump_fields, control: cli.dump_control };
    let outcome = match run::run(&cfg, &dumps) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("lp-hodge: {} failed: {e}", cfg.command);
            return ExitCode::from(2);
        }
    };
    let ok = match write_artifacts(&dir, &cfg, cli.dump_control, &outcome)
        .and_then(|ok| write_run_info(&dir, started, clock.elapsed().as_secs_f64()).map(|_| ok))
    {
        Ok(ok) => ok,
        Err(e) => {
            eprintln!("lp-hodge: cannot write to {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    };
    for c in &outcome.checks {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
