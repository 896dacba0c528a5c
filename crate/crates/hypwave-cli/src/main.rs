//! `hypwave`: runs catalogued experiments from JSON configs and writes CSV tables.
//!
//! Exit codes: 0 success, 1 i/o error, 2 validation error, 3 numerical failure.

mod catalog;
mod config;
mod experiments;
mod output;

use clap::{Parser, Subcommand};
use config::{invalid, CliError, ExperimentConfig, Params, Result};
use output::Sink;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "hypwave", version, about = "Numerical experiments for time-dependent hyperbolic equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory (overrides the config `output` key).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses all cores (overrides the config `threads` key).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Random seed (overrides the config `seed` key).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run { config: PathBuf },
    /// Print the experiment catalog.
    List,
}

fn panic_message(e: &(dyn std::any::Any + Send)) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into())
}

fn run(cli: &Cli, path: &Path) -> Result<()> {
    let mut cfg = ExperimentConfig::load(path)?;
    let entry = catalog::find(&cfg.experiment).ok_or_else(|| {
        let names: Vec<&str> = catalog::CATALOG.iter().map(|e| e.name).collect();
        invalid(format!("unknown experiment `{}`; expected one of {}", cfg.experiment, names.join(", ")))
    })?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let threads = match cli.threads.or(cfg.threads).unwrap_or(0) {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("hypwave-out"));
    cfg.seed = Some(seed);
    cfg.threads = Some(threads);
    cfg.output = Some(out.display().to_string());
    let params = Params::new(&cfg.parameters, entry)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Io(e.to_string()))?;

    let mut sink = Sink::new(&out, entry)?;
    let start = Instant::now();
    pool.install(|| std::panic::catch_unwind(AssertUnwindSafe(|| experiments::run(entry, &params, seed, &mut sink))))
        .unwrap_or_else(|e| Err(CliError::Numerical(format!("internal failure: {}", panic_message(&*e)))))?;
    let meta = serde_json::json!({
        "experiment": entry.name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seed": seed,
        "threads": threads,
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": sink.file_names(),
    });
    sink.meta(&meta)?;
    for f in sink.file_names() {
        println!("{}", out.join(f).display());
    }
    sink.commit();
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::List => {
            print!("{}", catalog::render());
            Ok(())
        }
        Command::Run { config } => run(&cli, config),
    };
    if let Err(e) = result {
        eprintln!("hypwave: {e}");
        std::process::exit(e.exit_code());
    }
}
