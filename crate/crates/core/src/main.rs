use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use tilab::experiments::{self, ExperimentConfig, ExperimentId, Units};

/// Reproduce a data series as CSV.
#[derive(Parser, Debug)]
#[command(name = "tilab", version, about)]
struct Cli {
    /// Which experiment to run.
    experiment: ExperimentId,
    /// TOML config; see configs/ for one per experiment.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `gates.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    units: Option<Units>,
    /// Per-state memory budget in bytes.
    #[arg(long)]
    max_mem: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match ExperimentConfig::load(&cli.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("tilab: {}: {e}", cli.config.display());
            return ExitCode::from(1);
        }
    };
    if let Some(s) = cli.seed {
        cfg.gates.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = o;
    }
    if let Some(u) = cli.units {
        cfg.units = u;
    }
    if let Some(m) = cli.max_mem {
        cfg.max_mem = m;
    }
    match experiments::run(cli.experiment, &cfg) {
        Ok(rep) => {
            for f in &rep.files {
                println!("{}", f.display());
            }
            if rep.capped > 0 {
                eprintln!("tilab: {} point(s) exceeded the memory cap and were written as gaps", rep.capped);
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("tilab: {e}");
            ExitCode::from(1)
        }
    }
}
