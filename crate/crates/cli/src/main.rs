use std::path::PathBuf;
use std::process::ExitCode;

use cantor_harmonic::experiments::{config_reference, run, write_outputs, ExperimentConfig, ExperimentKind};
use clap::{Parser, Subcommand};

/// Harmonic measure experiments on 4-corner Cantor sets.
#[derive(Parser, Debug)]
#[command(name = "cantor-harmonic", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file (see `config-reference`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core), overriding the config.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    plots: bool,
    /// Walkers per campaign, overriding the config.
    #[arg(long, global = true)]
    walkers: Option<u64>,
    /// Construction depth, overriding the config.
    #[arg(long, global = true)]
    depth: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Sample a cylinder measure table.
    Sample,
    /// Entropy-ratio dimension of the harmonic measure.
    Dims,
    /// Dimension difference under perturbations of the scale sequence.
    Continuity,
    /// Dimension gap between the harmonic measure and the Cantor set.
    Gap,
    /// Decay of conditional-ratio deviations.
    Harnack,
    /// Decay of entropy oscillations.
    Delta,
    /// Walk-on-spheres against the lattice oracle.
    OracleCompare,
    /// Print the documented default configuration.
    ConfigReference,
}

impl Command {
    fn kind(self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Sample => ExperimentKind::Sample,
            Command::Dims => ExperimentKind::Dims,
            Command::Continuity => ExperimentKind::Continuity,
            Command::Gap => ExperimentKind::Gap,
            Command::Harnack => ExperimentKind::Harnack,
            Command::Delta => ExperimentKind::Delta,
            Command::OracleCompare => ExperimentKind::OracleCompare,
            Command::ConfigReference => return None,
        })
    }
}

fn execute(cli: &Cli) -> cantor_harmonic::Result<()> {
    let Some(kind) = cli.command.kind() else {
        print!("{}", config_reference());
        return Ok(());
    };
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(n) = cli.walkers {
        cfg.campaign.walkers = n;
    }
    if let Some(d) = cli.depth {
        cfg.wos.depth = d;
    }
    cfg.plots |= cli.plots;
    cfg.kind = Some(kind);

    let out = run(kind, &cfg)?;
    let files = write_outputs(&cfg.out, &out, cfg.plots)?;
    let r = &out.result;
    println!("{}: {:.2} s, {} walkers", kind.name(), r.timing.wall_seconds, r.timing.walkers);
    for (name, m) in &r.metrics {
        println!("  {name:<40} {:>14.6} ± {:.6} ({:?})", m.value, m.uncertainty, m.method);
    }
    for (name, ok) in &r.checks {
        println!("  check {name:<34} {}", if *ok { "yes" } else { "no" });
    }
    for n in &r.notes {
        println!("  note: {n}");
    }
    for f in files {
        println!("  wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
