use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynloc_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "dynloc", version, about = "Dynamical localization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// INI configuration file; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Disorder-averaged second moments and Cesàro means.
    Dynamics,
    /// Transport exponents from sliding-window fits.
    Exponents,
    /// Multiscale regularity probabilities per scale.
    Msa,
    /// Two-box Wegner estimate.
    Wegner,
    /// Geometric resolvent identity, residuum and regularity checks.
    GreenChecks,
    /// Parameter certificates.
    Certify,
    /// Everything above.
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Dynamics => "dynamics",
            Command::Exponents => "exponents",
            Command::Msa => "msa",
            Command::Wegner => "wegner",
            Command::GreenChecks => "green-checks",
            Command::Certify => "certify",
            Command::All => "all",
        }
    }
}

fn configure(cli: &Cli) -> dynloc::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(w) = cli.workers {
        cfg.set("execution", "workers", w)?;
    }
    if let Some(s) = cli.seed {
        cfg.set("execution", "seed", s)?;
    }
    if let Some(o) = &cli.out {
        cfg.set("output", "directory", o.display())?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure(&cli).and_then(|cfg| dynloc_cli::run(cli.command.name(), &cfg));
    match outcome {
        Ok(out) => {
            for v in &out.verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            let failed = out.failed();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                for v in failed {
                    eprintln!("verdict failed: {} ({})", v.name, v.detail);
                }
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
