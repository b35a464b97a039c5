//! Command-line laboratory: configuration, experiment drivers and artifact output.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::Path;

use dynloc::Result;

use crate::config::RunConfig;
use crate::output::{Artifacts, Manifest, Verdict};

pub const SUBCOMMANDS: [&str; 7] = ["dynamics", "exponents", "msa", "wegner", "green-checks", "certify", "all"];

#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub verdicts: Vec<Verdict>,
}

impl RunOutcome {
    pub fn failed(&self) -> Vec<&Verdict> {
        self.verdicts.iter().filter(|v| v.enforced && !v.pass).collect()
    }
}

fn enforce_list(cfg: &RunConfig) -> Option<Vec<String>> {
    let list = cfg.str_list("execution", "enforce");
    if list.iter().any(|s| s == "all") {
        None
    } else {
        Some(list)
    }
}

/// Runs one subcommand and writes its artifacts under `[output] directory`.
pub fn run(subcommand: &str, cfg: &RunConfig) -> Result<RunOutcome> {
    use experiments as ex;
    if !SUBCOMMANDS.contains(&subcommand) {
        return Err(dynloc::Error::Config {
            line: 0,
            message: format!("unknown subcommand '{subcommand}'"),
        });
    }
    ex::validate(cfg)?;
    let dir = Path::new(cfg.str("output", "directory")).to_path_buf();
    let mut art = Artifacts::create(&dir, &cfg.str_list("output", "formats"), enforce_list(cfg))?;
    let all = subcommand == "all";
    if all || subcommand == "dynamics" || subcommand == "exponents" {
        let dynout = ex::dynamics(cfg)?;
        ex::write_dynamics(cfg, &dynout, &mut art)?;
        if all || subcommand == "exponents" {
            let fit = ex::exponents(cfg, &dynout.average)?;
            ex::write_exponents(cfg, &fit, &mut art)?;
            let abel = ex::abel(cfg)?;
            ex::write_abel(&abel, &mut art)?;
        }
    }
    if all || subcommand == "green-checks" {
        let g = ex::green_checks(cfg)?;
        ex::write_green(cfg, &g, &mut art)?;
    }
    if all || subcommand == "msa" {
        let m = ex::msa(cfg)?;
        ex::write_msa(&m, &mut art)?;
    }
    if all || subcommand == "wegner" {
        let w = ex::wegner(cfg)?;
        ex::write_wegner(cfg, &w, &mut art)?;
    }
    if all || subcommand == "certify" {
        let c = ex::certify(cfg)?;
        ex::write_certify(&c, &mut art)?;
    }
    let manifest = art.finish(&cfg.echo())?;
    Ok(RunOutcome {
        manifest,
        verdicts: art.verdicts,
    })
}
