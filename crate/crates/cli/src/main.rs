mod cli;
mod commands;
mod config;

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use fisher_clt::report::write_atomic;

use crate::cli::Cli;

/// Fails early when reports could not be written.
fn probe_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    let probe = dir.join(format!(".fisher-clt-probe{}", std::process::id()));
    fs::write(&probe, b"").with_context(|| format!("output directory {} is not writable", dir.display()))?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, args) = cli.command.split();
    let cfg = config::resolve(kind, &args)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    if let Some(dir) = &cfg.out_dir {
        probe_dir(dir)?;
    }
    let outcome = commands::execute(&cfg)?;
    for c in &outcome.checks {
        println!("{:<7} {}: {}", c.status.as_str(), c.name, c.detail);
    }
    if let Some(dir) = &cfg.out_dir {
        for r in outcome.reports.iter().filter(|r| cfg.wants(r.format)) {
            let path = dir.join(&r.file);
            write_atomic(&path, &r.contents).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(outcome.failed())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
