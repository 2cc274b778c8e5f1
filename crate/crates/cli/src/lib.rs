//! Scenario runner: parse a JSON scenario, run the experiment, write CSV
//! tables plus `summary.json` / `summary.txt`.

pub mod commands;
pub mod report;
pub mod scenario;

use report::{write_outputs, Outcome, Status};
use scenario::{Command, ConfigError, Scenario};
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("writing outputs: {0}")]
    Io(#[from] io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        1
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Gate the backward construction on (π/T)² instead of (π/(2T))².
    pub paper_bound: bool,
}

/// Runs the scenario without touching the file system.
pub fn run(sc: &Scenario, opts: RunOptions) -> Result<Outcome, ConfigError> {
    match sc.command {
        Command::ShockScan => commands::scan::shock_scan(sc),
        Command::DivergenceCheck => commands::residual::divergence_check(sc),
        Command::PdeResidual => commands::residual::pde_residual(sc),
        Command::Lemma1 => commands::lemma1::lemma1(sc),
        Command::Theorem2 => commands::theorem2::theorem2(sc, opts),
        Command::ConservationCheck => commands::conservation::conservation_check(sc),
        Command::ExtractAndScan => commands::conservation::extract_and_scan(sc),
    }
}

/// Runs the scenario and writes its outputs into `out_dir`.
pub fn execute(
    sc: &Scenario,
    out_dir: &Path,
    opts: RunOptions,
) -> Result<(Status, Vec<PathBuf>), RunError> {
    let outcome = run(sc, opts)?;
    let files = write_outputs(out_dir, sc.command.as_str(), &outcome)?;
    Ok((outcome.status(), files))
}
