use anyhow::Context;
use clap::{Parser, Subcommand};
use shocklab_cli::{execute, scenario, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shocklab",
    version,
    about = "Shock-formation experiments for the forced Burgers equation"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        /// Output directory (overrides OUTPUT_DIR and the scenario's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Admit curvature up to (π/T)² in the backward construction.
        #[arg(long)]
        paper_bound: bool,
    },
}

fn run(scenario_path: PathBuf, out: Option<PathBuf>, paper_bound: bool) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&scenario_path)
        .with_context(|| format!("reading {}", scenario_path.display()))?;
    let sc = scenario::parse(&text).with_context(|| format!("in {}", scenario_path.display()))?;
    let dir = out
        .or_else(|| std::env::var_os("OUTPUT_DIR").map(PathBuf::from))
        .or_else(|| sc.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("shocklab-out"));
    let (status, _) = execute(&sc, &dir, RunOptions { paper_bound })?;
    print!("{}", std::fs::read_to_string(dir.join("summary.txt"))?);
    println!("outputs: {}", dir.display());
    Ok(status.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Cmd::Run {
            scenario,
            out,
            paper_bound,
        } => match run(scenario, out, paper_bound) {
            Ok(code) => code,
            Err(e) => {
                eprintln!("error: {e:#}");
                1
            }
        },
    };
    ExitCode::from(code as u8)
}
