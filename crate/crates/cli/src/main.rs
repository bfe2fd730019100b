use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use temperley_cli::{execute, Command, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "temperley", version, about = "Domino tilings of multiply connected domains: sampling, heights and continuum predictions")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Restrict to one lattice spacing of the config's `eps` list.
    #[arg(long = "eps-index")]
    eps_index: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the config and the rasterized regions.
    Validate(Common),
    /// Build Temperleyan regions.
    Build(Common),
    /// Count tilings (log |det K|, exact for small regions).
    Count(Common),
    /// Draw exact uniform samples.
    Sample(Common),
    /// Height functions, expected heights and hole heights.
    Heights(Common),
    /// Harmonic measures and the scale matrix.
    Harmonic(Common),
    /// Period matrix, Riemann constants and shift.
    Riemann(Common),
    /// Continuum predictions at the query points.
    Predict(Common),
    /// Sample and run the statistical gates.
    Verify(Common),
    /// SVG of the first sample.
    Render(Common),
    /// Every stage end to end.
    Run(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Validate(c) => (Command::Validate, c),
        Cmd::Build(c) => (Command::Build, c),
        Cmd::Count(c) => (Command::Count, c),
        Cmd::Sample(c) => (Command::Sample, c),
        Cmd::Heights(c) => (Command::Heights, c),
        Cmd::Harmonic(c) => (Command::Harmonic, c),
        Cmd::Riemann(c) => (Command::Riemann, c),
        Cmd::Predict(c) => (Command::Predict, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Render(c) => (Command::Render, c),
        Cmd::Run(c) => (Command::Run, c),
    };
    let config = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(2);
        }
    };
    let opts = RunOptions { seed: common.seed, out: common.out, threads: common.threads, eps_index: common.eps_index };
    match execute(cmd, &config, &opts) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if let Some(m) = &outcome.manifest {
                println!("wrote {} files, config hash {}", m.files.len() + 1, m.config_hash);
            }
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
