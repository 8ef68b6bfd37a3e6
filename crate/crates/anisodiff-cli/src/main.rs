use std::path::PathBuf;
use std::process::ExitCode;

use anisodiff::config::ExperimentConfig;
use anisodiff::report::Verdict;
use anisodiff::runner::{configure_threads, execute, Command, RunOptions};
use anisodiff::Error;
use clap::{Args, Parser, Subcommand};

/// Degenerate anisotropic diffusion solver and estimate probes.
///
/// Exit codes: 0 all probes pass, 1 a probe failed, 2 the configuration could
/// not be parsed, 3 invalid configuration or missing constants, 4 numerical abort.
#[derive(Parser)]
#[command(name = "anisodiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Constants file [default: <out>/constants.json].
    #[arg(long)]
    constants: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the solver and write field dumps.
    Simulate(Common),
    /// Check energy probes against the calibrated constant.
    VerifyEnergy(Common),
    /// Check the anisotropic embedding on bump functions.
    VerifyEmbedding(Common),
    /// Sample cut-off derivatives against their claimed bounds.
    VerifyCutoff(Common),
    /// Sup bounds and level-set recursions.
    DegiorgiReport(Common),
    /// Critical-mass probes.
    CriticalMass(Common),
    /// Semicontinuous regularization of the computed solution.
    Regularize(Common),
    /// Measure constants from the energy, sup-bound and critical-mass probes.
    Calibrate(Common),
    /// Simulate and evaluate every probe.
    Run(Common),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse(_) => 2,
        Error::NumericalAbort(_) => 4,
        _ => 3,
    }
}

fn threads_from_env() -> Result<usize, String> {
    match std::env::var("ANISODIFF_THREADS") {
        Err(_) => Ok(0),
        Ok(v) => v.trim().parse().map_err(|_| format!("ANISODIFF_THREADS={v:?} is not a non-negative integer")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::VerifyEnergy(c) => (Command::VerifyEnergy, c),
        Cmd::VerifyEmbedding(c) => (Command::VerifyEmbedding, c),
        Cmd::VerifyCutoff(c) => (Command::VerifyCutoff, c),
        Cmd::DegiorgiReport(c) => (Command::DegiorgiReport, c),
        Cmd::CriticalMass(c) => (Command::CriticalMass, c),
        Cmd::Regularize(c) => (Command::Regularize, c),
        Cmd::Calibrate(c) => (Command::Calibrate, c),
        Cmd::Run(c) => (Command::Run, c),
    };
    match threads_from_env() {
        Ok(n) => configure_threads(n),
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(3);
        }
    }

    let cfg = match ExperimentConfig::load(&common.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}: {e}", common.config.display());
            return ExitCode::from(exit_code(&e));
        }
    };
    let opts = RunOptions {
        command,
        constants_path: common.constants.unwrap_or_else(|| common.out.join("constants.json")),
        out_dir: common.out,
        seed: common.seed,
    };
    match execute(&cfg, &opts) {
        Ok(report) => {
            let c = report.counts;
            println!(
                "{}: {} ({} pass, {} fail, {} skipped) -> {}",
                report.command,
                report.verdict.as_str(),
                c.pass,
                c.fail,
                c.skipped,
                opts.out_dir.join("report.json").display()
            );
            for p in report.probes.iter().filter(|p| p.verdict == Verdict::Fail) {
                println!("  failed: {} ({})", p.name, p.kind);
            }
            if report.verdict == Verdict::Pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
