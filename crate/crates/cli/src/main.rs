//! `mixkit`: scenario files in, verdicts, certificates, samples and reports out.
//!
//! Exit codes: 0 on success, 2 when the scenario is mathematically infeasible,
//! 1 on any other error.

mod commands;
mod scenario;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "mixkit", version, about = "Joint mixability of elliptical and log-elliptical marginals")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// Scenario JSON file.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Clone, Default)]
pub struct Sampling {
    /// Certificate JSON written by `construct`.
    #[arg(long)]
    pub cert: Option<String>,
    /// Number of draws.
    #[arg(short = 'n', long = "n")]
    pub n: Option<usize>,
    /// Seed; overrides the scenario seed and MIXKIT_SEED.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Default)]
pub struct Grid {
    /// Rearrangement grid size.
    #[arg(short = 'm', long = "m")]
    pub m: Option<usize>,
    /// Probability mass trimmed from each tail.
    #[arg(long)]
    pub trim: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Decide mixability from the weighted scale condition.
    Check(Common),
    /// Report the set of centers.
    Centers(Common),
    /// Build a coupling certificate.
    Construct(Common),
    /// Draw samples from a coupling as CSV.
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Run the rearrangement oracle.
    Ra {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify a coupling by sampling.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Run the whole pipeline and bundle the results.
    Report {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sampling: Sampling,
        #[command(flatten)]
        grid: Grid,
    },
    /// Print the scenario JSON schema.
    Schema {
        #[arg(long)]
        out: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(c) => commands::check(&c),
        Command::Centers(c) => commands::centers(&c),
        Command::Construct(c) => commands::construct(&c),
        Command::Sample { common, sampling } => commands::sample(&common, &sampling),
        Command::Ra { common, grid, seed } => commands::ra(&common, &grid, seed),
        Command::Verify { common, sampling } => commands::verify(&common, &sampling),
        Command::Report { common, sampling, grid } => commands::report(&common, &sampling, &grid),
        Command::Schema { out } => commands::write_output(out.as_deref(), scenario::SCHEMA).map(|_| commands::Status::Ok),
    };
    match result {
        Ok(commands::Status::Ok) => ExitCode::SUCCESS,
        Ok(commands::Status::Infeasible) => ExitCode::from(2),
        Ok(commands::Status::Failed) => ExitCode::from(1),
        Err(e) => {
            if let Some(mixkit::MixError::Infeasible { .. }) = e.downcast_ref::<mixkit::MixError>() {
                eprintln!("mixkit: {e}");
                return ExitCode::from(2);
            }
            eprintln!("mixkit: {e:#}");
            ExitCode::from(1)
        }
    }
}
