use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flatcheck::cli::{exit_code, run, Command, RunConfig};

#[derive(Parser)]
#[command(name = "flatcheck", version, about = "Flat triangular forms for two-input control-affine systems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Test the two geometric conditions at sampled points.
    Check(Opts),
    /// Check, then build chart, feedback, triangular form and flat output.
    Transform(Opts),
    /// Transform, then run the numerical cross-checks.
    Verify(Opts),
    /// Transform, then simulate both representations and write a CSV.
    Simulate(Opts),
}

#[derive(Args)]
struct Opts {
    spec: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Maximum total degree of the output-pair ansatz.
    #[arg(long, default_value_t = 2)]
    degree: u32,
    #[arg(long = "rank-tol", default_value_t = 1e-9)]
    rank_tol: f64,
    #[arg(long = "proj-tol", default_value_t = 1e-8)]
    proj_tol: f64,
    #[arg(long = "equiv-tol", default_value_t = 1e-9)]
    equiv_tol: f64,
    /// Minimum |r_i| accepted along trajectories.
    #[arg(long, default_value_t = 1e-3)]
    regularity: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    horizon: f64,
    /// CSV path for `simulate` (default trajectory.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Construct even when the conditions fail.
    #[arg(long)]
    force: bool,
    /// Print the JSON report instead of the text summary.
    #[arg(long = "print-json")]
    print_json: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, o) = match cli.command {
        Cmd::Check(o) => (Command::Check, o),
        Cmd::Transform(o) => (Command::Transform, o),
        Cmd::Verify(o) => (Command::Verify, o),
        Cmd::Simulate(o) => (Command::Simulate, o),
    };
    let cfg = RunConfig {
        seed: o.seed,
        samples: o.samples,
        degree: o.degree,
        rank_tol: o.rank_tol,
        proj_tol: o.proj_tol,
        equiv_tol: o.equiv_tol,
        regularity: o.regularity,
        dt: o.dt,
        horizon: o.horizon,
        out: o.out,
        json: o.json,
        force: o.force,
        ..RunConfig::new(command, o.spec)
    };
    match run(&cfg) {
        Ok(report) => {
            if o.print_json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.render_text());
            }
            ExitCode::from(exit_code(&report) as u8)
        }
        Err(e) => {
            eprintln!("flatcheck: {e}");
            ExitCode::from(2)
        }
    }
}
