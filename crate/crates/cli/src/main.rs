//! Command-line front end for the verification suite.
//!
//! Exit codes: 0 when every asserted check passes, 1 when any check fails,
//! 2 for configuration or usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use metalgeo::scenario::Scenario;
use metalgeo::suite::{builtin_example1, builtin_example2, run_angle, run_suite};
use metalgeo::VerificationReport;

/// Seed used when neither `--seed` nor a scenario value decides; the
/// `--seed` flag always wins over the environment.
const SEED_ENV: &str = "METALGEO_SEED";

#[derive(Parser)]
#[command(
    name = "metalgeo",
    version,
    about = "Verification suite for metallic and Golden structures on immersed submanifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite on a scenario file.
    Verify {
        /// Scenario JSON file.
        #[arg(long)]
        scenario: PathBuf,
        /// Sampling seed (overrides METALGEO_SEED and the scenario value).
        #[arg(long)]
        seed: Option<u64>,
        /// Override the algebraic tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Write the JSON report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the JSON report on stdout instead of the text summary.
        #[arg(long)]
        json: bool,
    },
    /// Run a built-in example scenario.
    Example {
        /// Which built-in: 1 (surface of revolution in R⁷) or 2 (cone
        /// family in R^{3n+1}).
        #[arg(long)]
        which: u8,
        /// Structure parameter p.
        #[arg(long, default_value_t = 1)]
        p: u32,
        /// Structure parameter q.
        #[arg(long, default_value_t = 1)]
        q: u32,
        /// Number of angular directions (example 2 only).
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
        /// Print the scenario JSON instead of running it.
        #[arg(long)]
        emit_scenario: bool,
    },
    /// Report the sampled slant angle of one distribution.
    Angle {
        #[arg(long)]
        scenario: PathBuf,
        /// Distribution name as declared in the scenario.
        #[arg(long)]
        distribution: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the full JSON angle report.
        #[arg(long)]
        json: bool,
    },
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok())
}

fn apply_overrides(scenario: &mut Scenario, seed: Option<u64>, tol: Option<f64>) {
    if let Some(seed) = seed.or_else(env_seed) {
        scenario.sampling.seed = seed;
    }
    if let Some(tol) = tol {
        scenario.sampling.tol_algebraic = tol;
    }
}

fn load_scenario(path: &PathBuf) -> Result<Scenario, String> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    Scenario::from_json(&src).map_err(|e| e.to_string())
}

fn print_summary(report: &VerificationReport) {
    println!(
        "scenario {}  (p={}, q={}, sigma={:.12}, seed={})",
        report.scenario, report.p, report.q, report.sigma, report.seed
    );
    for c in &report.checks {
        if c.asserted {
            println!(
                "  {} {:<42} residual {:>12.3e}  tol {:>8.1e}  [{} samples]",
                if c.pass { "PASS" } else { "FAIL" },
                c.tag,
                c.residual,
                c.tolerance,
                c.samples
            );
        } else {
            let details = c
                .details
                .as_ref()
                .map(|d| serde_json::to_string(d).unwrap_or_default())
                .unwrap_or_default();
            println!("  INFO {:<42} {details}", c.tag);
        }
    }
    println!(
        "overall: {} ({} checks)",
        if report.overall_pass { "PASS" } else { "FAIL" },
        report.checks.len()
    );
}

fn emit_report(
    mut report: VerificationReport,
    json: bool,
    out: Option<PathBuf>,
) -> Result<i32, String> {
    report.stamp();
    if json {
        println!("{}", report.to_json());
    } else {
        print_summary(&report);
    }
    if let Some(path) = out {
        std::fs::write(&path, report.to_json())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(report.exit_code())
}

fn run() -> Result<i32, String> {
    let cli = Cli::parse();
    match cli.command {
        Command::Verify {
            scenario,
            seed,
            tol,
            out,
            json,
        } => {
            let mut s = load_scenario(&scenario)?;
            apply_overrides(&mut s, seed, tol);
            let report = run_suite(&s).map_err(|e| e.to_string())?;
            emit_report(report, json, out)
        }
        Command::Example {
            which,
            p,
            q,
            n,
            seed,
            tol,
            out,
            json,
            emit_scenario,
        } => {
            let mut s = match which {
                1 => builtin_example1(p, q),
                2 => builtin_example2(n, p, q),
                other => return Err(format!("unknown example {other}; use --which 1 or 2")),
            };
            apply_overrides(&mut s, seed, tol);
            if emit_scenario {
                println!("{}", s.to_json());
                return Ok(0);
            }
            let report = run_suite(&s).map_err(|e| e.to_string())?;
            emit_report(report, json, out)
        }
        Command::Angle {
            scenario,
            distribution,
            seed,
            json,
        } => {
            let mut s = load_scenario(&scenario)?;
            apply_overrides(&mut s, seed, None);
            let report = run_angle(&s, &distribution).map_err(|e| e.to_string())?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&report).expect("angle report serializes")
                );
            } else {
                println!(
                    "distribution {}: {:?}, angle {:.12} rad, deviation {:.3e}, lambda {:.12} ({} samples)",
                    report.distribution,
                    report.classification,
                    report.mean,
                    report.max_deviation,
                    report.lambda,
                    report.angles.len()
                );
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code as u8),
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
