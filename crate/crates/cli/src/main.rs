//! `missmass`: simulate samples, estimate Z and W, infer their laws, and run
//! the verification suite.
//!
//! Exit status is 0 on success, 1 when the computation itself fails
//! (bad data, no convergence, a failed check) and 2 on usage errors.

mod estimate;
mod infer;
mod input;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use missmass::verify::{self, Level};
use missmass::SolverConfig;

/// Marks an error as a usage problem (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "missmass", version, about = "Missing-mass and total-mass estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset.
    Simulate(simulate::SimulateArgs),
    /// Point estimates of Z, W and W/Z.
    Estimate(estimate::EstimateArgs),
    /// Laws of W and W/Z.
    Infer(infer::InferArgs),
    /// Run the verification suite and print a pass/fail table.
    Verify(VerifyArgs),
}

/// Overrides for the numerical solvers.
#[derive(Args, Clone, Copy)]
pub struct SolverArgs {
    /// Relative tolerance of root finders and maximizers.
    #[arg(long, default_value_t = SolverConfig::default().rel_tol)]
    rel_tol: f64,
    #[arg(long, default_value_t = SolverConfig::default().max_iter)]
    max_iter: usize,
    /// Panel budget per tail of the semi-infinite quadrature (odd, ≥ 33).
    #[arg(long, default_value_t = SolverConfig::default().quad_points)]
    quad_points: usize,
}

impl SolverArgs {
    pub fn config(self) -> Result<SolverConfig> {
        let cfg = SolverConfig {
            rel_tol: self.rel_tol,
            max_iter: self.max_iter,
            quad_points: self.quad_points,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyLevel {
    Quick,
    Full,
}

#[derive(Args)]
struct VerifyArgs {
    /// Quick cuts Monte Carlo replicate counts tenfold.
    #[arg(long, value_enum, default_value = "full")]
    level: VerifyLevel,
    /// Run only these checks (by number).
    #[arg(long, value_delimiter = ',')]
    only: Vec<u32>,
    /// Also write the results as JSON.
    #[arg(long)]
    out_json: Option<PathBuf>,
}

fn run_verify(args: VerifyArgs) -> Result<bool> {
    if let Some(p) = &args.out_json {
        input::check_output(p)?;
    }
    let ids: Vec<u32> = if args.only.is_empty() {
        verify::CHECKS.iter().map(|(id, _)| *id).collect()
    } else {
        for id in &args.only {
            if !verify::CHECKS.iter().any(|(k, _)| k == id) {
                return Err(usage(format!("no check {id}; valid ids are 1 to {}", verify::CHECKS.len())));
            }
        }
        args.only.clone()
    };
    let level = match args.level {
        VerifyLevel::Quick => Level::Quick,
        VerifyLevel::Full => Level::Full,
    };
    let mut results = Vec::new();
    for id in ids {
        let c = verify::run_check(id, level);
        println!(
            "{} {:>2} {:<24} {:>7.2}s  {}",
            if c.passed { "[PASS]" } else { "[FAIL]" },
            c.id,
            c.name,
            c.seconds,
            c.detail
        );
        results.push(c);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if let Some(p) = &args.out_json {
        let value = serde_json::to_value(&results)?;
        output::emit(&value, Some(p))?;
    }
    Ok(failed == 0)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("MISSMASS_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| usage(format!("MISSMASS_THREADS = {v:?} is not a positive integer")))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    match cli.command {
        Command::Simulate(a) => simulate::run(a).map(|_| true),
        Command::Estimate(a) => estimate::run(a).map(|_| true),
        Command::Infer(a) => infer::run(a).map(|_| true),
        Command::Verify(a) => run_verify(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.is::<UsageError>() { 2 } else { 1 })
        }
    }
}
