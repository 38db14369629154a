//! `inewt` — generate problems, run the incremental Newton / EKF-S
//! solvers, sweep stepsize rules, verify trace invariants and print
//! theory reports.
//!
//! Exit codes: `0` success, `1` verification found violated bounds,
//! `2` usage/config errors, `3` numerical failure (partial artifacts are
//! still written).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inewt::config::{
    load_json, ExperimentConfig, ProblemRef, ProblemSpec, SweepConfig, TheoryConfig,
};
use inewt::formats::{self, ProblemFile, VerifyFile};
use inewt::{runner, verify};
use inewt_core::engine::Termination;
use inewt_core::theory::{theory_report, ProblemConstants};

#[derive(Parser)]
#[command(name = "inewt", version, about = "Incremental Newton / EKF-S experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem instance and write it as JSON.
    Gen(GenArgs),
    /// Run one experiment, writing trace.csv and result.json.
    Run(RunArgs),
    /// Run a grid of stepsize rules over one problem; one directory per
    /// run plus a summary.csv.
    Sweep(SweepArgs),
    /// Evaluate the theory constants for given problem constants.
    Theory(TheoryArgs),
    /// Check a recorded trace against the bounds implied by its problem.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Problem spec JSON (either a bare spec or a full experiment config).
    #[arg(long)]
    config: PathBuf,
    /// Output problem JSON path.
    #[arg(long)]
    out: PathBuf,
    /// Override the spec's generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for trace.csv and result.json.
    #[arg(long)]
    out: PathBuf,
    /// Override the generator seed of the config's problem spec.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep config JSON ({"base": experiment, "grid": [stepsize...]}).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (run_NNN/ subdirectories plus summary.csv).
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; INEWT_JOBS, then 1, when absent.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override the generator seed of the base problem spec.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TheoryArgs {
    /// Constants JSON: {"c":..,"C":..,"m":..,"M":..,"eta":..,"nu":..}.
    #[arg(long)]
    config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trace CSV produced by `run` or `sweep`.
    #[arg(long)]
    trace: PathBuf,
    /// Problem JSON the trace was recorded against.
    #[arg(long)]
    problem: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

const EXIT_VIOLATED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Theory(args) => cmd_theory(&args),
        Command::Verify(args) => cmd_verify(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("inewt: error: {err:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn config_base(path: &Path) -> Option<&Path> {
    path.parent().filter(|p| !p.as_os_str().is_empty())
}

/// Accepts either a bare problem spec or a full experiment config.
fn load_problem_ref(path: &Path) -> anyhow::Result<ProblemRef> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(spec) = serde_json::from_str::<ProblemSpec>(&text) {
        return Ok(ProblemRef::Spec(spec));
    }
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("config is neither a problem spec nor an experiment config: {e}"))?;
    Ok(config.problem)
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<u8> {
    let mut problem_ref = load_problem_ref(&args.config)?;
    if let Some(seed) = args.seed {
        problem_ref = problem_ref.with_seed(seed);
    }
    let problem = problem_ref.materialize(config_base(&args.config))?;
    let json = runner::problem_to_json(&problem)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(&args.out, json.as_bytes())?;
    println!("wrote {}", args.out.display());
    Ok(0)
}

fn cmd_run(args: &RunArgs) -> anyhow::Result<u8> {
    let mut config: ExperimentConfig = load_json(&args.config)?;
    if let Some(seed) = args.seed {
        config.problem = config.problem.with_seed(seed);
    }
    let executed = runner::execute(&config, config_base(&args.config))?;
    runner::write_artifacts(&args.out, &executed)?;
    println!(
        "{}: {} after {} cycles, |grad| = {:e}",
        args.out.display(),
        executed.result.termination,
        executed.run.cycles_used,
        executed.run.final_grad_norm
    );
    if executed.run.termination == Termination::StepsizeFailure {
        eprintln!(
            "inewt: numerical failure: {}",
            executed.result.failure.as_deref().unwrap_or("unknown")
        );
        return Ok(EXIT_NUMERICAL);
    }
    Ok(0)
}

fn jobs_from(args: Option<usize>) -> usize {
    args.or_else(|| {
        std::env::var("INEWT_JOBS")
            .ok()
            .and_then(|v| v.parse().ok())
    })
    .unwrap_or(1)
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let mut sweep: SweepConfig = load_json(&args.config)?;
    if let Some(seed) = args.seed {
        sweep.base.problem = sweep.base.problem.with_seed(seed);
    }
    let jobs = jobs_from(args.jobs);
    let rows = runner::run_sweep(&sweep, config_base(&args.config), &args.out, jobs)?;
    println!(
        "{}: {} runs, summary at {}",
        args.out.display(),
        rows.len(),
        args.out.join("summary.csv").display()
    );
    Ok(0)
}

fn cmd_theory(args: &TheoryArgs) -> anyhow::Result<u8> {
    let config: TheoryConfig = load_json(&args.config)?;
    let consts = ProblemConstants::new(config.m, config.c, config.big_c, config.gradient_growth);
    let report = theory_report(&consts, config.eta, config.nu)?;
    let file = formats::TheoryFile::from_core(&report);
    emit_json(&file, args.out.as_deref())?;
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let rows = formats::read_trace_csv(&args.trace)?;
    let problem: ProblemFile = load_json(&args.problem)?;
    let report: VerifyFile = verify::verify_trace(&rows, &problem);
    let violated = report.any_violated;
    emit_json(&report, args.out.as_deref())?;
    if violated {
        eprintln!("inewt: bound violations found");
        return Ok(EXIT_VIOLATED);
    }
    Ok(0)
}

fn emit_json<T: serde::Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => formats::write_json_pretty(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}
