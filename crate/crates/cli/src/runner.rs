//! Executes experiments: single runs with trace/result artifacts, and
//! parameter sweeps over stepsize rules with a summary table.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context};
use inewt_core::engine::{self, RunResult};
use inewt_core::gaussnewton;

use crate::config::{ExperimentConfig, MaterializedProblem, Solver, StepsizeSpec, SweepConfig};
use crate::formats::{self, ProblemFile, ResultFile, TraceRow};

pub struct Executed {
    pub run: RunResult,
    pub result: ResultFile,
    pub rows: Vec<TraceRow>,
}

/// Materialize the problem and run the configured solver on it.
///
/// Config paths resolve relative to `base` (the config file's directory).
pub fn execute(config: &ExperimentConfig, base: Option<&Path>) -> anyhow::Result<Executed> {
    let problem = config.problem.materialize(base)?;
    let rule = config.stepsize.to_rule();
    let run_config = config.run_config();
    let run = match (&problem, config.solver) {
        (MaterializedProblem::FiniteSum(p), Solver::In) => {
            if config.ridge.is_some() {
                bail!("ridge applies to the ekfs solver only");
            }
            engine::run_with_rule(p, rule, &run_config)?
        }
        (MaterializedProblem::Nlls(p), Solver::Ekfs) => {
            gaussnewton::run_ekfs(p, rule, &run_config, config.ridge)?
        }
        (MaterializedProblem::FiniteSum(_), Solver::Ekfs) => {
            bail!("solver ekfs needs a least-squares problem (kind nlls)")
        }
        (MaterializedProblem::Nlls(_), Solver::In) => {
            bail!("solver in needs a finite-sum problem")
        }
    };
    let solver_name = match config.solver {
        Solver::In => "in",
        Solver::Ekfs => "ekfs",
    };
    let result = ResultFile::from_run(&run, solver_name, config.stepsize.rule_name());
    let rows = run.scalars.iter().map(TraceRow::from_scalars).collect();
    Ok(Executed {
        run,
        result,
        rows,
    })
}

/// Write `trace.csv` and `result.json` for one executed run.
pub fn write_artifacts(out_dir: &Path, executed: &Executed) -> anyhow::Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let trace_path = out_dir.join("trace.csv");
    let file = std::fs::File::create(&trace_path)
        .with_context(|| format!("creating {}", trace_path.display()))?;
    formats::write_trace_csv(file, &executed.rows)?;
    formats::write_json_pretty(&out_dir.join("result.json"), &executed.result)?;
    Ok(())
}

/// Serialize a materialized problem to its JSON file form.
pub fn problem_to_json(problem: &MaterializedProblem) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(&ProblemFile::from_core(problem))?)
}

/// Fixed summary CSV column order for sweeps.
pub const SUMMARY_HEADER: [&str; 12] = [
    "run",
    "rule",
    "gamma",
    "eta",
    "tau",
    "nu_hat",
    "kappa_hat",
    "initial_alpha",
    "cycles",
    "final_grad_norm",
    "rho_hat",
    "classification",
];

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub run: usize,
    pub rule: StepsizeSpec,
    pub cycles: usize,
    pub final_grad_norm: f64,
    pub rho_hat: Option<f64>,
    pub classification: String,
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        let (gamma, eta, tau, nu_hat, kappa_hat, initial_alpha) = match self.rule {
            StepsizeSpec::Unit => (None, None, None, None, None, None),
            StepsizeSpec::Constant { gamma } => (Some(gamma), None, None, None, None, None),
            StepsizeSpec::Bisection {
                eta,
                tau,
                initial_alpha,
            } => (None, Some(eta), Some(tau), None, None, Some(initial_alpha)),
            StepsizeSpec::LinearGrowth {
                eta_hat,
                nu_hat,
                kappa_hat,
            } => (None, Some(eta_hat), None, Some(nu_hat), Some(kappa_hat), None),
        };
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.run.to_string(),
            self.rule.rule_name().to_string(),
            opt(gamma),
            opt(eta),
            opt(tau),
            opt(nu_hat),
            opt(kappa_hat),
            opt(initial_alpha),
            self.cycles.to_string(),
            self.final_grad_norm.to_string(),
            opt(self.rho_hat),
            self.classification.clone(),
        ]
    }
}

/// Run every grid point of a sweep, one output directory per run, and
/// write `summary.csv` atomically at the end.
///
/// Runs are independent and execute on `jobs` worker threads; the summary
/// keeps grid order regardless of completion order.
pub fn run_sweep(
    sweep: &SweepConfig,
    base: Option<&Path>,
    out_dir: &Path,
    jobs: usize,
) -> anyhow::Result<Vec<SummaryRow>> {
    if sweep.grid.is_empty() {
        bail!("sweep grid is empty");
    }
    std::fs::create_dir_all(out_dir)?;
    let jobs = jobs.max(1).min(sweep.grid.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<anyhow::Result<SummaryRow>>>> =
        Mutex::new((0..sweep.grid.len()).map(|_| None).collect());

    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                if idx >= sweep.grid.len() {
                    break;
                }
                let mut config = sweep.base.clone();
                config.stepsize = sweep.grid[idx];
                let outcome = execute(&config, base).and_then(|executed| {
                    let run_dir = out_dir.join(format!("run_{idx:03}"));
                    write_artifacts(&run_dir, &executed)?;
                    let fit = executed
                        .result
                        .rate_fit_dist
                        .as_ref()
                        .or(executed.result.rate_fit_grad.as_ref());
                    Ok(SummaryRow {
                        run: idx,
                        rule: config.stepsize,
                        cycles: executed.run.cycles_used,
                        final_grad_norm: executed.run.final_grad_norm,
                        rho_hat: fit.map(|f| f.rho_hat),
                        classification: fit
                            .map(|f| f.classification.clone())
                            .unwrap_or_else(|| "inconclusive".into()),
                    })
                });
                results.lock().unwrap()[idx] = Some(outcome);
            });
        }
    });

    let rows = results
        .into_inner()
        .unwrap()
        .into_iter()
        .enumerate()
        .map(|(idx, r)| r.unwrap_or_else(|| bail_missing(idx)))
        .collect::<anyhow::Result<Vec<_>>>()?;

    let tmp = out_dir.join("summary.csv.tmp");
    {
        let file = std::fs::File::create(&tmp)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(SUMMARY_HEADER)?;
        for row in &rows {
            w.write_record(row.record())?;
        }
        w.flush()?;
    }
    std::fs::rename(&tmp, out_dir.join("summary.csv"))?;
    Ok(rows)
}

fn bail_missing(idx: usize) -> anyhow::Result<SummaryRow> {
    Err(anyhow::anyhow!("sweep run {idx} produced no result"))
}
