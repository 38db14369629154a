//! Experiment configuration: JSON-declared problem, solver, stepsize rule
//! and run parameters.

use anyhow::{bail, Context};
use inewt_core::engine::{RunConfig, TraceMode};
use inewt_core::problems::{
    make_example1, make_nlls, make_nlls_nonlinear, make_quadratic_sum,
    make_zero_residual_problem, NllsProblem, Problem,
};
use inewt_core::stepsize::StepsizeRule;
use inewt_core::Vector;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::formats::ProblemFile;

/// Generated problem family plus its parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    QuadraticSum {
        seed: u64,
        n: usize,
        m: usize,
        condition_target: f64,
    },
    ZeroResidual {
        seed: u64,
        n: usize,
        m: usize,
        #[serde(default)]
        nonquadratic: bool,
    },
    Example1 {
        epsilon: f64,
    },
    Nlls {
        seed: u64,
        n: usize,
        m: usize,
        #[serde(default)]
        zero_residual: bool,
        #[serde(default)]
        nonlinear: bool,
    },
}

impl ProblemSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ProblemSpec::QuadraticSum { seed: s, .. }
            | ProblemSpec::ZeroResidual { seed: s, .. }
            | ProblemSpec::Nlls { seed: s, .. } => *s = seed,
            ProblemSpec::Example1 { .. } => {}
        }
        self
    }

    pub fn materialize(&self) -> anyhow::Result<MaterializedProblem> {
        Ok(match *self {
            ProblemSpec::QuadraticSum {
                seed,
                n,
                m,
                condition_target,
            } => MaterializedProblem::FiniteSum(make_quadratic_sum(seed, n, m, condition_target)?),
            ProblemSpec::ZeroResidual {
                seed,
                n,
                m,
                nonquadratic,
            } => {
                MaterializedProblem::FiniteSum(make_zero_residual_problem(seed, n, m, nonquadratic)?)
            }
            ProblemSpec::Example1 { epsilon } => {
                MaterializedProblem::FiniteSum(make_example1(epsilon)?)
            }
            ProblemSpec::Nlls {
                seed,
                n,
                m,
                zero_residual,
                nonlinear,
            } => MaterializedProblem::Nlls(if nonlinear {
                if !zero_residual {
                    bail!("nonlinear least-squares instances are zero-residual by construction");
                }
                make_nlls_nonlinear(seed, n, m)?
            } else {
                make_nlls(seed, n, m, zero_residual)?
            }),
        })
    }
}

/// A problem either generated in place or loaded from a problem JSON file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProblemRef {
    Path { path: String },
    Spec(ProblemSpec),
}

#[derive(Debug, Clone)]
pub enum MaterializedProblem {
    FiniteSum(Problem),
    Nlls(NllsProblem),
}

impl ProblemRef {
    /// Resolve to concrete problem data. Relative paths resolve against
    /// `base` (the config file's directory).
    pub fn materialize(&self, base: Option<&Path>) -> anyhow::Result<MaterializedProblem> {
        match self {
            ProblemRef::Spec(spec) => spec.materialize(),
            ProblemRef::Path { path } => {
                let full = match base {
                    Some(dir) if Path::new(path).is_relative() => dir.join(path),
                    _ => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&full)
                    .with_context(|| format!("reading problem file {}", full.display()))?;
                let file: ProblemFile = serde_json::from_str(&text)
                    .with_context(|| format!("parsing problem file {}", full.display()))?;
                file.into_core()
            }
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            ProblemRef::Spec(spec) => ProblemRef::Spec(spec.with_seed(seed)),
            other => other,
        }
    }
}

/// Stepsize rule selection, mirroring the library's rule set.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepsizeSpec {
    Unit,
    Constant {
        gamma: f64,
    },
    Bisection {
        eta: f64,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_initial_alpha")]
        initial_alpha: f64,
    },
    LinearGrowth {
        eta_hat: f64,
        nu_hat: f64,
        kappa_hat: f64,
    },
}

fn default_tau() -> f64 {
    0.5
}

fn default_initial_alpha() -> f64 {
    1.0
}

impl StepsizeSpec {
    pub fn to_rule(self) -> StepsizeRule {
        match self {
            StepsizeSpec::Unit => StepsizeRule::Unit,
            StepsizeSpec::Constant { gamma } => StepsizeRule::ConstantNormalized { gamma },
            StepsizeSpec::Bisection {
                eta,
                tau,
                initial_alpha,
            } => StepsizeRule::VariableBisection {
                eta,
                tau,
                initial_alpha,
            },
            StepsizeSpec::LinearGrowth {
                eta_hat,
                nu_hat,
                kappa_hat,
            } => StepsizeRule::LinearGrowth {
                eta_hat,
                nu_hat,
                kappa_hat,
            },
        }
    }

    pub fn rule_name(&self) -> &'static str {
        match self {
            StepsizeSpec::Unit => "unit",
            StepsizeSpec::Constant { .. } => "constant",
            StepsizeSpec::Bisection { .. } => "bisection",
            StepsizeSpec::LinearGrowth { .. } => "linear_growth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    In,
    Ekfs,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceModeSpec {
    Light,
    #[default]
    Full,
}

/// One experiment: problem, solver, stepsize rule, run parameters.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemRef,
    pub solver: Solver,
    pub stepsize: StepsizeSpec,
    pub max_cycles: usize,
    pub grad_tolerance: f64,
    #[serde(default)]
    pub trace_mode: TraceModeSpec,
    /// Detailed-trace cap for full mode; library default when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Vec<f64>>,
    /// Initial ridge for the Gauss-Newton accumulation (ekfs only);
    /// data-scaled default when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
}

impl ExperimentConfig {
    pub fn run_config(&self) -> RunConfig {
        let trace_mode = match self.trace_mode {
            TraceModeSpec::Light => TraceMode::Light,
            TraceModeSpec::Full => TraceMode::Full {
                detail_limit: self.detail_limit.unwrap_or(1000),
            },
        };
        RunConfig {
            max_cycles: self.max_cycles,
            grad_tolerance: self.grad_tolerance,
            trace_mode,
            start: self.start.as_ref().map(|v| Vector::from_vec(v.clone())),
            initial_h: None,
        }
    }
}

/// Constants fed to the theory report subcommand.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub m: usize,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub gradient_growth: Option<f64>,
    pub eta: f64,
    pub nu: f64,
}

/// Parameter sweep: a base experiment and one stepsize variant per run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub grid: Vec<StepsizeSpec>,
}

pub fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}
