//! On-disk formats: problem JSON (matrices row-major), the per-cycle trace
//! CSV, and the JSON report shapes for results, theory constants and
//! verification.

use anyhow::{bail, Context};
use inewt_core::diagnostics::{BoundReport, RateClass, RateFit};
use inewt_core::engine::{CycleScalars, RunResult, Termination};
use inewt_core::problems::{Component, NllsProblem, Problem, Residual};
use inewt_core::theory::TheoryReport;
use inewt_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::config::MaterializedProblem;

fn matrix_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|r| (0..a.ncols()).map(|c| a[(r, c)]).collect())
        .collect()
}

fn rows_matrix(rows: &[Vec<f64>]) -> anyhow::Result<Matrix> {
    let n = rows.len();
    if n == 0 {
        bail!("empty matrix");
    }
    if rows.iter().any(|r| r.len() != rows[0].len()) {
        bail!("ragged matrix rows");
    }
    let cols = rows[0].len();
    Ok(Matrix::from_fn(n, cols, |r, c| rows[r][c]))
}

/// One component of a finite-sum problem, matrices as row-major nested
/// arrays.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ComponentFile {
    Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default)]
        c0: f64,
    },
    Shifted {
        a: Vec<Vec<f64>>,
        center: Vec<f64>,
        #[serde(default)]
        logcosh_scale: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResidualFile {
    Affine {
        a: Vec<f64>,
        b: f64,
    },
    ShiftedTanh {
        a: Vec<f64>,
        w: Vec<f64>,
        beta: f64,
        root: Vec<f64>,
    },
}

/// Serialized problem instance; `kind` selects the solver family.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemFile {
    FiniteSum {
        n: usize,
        m: usize,
        c: f64,
        #[serde(rename = "C")]
        big_c: f64,
        #[serde(rename = "gradient_growth_M")]
        gradient_growth_m: Option<f64>,
        known_minimizer: Option<Vec<f64>>,
        #[serde(rename = "diameter_R")]
        diameter_r: Option<f64>,
        components: Vec<ComponentFile>,
    },
    Nlls {
        n: usize,
        m: usize,
        /// Upper bound on `‖∇gᵢ‖²`, the `C` of the acceptance formula.
        curvature_upper: f64,
        root: Option<Vec<f64>>,
        residuals: Vec<ResidualFile>,
    },
}

impl ProblemFile {
    pub fn from_core(p: &MaterializedProblem) -> Self {
        match p {
            MaterializedProblem::FiniteSum(p) => ProblemFile::FiniteSum {
                n: p.n,
                m: p.m(),
                c: p.eig_lower,
                big_c: p.eig_upper,
                gradient_growth_m: p.gradient_growth,
                known_minimizer: p.minimizer.as_ref().map(|v| v.iter().copied().collect()),
                diameter_r: p.diameter,
                components: p
                    .components
                    .iter()
                    .map(|comp| match comp {
                        Component::Quadratic { a, b, c0 } => ComponentFile::Quadratic {
                            a: matrix_rows(a),
                            b: b.iter().copied().collect(),
                            c0: *c0,
                        },
                        Component::Shifted {
                            a,
                            center,
                            logcosh_scale,
                        } => ComponentFile::Shifted {
                            a: matrix_rows(a),
                            center: center.iter().copied().collect(),
                            logcosh_scale: *logcosh_scale,
                        },
                    })
                    .collect(),
            },
            MaterializedProblem::Nlls(p) => ProblemFile::Nlls {
                n: p.n,
                m: p.m(),
                curvature_upper: p.curvature_upper,
                root: p.root.as_ref().map(|v| v.iter().copied().collect()),
                residuals: p
                    .residuals
                    .iter()
                    .map(|r| match r {
                        Residual::Affine { a, b } => ResidualFile::Affine {
                            a: a.iter().copied().collect(),
                            b: *b,
                        },
                        Residual::ShiftedTanh { a, w, beta, root } => ResidualFile::ShiftedTanh {
                            a: a.iter().copied().collect(),
                            w: w.iter().copied().collect(),
                            beta: *beta,
                            root: root.iter().copied().collect(),
                        },
                    })
                    .collect(),
            },
        }
    }

    /// Rebuild core problem data, re-validating the metadata invariants.
    pub fn into_core(self) -> anyhow::Result<MaterializedProblem> {
        match self {
            ProblemFile::FiniteSum {
                n,
                m,
                c,
                big_c,
                gradient_growth_m,
                known_minimizer,
                diameter_r,
                components,
            } => {
                if components.len() != m {
                    bail!("component count {} disagrees with m={m}", components.len());
                }
                let comps = components
                    .into_iter()
                    .map(|comp| {
                        Ok(match comp {
                            ComponentFile::Quadratic { a, b, c0 } => Component::Quadratic {
                                a: rows_matrix(&a)?,
                                b: Vector::from_vec(b),
                                c0,
                            },
                            ComponentFile::Shifted {
                                a,
                                center,
                                logcosh_scale,
                            } => Component::Shifted {
                                a: rows_matrix(&a)?,
                                center: Vector::from_vec(center),
                                logcosh_scale,
                            },
                        })
                    })
                    .collect::<anyhow::Result<Vec<_>>>()?;
                if comps.iter().any(|comp| comp.dim() != n) {
                    bail!("component dimension disagrees with n={n}");
                }
                let mut p = Problem::new(
                    comps,
                    c,
                    big_c,
                    gradient_growth_m,
                    known_minimizer.map(Vector::from_vec),
                )?;
                p.diameter = diameter_r;
                Ok(MaterializedProblem::FiniteSum(p))
            }
            ProblemFile::Nlls {
                n,
                m,
                curvature_upper,
                root,
                residuals,
            } => {
                if residuals.len() != m {
                    bail!("residual count {} disagrees with m={m}", residuals.len());
                }
                if curvature_upper <= 0.0 {
                    bail!("need curvature_upper > 0");
                }
                let residuals = residuals
                    .into_iter()
                    .map(|r| match r {
                        ResidualFile::Affine { a, b } => Residual::Affine {
                            a: Vector::from_vec(a),
                            b,
                        },
                        ResidualFile::ShiftedTanh { a, w, beta, root } => Residual::ShiftedTanh {
                            a: Vector::from_vec(a),
                            w: Vector::from_vec(w),
                            beta,
                            root: Vector::from_vec(root),
                        },
                    })
                    .collect::<Vec<_>>();
                if residuals.iter().any(|r| r.dim() != n) {
                    bail!("residual dimension disagrees with n={n}");
                }
                Ok(MaterializedProblem::Nlls(NllsProblem {
                    residuals,
                    n,
                    root: root.map(Vector::from_vec),
                    curvature_upper,
                }))
            }
        }
    }
}

/// Fixed trace CSV column order.
pub const TRACE_HEADER: [&str; 9] = [
    "k",
    "alpha",
    "gamma",
    "grad_norm",
    "dist_to_opt",
    "e_norm",
    "ehat_norm",
    "lambda_min_H",
    "lambda_max_H",
];

/// One trace CSV row; optional columns are empty fields on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub grad_norm: f64,
    pub dist_to_opt: Option<f64>,
    pub e_norm: f64,
    pub ehat_norm: Option<f64>,
    pub lambda_min_h: f64,
    pub lambda_max_h: f64,
}

impl TraceRow {
    pub fn from_scalars(s: &CycleScalars) -> Self {
        TraceRow {
            k: s.k,
            alpha: s.alpha,
            gamma: s.gamma,
            grad_norm: s.full_grad_norm,
            dist_to_opt: s.dist_to_opt,
            e_norm: s.e_norm,
            ehat_norm: s.ehat_norm,
            lambda_min_h: s.h_eig_min,
            lambda_max_h: s.h_eig_max,
        }
    }
}

fn opt_field(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(writer: W, rows: &[TraceRow]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRACE_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.alpha.to_string(),
            r.gamma.to_string(),
            r.grad_norm.to_string(),
            opt_field(r.dist_to_opt),
            r.e_norm.to_string(),
            opt_field(r.ehat_norm),
            r.lambda_min_h.to_string(),
            r.lambda_max_h.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv(path: &Path) -> anyhow::Result<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening trace {}", path.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        bail!("unexpected trace header: {headers:?}");
    }
    let parse = |field: &str, what: &str| -> anyhow::Result<f64> {
        field
            .parse::<f64>()
            .with_context(|| format!("bad {what} field {field:?}"))
    };
    let parse_opt = |field: &str, what: &str| -> anyhow::Result<Option<f64>> {
        if field.is_empty() {
            Ok(None)
        } else {
            parse(field, what).map(Some)
        }
    };
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(TraceRow {
            k: record[0].parse().context("bad k field")?,
            alpha: parse(&record[1], "alpha")?,
            gamma: parse(&record[2], "gamma")?,
            grad_norm: parse(&record[3], "grad_norm")?,
            dist_to_opt: parse_opt(&record[4], "dist_to_opt")?,
            e_norm: parse(&record[5], "e_norm")?,
            ehat_norm: parse_opt(&record[6], "ehat_norm")?,
            lambda_min_h: parse(&record[7], "lambda_min_H")?,
            lambda_max_h: parse(&record[8], "lambda_max_H")?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateFitFile {
    pub window_fraction: f64,
    pub rho_hat: f64,
    pub r_squared: f64,
    pub ratio_tail: f64,
    pub classification: String,
    pub early_exact: bool,
    pub points_used: usize,
}

pub fn class_name(class: RateClass) -> &'static str {
    match class {
        RateClass::Linear => "linear",
        RateClass::Sublinear => "sublinear",
        RateClass::Inconclusive => "inconclusive",
    }
}

impl RateFitFile {
    pub fn from_core(fit: &RateFit) -> Self {
        RateFitFile {
            window_fraction: fit.window_fraction,
            rho_hat: fit.rho_hat,
            r_squared: fit.r_squared,
            ratio_tail: fit.ratio_tail,
            classification: class_name(fit.classification).into(),
            early_exact: fit.early_exact,
            points_used: fit.points_used,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BoundReportFile {
    pub bound_name: String,
    pub worst_margin: f64,
    pub violated: bool,
    pub cycles_checked: usize,
    pub skipped: Option<String>,
    pub per_cycle_margins: Vec<f64>,
}

impl BoundReportFile {
    pub fn from_core(report: &BoundReport) -> Self {
        BoundReportFile {
            bound_name: report.bound_name.clone(),
            worst_margin: report.worst_margin,
            violated: report.violated,
            cycles_checked: report.cycles_checked,
            skipped: report.skipped.clone(),
            per_cycle_margins: report.per_cycle_margins.clone(),
        }
    }
}

pub fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxCycles => "max_cycles",
        Termination::StepsizeFailure => "stepsize_failure",
    }
}

/// Result JSON written next to each trace.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResultFile {
    pub solver: String,
    pub rule: String,
    pub termination: String,
    pub failure: Option<String>,
    pub cycles_used: usize,
    pub final_grad_norm: f64,
    pub final_x: Vec<f64>,
    #[serde(rename = "observed_diameter_R")]
    pub observed_diameter_r: f64,
    /// Tail rate fit of the distance-to-optimum series, when available.
    pub rate_fit_dist: Option<RateFitFile>,
    /// Tail rate fit of the gradient-norm series.
    pub rate_fit_grad: Option<RateFitFile>,
}

impl ResultFile {
    pub fn from_run(run: &RunResult, solver: &str, rule: &str) -> Self {
        let fit_of = |series: Option<Vec<f64>>| {
            series
                .filter(|s| s.len() >= 20 || s.contains(&0.0))
                .and_then(|s| inewt_core::diagnostics::fit_rate(&s, 0.5).ok())
                .map(|fit| RateFitFile::from_core(&fit))
        };
        ResultFile {
            solver: solver.into(),
            rule: rule.into(),
            termination: termination_name(run.termination).into(),
            failure: run.failure.as_ref().map(|e| e.to_string()),
            cycles_used: run.cycles_used,
            final_grad_norm: run.final_grad_norm,
            final_x: run.final_x.iter().copied().collect(),
            observed_diameter_r: run.observed_diameter,
            rate_fit_dist: fit_of(run.dist_series()),
            rate_fit_grad: fit_of(Some(run.grad_norm_series())),
        }
    }
}

/// Theory report JSON, field names matching the constants they carry.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TheoryFile {
    pub m: usize,
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    #[serde(rename = "M")]
    pub gradient_growth_m: Option<f64>,
    #[serde(rename = "Q")]
    pub q: f64,
    pub eta: f64,
    pub nu: f64,
    pub phi: f64,
    #[serde(rename = "B_sequence")]
    pub b_sequence: Vec<f64>,
    #[serde(rename = "B_total")]
    pub b_total: f64,
    #[serde(rename = "B_min")]
    pub b_min: f64,
    #[serde(rename = "B_max")]
    pub b_max: f64,
    pub kappa: Option<f64>,
    pub r_nu: Option<f64>,
    pub r_hat_nu: Option<f64>,
    pub phi_bar_nu: f64,
    pub phi_bar_bracketed: bool,
    pub eta_threshold: f64,
}

impl TheoryFile {
    pub fn from_core(report: &TheoryReport) -> Self {
        TheoryFile {
            m: report.constants.m,
            c: report.constants.eig_lower,
            big_c: report.constants.eig_upper,
            gradient_growth_m: report.constants.gradient_growth,
            q: report.constants.q(),
            eta: report.eta,
            nu: report.nu,
            phi: report.phi,
            b_sequence: report.b_values.clone(),
            b_total: report.b_total,
            b_min: report.b_min,
            b_max: report.b_max,
            kappa: report.kappa,
            r_nu: report.r_nu,
            r_hat_nu: report.r_hat_nu,
            phi_bar_nu: report.phi_bar_nu,
            phi_bar_bracketed: report.phi_bar_bracketed,
            eta_threshold: report.eta_threshold,
        }
    }
}

/// Verification report over one trace CSV + problem JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerifyFile {
    pub bounds: Vec<BoundReportFile>,
    pub rate_fits: Vec<NamedRateFit>,
    pub any_violated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NamedRateFit {
    pub series: String,
    pub fit: RateFitFile,
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
