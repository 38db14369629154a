//! Executable checks of the convergence theory against recorded runs, and
//! empirical rate classification.
//!
//! Each `check_*` turns one proved bound into a margin report over a run's
//! traces: margins are `bound − observed`, so every margin should stay
//! nonnegative up to floating-point slack. The checks that need per-inner
//! data (inner points, per-component gradient norms, per-step eigenvalue
//! extremes) consume the run's detailed prefix; the others run over the
//! scalar records of every cycle.
//!
//! [`fit_rate`] turns "linearly convergent" into a testable predicate: fit
//! `log dₖ` against `k` over a tail window and classify by the fitted
//! per-cycle ratio, with a tail-ratio fallback that flags sublinear decay
//! (per-step contraction drifting to 1).

use alloc::string::String;
use alloc::vec::Vec;

use crate::engine::RunResult;
use crate::linalg::real;
use crate::problems::{ComponentOracle, Problem};
use crate::theory::{self, ProblemConstants};
use crate::{Error, Result};

/// Additive slack, on the scale of each bound, absorbing floating-point
/// noise in checks of inequalities that are exact in real arithmetic.
pub const BOUND_SLACK: f64 = 1e-9;

/// Rate-classification margin: `linear` needs a fitted ratio at most
/// `1 − DELTA_RATE`, `sublinear` a tail ratio at least that.
pub const DELTA_RATE: f64 = 0.02;

/// Minimum fit quality for the linear classification.
pub const R2_THRESHOLD: f64 = 0.95;

/// Margin report for one bound over one run.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub bound_name: String,
    /// Worst `bound − observed` within each checked cycle, in cycle order.
    pub per_cycle_margins: Vec<f64>,
    pub worst_margin: f64,
    pub violated: bool,
    pub cycles_checked: usize,
    /// Reason the check did not apply, when it was skipped.
    pub skipped: Option<String>,
}

struct MarginAccumulator {
    name: &'static str,
    margins: Vec<f64>,
    current: Option<f64>,
    worst: f64,
    violated: bool,
}

impl MarginAccumulator {
    fn new(name: &'static str) -> Self {
        MarginAccumulator {
            name,
            margins: Vec::new(),
            current: None,
            worst: f64::INFINITY,
            violated: false,
        }
    }

    /// Record one `bound − observed` margin within the current cycle.
    fn record(&mut self, bound: f64, observed: f64) {
        let margin = bound - observed;
        if margin < -BOUND_SLACK * bound.abs().max(1.0) {
            self.violated = true;
        }
        self.worst = self.worst.min(margin);
        self.current = Some(self.current.map_or(margin, |c: f64| c.min(margin)));
    }

    fn end_cycle(&mut self) {
        if let Some(margin) = self.current.take() {
            self.margins.push(margin);
        }
    }

    fn finish(mut self) -> BoundReport {
        self.end_cycle();
        let cycles_checked = self.margins.len();
        BoundReport {
            bound_name: self.name.into(),
            worst_margin: if cycles_checked == 0 { 0.0 } else { self.worst },
            per_cycle_margins: self.margins,
            violated: self.violated,
            cycles_checked,
            skipped: None,
        }
    }

    fn skipped(name: &'static str, reason: impl Into<String>) -> BoundReport {
        BoundReport {
            bound_name: name.into(),
            per_cycle_margins: Vec::new(),
            worst_margin: 0.0,
            violated: false,
            cycles_checked: 0,
            skipped: Some(reason.into()),
        }
    }
}

/// Growth envelope of the accumulated matrices:
/// `c((k−1)m+i) ≤ λ_min(Hᵢᵏ)`, `λ_max(Hᵢᵏ) ≤ Cmk`, and for `k ≥ 2` the
/// floor `λ_min ≥ ckm/2`. Newton-path runs only (the Gauss-Newton
/// surrogate has no curvature floor).
///
/// Per-inner-step extremes are checked on the detailed prefix; the end-of-
/// cycle extremes (`i = m`) are checked on every cycle.
pub fn check_hessian_growth(run: &RunResult, consts: &ProblemConstants) -> BoundReport {
    let mut acc = MarginAccumulator::new("hessian_growth");
    let m = consts.m as f64;
    let c = consts.eig_lower;
    let cc = consts.eig_upper;
    let mut details = run.details.iter().peekable();
    for s in &run.scalars {
        let k = s.k as f64;
        // i = m bounds from the always-present scalars.
        acc.record(s.h_eig_min, c * k * m);
        acc.record(cc * m * k, s.h_eig_max);
        if let Some(t) = details.peek() {
            if t.k == s.k {
                for (idx, &(lo, hi)) in t.inner_h_eigbounds.iter().enumerate() {
                    let i = (idx + 1) as f64;
                    acc.record(lo, c * ((k - 1.0) * m + i));
                    acc.record(cc * m * k, hi);
                    if s.k >= 2 {
                        acc.record(lo, c * k * m / 2.0);
                    }
                }
                details.next();
            }
        }
        acc.end_cycle();
    }
    acc.finish()
}

/// Normalized acceptance stepsize cap: `γ*ᵏ = α*ᵏ/k ≤ φ = 2(1−η)Q` on
/// every cycle that recorded `α*ᵏ`.
pub fn check_gamma_star(run: &RunResult, eta: f64, consts: &ProblemConstants) -> Result<BoundReport> {
    let phi = theory::phi(eta, consts.q())?;
    let mut acc = MarginAccumulator::new("gamma_star_cap");
    for s in &run.scalars {
        if let Some(star) = s.alpha_star {
            acc.record(phi, star / s.k as f64);
            acc.end_cycle();
        }
    }
    if acc.margins.is_empty() && acc.current.is_none() {
        return Ok(MarginAccumulator::skipped(
            "gamma_star_cap",
            "no cycle recorded alpha_star",
        ));
    }
    Ok(acc.finish())
}

/// Inner-iterate drift bound under gradient growth:
/// `‖xᵢᵏ − x₁ᵏ‖ ≤ γᵏ Bᵢᵏ(φ) ‖∇f(x₁ᵏ)‖` for `k ≥ 2`, with the
/// finite-`k` recursion factor `1 + (2Q/m)max(1/k, φ)`.
///
/// `phi` must match the stepsize rule that produced the run (`2(1−η)Q`
/// for the acceptance-window rules; `0` is valid for the unit rule, whose
/// normalized stepsize is exactly `1/k`).
pub fn check_inner_distance(
    run: &RunResult,
    consts: &ProblemConstants,
    phi: f64,
) -> Result<BoundReport> {
    if consts.gradient_growth.is_none() {
        return Ok(MarginAccumulator::skipped(
            "inner_distance",
            "gradient growth constant unset; bound does not apply",
        ));
    }
    let mut acc = MarginAccumulator::new("inner_distance");
    for t in &run.details {
        if t.k < 2 {
            continue;
        }
        let bs = theory::b_sequence_k(phi, consts, t.k)?;
        for (idx, xi) in t.inner_points.iter().enumerate() {
            // inner_points[idx] is x_{idx+2}, paired with B_{idx+2}.
            let bound = t.gamma * bs.values[idx + 1] * t.full_grad_norm;
            acc.record(bound, (xi - &t.start).norm());
        }
        acc.end_cycle();
    }
    if acc.margins.is_empty() {
        return Ok(MarginAccumulator::skipped(
            "inner_distance",
            "no detailed cycles with k >= 2",
        ));
    }
    Ok(acc.finish())
}

/// Per-component gradient drift over one cycle:
/// `δⱼᵏ = ‖∇fⱼ(xⱼᵏ) − ∇fⱼ(x₁ᵏ)‖ ≤ rᵏ Σ_{i<j} (1+rᵏ)^{j−1−i} ‖∇fᵢ(x₁ᵏ)‖`
/// with `rᵏ = (2Q/m)γᵏ`, for `k ≥ 2` and any stepsize.
pub fn check_delta_bound(run: &RunResult, problem: &Problem) -> BoundReport {
    let consts = ProblemConstants::from_problem(problem);
    let m = consts.m;
    let mut acc = MarginAccumulator::new("gradient_delta");
    for t in &run.details {
        if t.k < 2 {
            continue;
        }
        let r = 2.0 * consts.q() / m as f64 * t.gamma;
        for j in 1..m {
            // x_{j+1} in cycle coordinates; components are zero-based.
            let xj = &t.inner_points[j - 1];
            let delta = (problem.components[j].gradient(xj)
                - problem.components[j].gradient(&t.start))
            .norm();
            let mut bound = 0.0;
            for i in 0..j {
                bound += real::exp((j - 1 - i) as f64 * real::ln(1.0 + r))
                    * t.grad_norms_at_start[i];
            }
            acc.record(r * bound, delta);
        }
        acc.end_cycle();
    }
    if acc.margins.is_empty() {
        return MarginAccumulator::skipped("gradient_delta", "no detailed cycles with k >= 2");
    }
    acc.finish()
}

/// Gradient-error envelope for `k ≥ 2`, any stepsize:
/// `‖eᵏ‖ ≤ (rᵏ + 2Q/(km)) Σ_{j=2..m} Σ_{i<j} (1+rᵏ)^{j−1−i} ‖∇fᵢ(x₁ᵏ)‖`.
pub fn check_gradient_error_bound(run: &RunResult, consts: &ProblemConstants) -> BoundReport {
    let m = consts.m;
    let mut acc = MarginAccumulator::new("gradient_error");
    for t in &run.details {
        if t.k < 2 {
            continue;
        }
        let r = 2.0 * consts.q() / m as f64 * t.gamma;
        let mut sum = 0.0;
        for j in 1..m {
            for i in 0..j {
                sum += real::exp((j - 1 - i) as f64 * real::ln(1.0 + r))
                    * t.grad_norms_at_start[i];
            }
        }
        let bound = (r + 2.0 * consts.q() / (t.k as f64 * m as f64)) * sum;
        acc.record(bound, t.grad_error.norm());
        acc.end_cycle();
    }
    if acc.margins.is_empty() {
        return MarginAccumulator::skipped("gradient_error", "no detailed cycles with k >= 2");
    }
    acc.finish()
}

/// Averaged-curvature error sanity: `‖êᵏ‖ ≤ (C−c)m` on every cycle, and on
/// convergent runs the last-quartile mean must fall to at most half the
/// first-quartile mean (the asymptotically-exact-curvature property). The
/// decay margin is appended as the final entry of the report.
pub fn check_hessian_error_decay(run: &RunResult, consts: &ProblemConstants) -> BoundReport {
    let series: Vec<f64> = run.scalars.iter().filter_map(|s| s.ehat_norm).collect();
    if series.is_empty() {
        return MarginAccumulator::skipped(
            "hessian_error_decay",
            "averaged-curvature error not recorded (light trace mode)",
        );
    }
    let mut acc = MarginAccumulator::new("hessian_error_decay");
    let trivial = (consts.eig_upper - consts.eig_lower) * consts.m as f64;
    for &ehat in &series {
        acc.record(trivial, ehat);
        acc.end_cycle();
    }
    if run.termination == crate::engine::Termination::Converged && series.len() >= 4 {
        let quarter = series.len() / 4;
        let first: f64 = series[..quarter].iter().sum::<f64>() / quarter as f64;
        let last: f64 = series[series.len() - quarter..].iter().sum::<f64>() / quarter as f64;
        acc.record(0.5 * first, last);
        acc.end_cycle();
    }
    acc.finish()
}

/// Closed-form gradient error of the two-component oscillation example at
/// cycle `k`, stepsize `α`, cycle-start point `x`:
/// `eᵏ = −(γ/2 − 1/(2k)) · 2k/(2k−1) · (1000 + 2εx)`, `γ = α/k`.
pub fn example1_error_oracle(k: usize, alpha: f64, x: f64, epsilon: f64) -> f64 {
    let kf = k as f64;
    let gamma = alpha / kf;
    -(gamma / 2.0 - 1.0 / (2.0 * kf)) * (2.0 * kf / (2.0 * kf - 1.0)) * (1000.0 + 2.0 * epsilon * x)
}

/// Empirical convergence-rate classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateClass {
    /// Geometric decay: fitted ratio `ρ̂ ≤ 1 − DELTA_RATE` with
    /// `R² ≥ R2_THRESHOLD`.
    Linear,
    /// Per-cycle contraction drifting to 1: tail ratio `≥ 1 − DELTA_RATE`.
    Sublinear,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub window_fraction: f64,
    /// `exp(slope)` of the least-squares line through `(k, log dₖ)` over
    /// the tail window.
    pub rho_hat: f64,
    pub r_squared: f64,
    /// Geometric mean of `d_{k+1}/d_k` over the last tenth of the series.
    pub ratio_tail: f64,
    pub classification: RateClass,
    /// The series hit exactly zero and was truncated there.
    pub early_exact: bool,
    pub points_used: usize,
}

/// Fit a geometric rate to a positive decay series (distances to optimum
/// or gradient norms, one entry per cycle).
///
/// A series that reaches exactly `0` is truncated at the first zero; if
/// fewer than 20 points remain the fit reports early exact convergence
/// and classifies as linear outright.
pub fn fit_rate(series: &[f64], window_fraction: f64) -> Result<RateFit> {
    if !(window_fraction > 0.0 && window_fraction <= 1.0) {
        return Err(Error::invalid("need 0 < window_fraction <= 1"));
    }
    let cut = series.iter().position(|&v| v == 0.0);
    let (data, early_exact) = match cut {
        Some(i) => (&series[..i], true),
        None => (series, false),
    };
    if data.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("series entries must be finite and positive"));
    }
    if data.len() < 20 {
        if early_exact {
            return Ok(RateFit {
                window_fraction,
                rho_hat: 0.0,
                r_squared: 1.0,
                ratio_tail: 0.0,
                classification: RateClass::Linear,
                early_exact: true,
                points_used: data.len(),
            });
        }
        return Err(Error::invalid("need a series of at least 20 positive entries"));
    }

    let len = data.len();
    let window = (libm::ceil(len as f64 * window_fraction) as usize).clamp(2, len);
    let tail = &data[len - window..];
    let logs: Vec<f64> = tail.iter().map(|&v| real::ln(v)).collect();
    let nf = window as f64;
    let mean_x = (window - 1) as f64 / 2.0;
    let mean_y = logs.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (i, &y) in logs.iter().enumerate() {
        let dx = i as f64 - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    let rho_hat = real::exp(slope);

    let ratio_window = ((len as f64 * 0.1) as usize).max(1).min(len - 1);
    let ratio_tail = real::exp(
        (real::ln(data[len - 1]) - real::ln(data[len - 1 - ratio_window])) / ratio_window as f64,
    );

    let classification = if rho_hat <= 1.0 - DELTA_RATE && r_squared >= R2_THRESHOLD {
        RateClass::Linear
    } else if ratio_tail >= 1.0 - DELTA_RATE {
        RateClass::Sublinear
    } else {
        RateClass::Inconclusive
    };
    Ok(RateFit {
        window_fraction,
        rho_hat,
        r_squared,
        ratio_tail,
        classification,
        early_exact,
        points_used: len,
    })
}
