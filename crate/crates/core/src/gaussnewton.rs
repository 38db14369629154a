//! Incremental Gauss-Newton with the shared stepsize machinery (EKF-S),
//! for nonlinear least squares `f(x) = ½ Σᵢ gᵢ(x)²`.
//!
//! Structurally this is the same cycle engine with two substitutions per
//! component: the direction uses the true gradient `∇fᵢ = gᵢ∇gᵢ`, while
//! the curvature folded into `H` is the rank-one surrogate `∇gᵢ∇gᵢᵀ`
//! (first-order information only). The per-cycle perturbed-Newton
//! decomposition, the acceptance formula `α*ᵏ` (with `C` taken as the
//! problem's bound on `‖∇gᵢ‖²`) and every stepsize rule carry over
//! unchanged.
//!
//! Rank-one accumulation starts singular for `n > 1`, so the run seeds
//! `H₀¹ = δI` with a small data-scaled ridge (see [`default_ridge`]);
//! `δ = 0` is fine for `n = 1`. The surrogate update is rank one, so an
//! incremental Cholesky update would apply; at these sizes the engine's
//! refactorization is used instead.
//!
//! The local linear-convergence guarantee for this path is existence-only:
//! it asserts *some* growth constant and stepsize-control threshold work,
//! without formulas. The Newton-path evaluators in [`crate::theory`] can
//! be fed surrogate curvature bands `[c̃, C̃]` as heuristic stand-ins, but
//! nothing here certifies those values.

use crate::engine::{
    self, IncrementalOracle, InnerState, RunConfig, RunResult,
};
use crate::linalg::{Matrix, SpdFactor, Vector};
use crate::problems::{NllsProblem, Residual};
use crate::stepsize::StepsizeRule;
use crate::{Error, Result};

/// Mid-cycle Gauss-Newton state; same shape as the Newton path's state,
/// with `h` accumulating `Σ ∇g∇gᵀ` (plus the initial ridge).
pub type GnState = InnerState;

/// The engine-facing view of a least-squares instance.
pub struct GnOracle<'a> {
    pub nlls: &'a NllsProblem,
}

impl IncrementalOracle for GnOracle<'_> {
    fn dim(&self) -> usize {
        self.nlls.n
    }
    fn num_components(&self) -> usize {
        self.nlls.m()
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        let r = &self.nlls.residuals[i];
        r.gradient(x) * r.value(x)
    }
    fn component_curvature(&self, i: usize, x: &Vector) -> Matrix {
        let j = self.nlls.residuals[i].gradient(x);
        &j * j.transpose()
    }
    fn curvature_upper(&self) -> Option<f64> {
        Some(self.nlls.curvature_upper)
    }
    fn minimizer(&self) -> Option<&Vector> {
        self.nlls.root.as_ref()
    }
}

/// One Gauss-Newton inner update:
/// `H' = H + ∇g(x)∇g(x)ᵀ`, `x' = x − α (H')⁻¹ g(x)∇g(x)`.
pub fn gn_inner_update(state: &GnState, residual: &Residual, alpha: f64) -> Result<GnState> {
    if alpha <= 0.0 {
        return Err(Error::invalid("need alpha > 0"));
    }
    let jac = residual.gradient(&state.x);
    let h = &state.h + &jac * jac.transpose();
    let factor = SpdFactor::new(h.clone()).ok_or(Error::NotPositiveDefinite {
        k: state.k,
        i: state.i + 1,
    })?;
    let g = jac * residual.value(&state.x);
    let x = &state.x - factor.solve(&g) * alpha;
    Ok(GnState {
        k: state.k,
        i: state.i + 1,
        x,
        h,
    })
}

/// Data-scaled default ridge `δ = 1e−8·(1 + mean ‖∇gᵢ(x₀)‖²)`; keeps the
/// rank-one accumulation positive definite with negligible bias.
pub fn default_ridge(nlls: &NllsProblem, x0: &Vector) -> f64 {
    let m = nlls.m() as f64;
    let mean_sq = nlls
        .residuals
        .iter()
        .map(|r| r.gradient(x0).norm_squared())
        .sum::<f64>()
        / m;
    1e-8 * (1.0 + mean_sq)
}

/// Run the EKF-S loop: the engine's cycle/termination structure with the
/// Gauss-Newton oracle and a ridged initial matrix.
///
/// `ridge` overrides the default; pass `Some(0.0)` only when the first
/// curvature matrix alone is invertible (e.g. `n = 1`).
pub fn run_ekfs(
    nlls: &NllsProblem,
    rule: StepsizeRule,
    config: &RunConfig,
    ridge: Option<f64>,
) -> Result<RunResult> {
    let oracle = GnOracle { nlls };
    let x0 = config
        .start
        .clone()
        .unwrap_or_else(|| Vector::from_element(nlls.n, 1.0));
    let delta = ridge.unwrap_or_else(|| default_ridge(nlls, &x0));
    if delta < 0.0 {
        return Err(Error::invalid("need ridge >= 0"));
    }
    let mut cfg = config.clone();
    cfg.initial_h = Some(Matrix::identity(nlls.n, nlls.n) * delta);
    engine::run_with_rule(&oracle, rule, &cfg)
}
