//! The incremental Newton cycle engine.
//!
//! One *cycle* `k` sweeps the components in their fixed order. Inner step
//! `i` first folds the current component curvature into the accumulated
//! matrix and then takes the damped Newton step against it:
//!
//! ```text
//!     Hᵢᵏ   = Hᵢ₋₁ᵏ + ∇²fᵢ(xᵢᵏ)            (curvature folded in first)
//!     xᵢ₊₁ᵏ = xᵢᵏ − αᵏ (Hᵢᵏ)⁻¹ ∇fᵢ(xᵢᵏ)
//! ```
//!
//! `H` is never reset across cycles (`H₀¹ = 0`, `H₀ᵏ⁺¹ = Hₘᵏ`), so it grows
//! like `C·m·k`; each inner step refactorizes the small dense matrix.
//!
//! The per-cycle map is algebraically a perturbed Newton step
//!
//! ```text
//!     x₁ᵏ⁺¹ = x₁ᵏ − γᵏ H̄ₖ⁻¹ (∇f(x₁ᵏ) + eᵏ),   H̄ₖ = Hₘᵏ/k,  γᵏ = αᵏ/k,
//! ```
//!
//! with gradient error
//! `eᵏ = Σⱼ (∇fⱼ(xⱼᵏ) − ∇fⱼ(x₁ᵏ) + (1/αᵏ)∇²fⱼ(xⱼᵏ)(x₁ᵏ − xⱼᵏ))`; every
//! cycle records that decomposition, and [`outer_step_identity_check`]
//! verifies the rearrangement is exact on the recorded trace.
//!
//! If a curvature evaluation leaves the declared positive definite band the
//! factorization fails and the run aborts with the failing `(k, i)` rather
//! than regularizing.

use alloc::vec::Vec;

use crate::linalg::{sym_eig_bounds, sym_spectral_norm, Matrix, SpdFactor, Vector};
use crate::problems::{ComponentOracle, Problem};
use crate::stepsize::StepsizePolicy;
use crate::{Error, Result};

/// Component access as the engine consumes it: a gradient oracle plus a
/// symmetric curvature oracle with a declared eigenvalue band.
///
/// For the Newton path the curvature is the true component Hessian; the
/// Gauss-Newton path substitutes the rank-one surrogate `∇g∇gᵀ`. Any other
/// bounded symmetric approximation (quasi-Newton style) can be plugged in
/// the same way.
pub trait IncrementalOracle {
    fn dim(&self) -> usize;
    fn num_components(&self) -> usize;
    /// `∇fᵢ(x)` for the zero-based component index `i`.
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector;
    /// Symmetric matrix folded into `H` at inner step `i`.
    fn component_curvature(&self, i: usize, x: &Vector) -> Matrix;
    /// Upper bound on the curvature eigenvalues (the `C` consumed by the
    /// variable-stepsize acceptance formula), when the metadata declares one.
    fn curvature_upper(&self) -> Option<f64>;
    /// Exact minimizer when known, for distance-to-optimum reporting.
    fn minimizer(&self) -> Option<&Vector>;

    fn full_gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.dim());
        for i in 0..self.num_components() {
            g += self.component_gradient(i, x);
        }
        g
    }
}

impl IncrementalOracle for Problem {
    fn dim(&self) -> usize {
        self.n
    }
    fn num_components(&self) -> usize {
        self.m()
    }
    fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
        self.components[i].gradient(x)
    }
    fn component_curvature(&self, i: usize, x: &Vector) -> Matrix {
        self.components[i].hessian(x)
    }
    fn curvature_upper(&self) -> Option<f64> {
        Some(self.eig_upper)
    }
    fn minimizer(&self) -> Option<&Vector> {
        self.minimizer.as_ref()
    }
}

/// Mid-cycle state: `i` inner updates of cycle `k` have been applied.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerState {
    pub k: usize,
    pub i: usize,
    pub x: Vector,
    /// Accumulated curvature `Hᵢᵏ`; positive definite after the first inner
    /// update of the first cycle, never reset.
    pub h: Matrix,
}

impl InnerState {
    /// Fresh state for cycle 1: `H₀¹ = 0`.
    pub fn initial(x: Vector) -> Self {
        let n = x.len();
        InnerState {
            k: 1,
            i: 0,
            x,
            h: Matrix::zeros(n, n),
        }
    }
}

/// One inner update: fold in the component curvature, then solve.
pub fn inner_update<O: IncrementalOracle + ?Sized>(
    state: &InnerState,
    oracle: &O,
    alpha: f64,
) -> Result<InnerState> {
    if alpha <= 0.0 {
        return Err(Error::invalid("need alpha > 0"));
    }
    if state.i >= oracle.num_components() {
        return Err(Error::invalid("cycle already complete"));
    }
    let curv = oracle.component_curvature(state.i, &state.x);
    let h = &state.h + curv;
    let factor = SpdFactor::new(h.clone()).ok_or(Error::NotPositiveDefinite {
        k: state.k,
        i: state.i + 1,
    })?;
    let g = oracle.component_gradient(state.i, &state.x);
    let x = &state.x - factor.solve(&g) * alpha;
    Ok(InnerState {
        k: state.k,
        i: state.i + 1,
        x,
        h,
    })
}

/// Full record of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleTrace {
    pub k: usize,
    pub alpha: f64,
    /// Normalized stepsize `γᵏ = αᵏ/k`, the effective per-cycle stepsize.
    pub gamma: f64,
    /// `x₁ᵏ`.
    pub start: Vector,
    /// `x₂ᵏ … xₘᵏ` (length `m−1`).
    pub inner_points: Vec<Vector>,
    /// `x₁ᵏ⁺¹`.
    pub end: Vector,
    /// `(λ_min, λ_max)` of `Hᵢᵏ` per inner step; empty when the cycle was
    /// run without detail recording.
    pub inner_h_eigbounds: Vec<(f64, f64)>,
    /// Gradient error `eᵏ`.
    pub grad_error: Vector,
    /// `‖∇fᵢ(x₁ᵏ)‖` for `i = 1..m`.
    pub grad_norms_at_start: Vec<f64>,
    /// `‖∇f(x₁ᵏ)‖`.
    pub full_grad_norm: f64,
    /// `Hₘᵏ`, the accumulated matrix after the cycle.
    pub h_end: Matrix,
}

impl CycleTrace {
    /// The full inner sequence `x₁ᵏ, …, xₘᵏ, x₁ᵏ⁺¹`.
    pub fn points(&self) -> impl Iterator<Item = &Vector> {
        core::iter::once(&self.start)
            .chain(self.inner_points.iter())
            .chain(core::iter::once(&self.end))
    }

    pub fn m(&self) -> usize {
        self.inner_points.len() + 1
    }
}

/// Everything a stepsize policy needs to run trial cycles at the start of
/// cycle `k` and judge them.
pub struct CycleContext<'a, O: IncrementalOracle + ?Sized> {
    pub oracle: &'a O,
    pub k: usize,
    pub x_start: &'a Vector,
    pub h_in: &'a Matrix,
    /// `∇fᵢ(x₁ᵏ)` for all components, shared by every trial at this cycle.
    pub start_grads: &'a [Vector],
    /// Record per-inner-step eigenvalue extremes on produced traces.
    pub detail: bool,
}

impl<'a, O: IncrementalOracle + ?Sized> CycleContext<'a, O> {
    /// Execute one full cycle with stepsize `alpha` from this context's
    /// start state. Does not commit anything.
    pub fn run_trial(&self, alpha: f64) -> Result<CycleTrace> {
        cycle_inner(
            self.oracle,
            self.k,
            self.x_start,
            self.h_in,
            alpha,
            self.start_grads,
            self.detail,
        )
    }
}

fn cycle_inner<O: IncrementalOracle + ?Sized>(
    oracle: &O,
    k: usize,
    x_start: &Vector,
    h_in: &Matrix,
    alpha: f64,
    start_grads: &[Vector],
    detail: bool,
) -> Result<CycleTrace> {
    if alpha <= 0.0 {
        return Err(Error::invalid("need alpha > 0"));
    }
    let m = oracle.num_components();
    if start_grads.len() != m {
        return Err(Error::invalid("need one start gradient per component"));
    }
    let n = oracle.dim();
    let mut h = h_in.clone();
    let mut x = x_start.clone();
    let mut grad_error = Vector::zeros(n);
    let mut inner_points = Vec::with_capacity(m.saturating_sub(1));
    let mut eigbounds = Vec::with_capacity(if detail { m } else { 0 });
    for (j, start_grad) in start_grads.iter().enumerate() {
        let curv = oracle.component_curvature(j, &x);
        h += &curv;
        let factor = SpdFactor::new(h.clone()).ok_or(Error::NotPositiveDefinite { k, i: j + 1 })?;
        if detail {
            eigbounds.push(sym_eig_bounds(&h));
        }
        let g = oracle.component_gradient(j, &x);
        // eᵏ term j: ∇fⱼ(xⱼ) − ∇fⱼ(x₁) + (1/α)∇²fⱼ(xⱼ)(x₁ − xⱼ).
        grad_error += &g;
        grad_error -= start_grad;
        grad_error += curv * ((x_start - &x) / alpha);
        x -= factor.solve(&g) * alpha;
        if j + 1 < m {
            inner_points.push(x.clone());
        }
    }
    let mut full_grad = Vector::zeros(n);
    for g in start_grads {
        full_grad += g;
    }
    Ok(CycleTrace {
        k,
        alpha,
        gamma: alpha / k as f64,
        start: x_start.clone(),
        inner_points,
        end: x,
        inner_h_eigbounds: eigbounds,
        grad_error,
        grad_norms_at_start: start_grads.iter().map(|g| g.norm()).collect(),
        full_grad_norm: full_grad.norm(),
        h_end: h,
    })
}

/// Run one cycle of the method from `(x_start, h_in)` at cycle index `k`,
/// recording the complete trace.
pub fn run_cycle<O: IncrementalOracle + ?Sized>(
    x_start: &Vector,
    h_in: &Matrix,
    oracle: &O,
    alpha: f64,
    k: usize,
) -> Result<CycleTrace> {
    let start_grads: Vec<Vector> = (0..oracle.num_components())
        .map(|j| oracle.component_gradient(j, x_start))
        .collect();
    cycle_inner(oracle, k, x_start, h_in, alpha, &start_grads, true)
}

/// Closed-form evaluation of the same cycle: each iterate is rebuilt from
/// the aggregate
///
/// ```text
///     xᵢ₊₁ᵏ = x₁ᵏ − α (Hᵢᵏ)⁻¹ Σ_{j≤i} (∇fⱼ(xⱼᵏ) + (1/α)∇²fⱼ(xⱼᵏ)(x₁ᵏ − xⱼᵏ))
/// ```
///
/// while the inner points feeding the sums advance by the ordinary
/// recursion. Exact identity with [`run_cycle`]'s points in real
/// arithmetic, hence an independent oracle for it.
pub fn closed_form_cycle<O: IncrementalOracle + ?Sized>(
    x_start: &Vector,
    h_in: &Matrix,
    oracle: &O,
    alpha: f64,
    k: usize,
) -> Result<Vec<Vector>> {
    if alpha <= 0.0 {
        return Err(Error::invalid("need alpha > 0"));
    }
    let m = oracle.num_components();
    let n = oracle.dim();
    let mut h = h_in.clone();
    let mut x = x_start.clone();
    let mut aggregate = Vector::zeros(n);
    let mut out = Vec::with_capacity(m);
    for j in 0..m {
        let curv = oracle.component_curvature(j, &x);
        h += &curv;
        let factor = SpdFactor::new(h.clone()).ok_or(Error::NotPositiveDefinite { k, i: j + 1 })?;
        let g = oracle.component_gradient(j, &x);
        aggregate += &g;
        aggregate += curv * ((x_start - &x) / alpha);
        out.push(x_start - factor.solve(&aggregate) * alpha);
        x -= factor.solve(&g) * alpha;
    }
    Ok(out)
}

/// Gradient error `eᵏ` recomputed from a cycle's recorded points.
pub fn gradient_error<O: IncrementalOracle + ?Sized>(
    oracle: &O,
    x_start: &Vector,
    inner_points: &[Vector],
    alpha: f64,
) -> Result<Vector> {
    if alpha <= 0.0 {
        return Err(Error::invalid("need alpha > 0"));
    }
    let m = oracle.num_components();
    if inner_points.len() != m - 1 {
        return Err(Error::invalid("need the m-1 inner points of a full cycle"));
    }
    let n = oracle.dim();
    let mut e = Vector::zeros(n);
    for j in 0..m {
        let xj = if j == 0 { x_start } else { &inner_points[j - 1] };
        e += oracle.component_gradient(j, xj);
        e -= oracle.component_gradient(j, x_start);
        e += oracle.component_curvature(j, xj) * ((x_start - xj) / alpha);
    }
    Ok(e)
}

/// Residual of the exact perturbed-Newton rearrangement of one cycle:
///
/// ```text
///     ‖x₁ᵏ⁺¹ − (x₁ᵏ − γᵏ H̄ₖ⁻¹ (∇f(x₁ᵏ) + eᵏ))‖,    H̄ₖ = Hₘᵏ/k.
/// ```
///
/// Zero in real arithmetic; anything beyond rounding noise means the trace
/// and the decomposition disagree.
pub fn outer_step_identity_check<O: IncrementalOracle + ?Sized>(
    trace: &CycleTrace,
    oracle: &O,
) -> Result<f64> {
    let h_bar = &trace.h_end / trace.k as f64;
    let factor =
        SpdFactor::new(h_bar).ok_or(Error::invalid("averaged matrix not positive definite"))?;
    let rhs = oracle.full_gradient(&trace.start) + &trace.grad_error;
    let predicted = &trace.start - factor.solve(&rhs) * trace.gamma;
    Ok((&trace.end - predicted).norm())
}

/// Running sums behind the averaged-curvature error
/// `êᵏ = (S₁ − S₂)/k` with `S₁ = Hₘᵏ` and `S₂ = Σ_{i≤k} ∇²f(x₁ⁱ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianErrorAccumulators {
    pub s1: Matrix,
    pub s2: Matrix,
}

impl HessianErrorAccumulators {
    pub fn new(n: usize) -> Self {
        HessianErrorAccumulators {
            s1: Matrix::zeros(n, n),
            s2: Matrix::zeros(n, n),
        }
    }
}

/// `êᵏ` as a matrix together with its spectral norm.
pub fn hessian_error(accums: &HessianErrorAccumulators, k: usize) -> (Matrix, f64) {
    let ehat = (&accums.s1 - &accums.s2) / k as f64;
    let norm = sym_spectral_norm(&ehat);
    (ehat, norm)
}

/// How much per-cycle data a run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    /// Scalars only; no inner-point storage, no averaged-curvature error.
    Light,
    /// Full traces (inner points, per-step eigenvalue extremes) for cycles
    /// `k ≤ detail_limit`, scalars beyond that; maintains the `êᵏ`
    /// accumulators, which doubles the curvature evaluations per cycle.
    Full { detail_limit: usize },
}

impl TraceMode {
    /// Full detail for the first 10³ cycles, the default desk-scale setting.
    pub fn full() -> Self {
        TraceMode::Full { detail_limit: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub max_cycles: usize,
    pub grad_tolerance: f64,
    pub trace_mode: TraceMode,
    /// Starting point; all-ones when unset.
    pub start: Option<Vector>,
    /// Initial accumulated matrix `H₀¹`; zero when unset (the Newton
    /// convention). The Gauss-Newton path seeds a small ridge here.
    pub initial_h: Option<Matrix>,
}

impl RunConfig {
    pub fn new(max_cycles: usize, grad_tolerance: f64) -> Self {
        RunConfig {
            max_cycles,
            grad_tolerance,
            trace_mode: TraceMode::full(),
            start: None,
            initial_h: None,
        }
    }

    pub fn with_start(mut self, x: Vector) -> Self {
        self.start = Some(x);
        self
    }

    pub fn with_trace_mode(mut self, mode: TraceMode) -> Self {
        self.trace_mode = mode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Gradient norm reached the tolerance.
    Converged,
    /// Cycle budget exhausted first.
    MaxCycles,
    /// A trial cycle failed numerically; the run carries the partial trace
    /// and the failure in [`RunResult::failure`].
    StepsizeFailure,
}

/// Per-cycle scalar record, kept for every cycle of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleScalars {
    pub k: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// `α*ᵏ` computed from the accepted trial, for rules that evaluate it.
    pub alpha_star: Option<f64>,
    /// Trial cycles the stepsize rule ran at this `k`.
    pub trial_count: u32,
    /// `‖x₁ᵏ‖` at the cycle start.
    pub x_norm: f64,
    /// `‖∇f(x₁ᵏ)‖` at the cycle start.
    pub full_grad_norm: f64,
    /// `‖eᵏ‖`.
    pub e_norm: f64,
    /// `‖x₁ᵏ − x*‖` when the minimizer is known.
    pub dist_to_opt: Option<f64>,
    /// Extreme eigenvalues of `Hₘᵏ`.
    pub h_eig_min: f64,
    pub h_eig_max: f64,
    /// `‖êᵏ‖` when the averaged-curvature accumulators are maintained.
    pub ehat_norm: Option<f64>,
    /// Residual of the exact rearrangement identity for this cycle.
    pub eq_identity_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub scalars: Vec<CycleScalars>,
    /// Full traces for the detailed prefix of the run.
    pub details: Vec<CycleTrace>,
    pub final_x: Vector,
    pub final_grad_norm: f64,
    pub cycles_used: usize,
    pub termination: Termination,
    pub failure: Option<Error>,
    /// Diagonal of the bounding box of every point the run visited; an
    /// upper estimate of the iterate-set diameter.
    pub observed_diameter: f64,
}

impl RunResult {
    pub fn grad_norm_series(&self) -> Vec<f64> {
        self.scalars.iter().map(|s| s.full_grad_norm).collect()
    }

    /// Distance-to-optimum series, when the problem knows its minimizer.
    pub fn dist_series(&self) -> Option<Vec<f64>> {
        self.scalars.iter().map(|s| s.dist_to_opt).collect()
    }
}

/// Drive cycles until the start-of-cycle gradient norm reaches the
/// tolerance or the cycle budget runs out, delegating each `αᵏ` to the
/// stepsize policy.
pub fn run<O>(
    oracle: &O,
    policy: &mut dyn StepsizePolicy<O>,
    config: &RunConfig,
) -> Result<RunResult>
where
    O: IncrementalOracle + ?Sized,
{
    if config.grad_tolerance < 0.0 {
        return Err(Error::invalid("need grad_tolerance >= 0"));
    }
    if config.max_cycles == 0 {
        return Err(Error::invalid("need max_cycles >= 1"));
    }
    let n = oracle.dim();
    let m = oracle.num_components();
    let mut x = config
        .start
        .clone()
        .unwrap_or_else(|| Vector::from_element(n, 1.0));
    if x.len() != n {
        return Err(Error::invalid("start point has wrong dimension"));
    }
    let mut h = config
        .initial_h
        .clone()
        .unwrap_or_else(|| Matrix::zeros(n, n));
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::invalid("initial matrix has wrong dimension"));
    }

    let full_mode = matches!(config.trace_mode, TraceMode::Full { .. });
    let detail_limit = match config.trace_mode {
        TraceMode::Light => 0,
        TraceMode::Full { detail_limit } => detail_limit,
    };
    let mut s2 = full_mode.then(|| Matrix::zeros(n, n));

    let mut box_lo = x.clone();
    let mut box_hi = x.clone();
    let mut scalars = Vec::new();
    let mut details = Vec::new();
    let mut termination = Termination::MaxCycles;
    let mut failure = None;
    let mut final_grad_norm = f64::NAN;
    let mut cycles_used = 0;

    for k in 1..=config.max_cycles {
        let start_grads: Vec<Vector> =
            (0..m).map(|j| oracle.component_gradient(j, &x)).collect();
        let mut full_grad = Vector::zeros(n);
        for g in &start_grads {
            full_grad += g;
        }
        let grad_norm = full_grad.norm();
        final_grad_norm = grad_norm;
        if grad_norm <= config.grad_tolerance {
            termination = Termination::Converged;
            break;
        }

        let ctx = CycleContext {
            oracle,
            k,
            x_start: &x,
            h_in: &h,
            start_grads: &start_grads,
            detail: k <= detail_limit,
        };
        let decision = match policy.choose(&ctx) {
            Ok(d) => d,
            Err(err) => {
                termination = Termination::StepsizeFailure;
                failure = Some(err);
                break;
            }
        };
        let trace = decision.trace;
        cycles_used = k;

        let ehat_norm = s2.as_mut().map(|s2| {
            for j in 0..m {
                *s2 += oracle.component_curvature(j, &x);
            }
            sym_spectral_norm(&((&trace.h_end - &*s2) / k as f64))
        });
        let (h_eig_min, h_eig_max) = sym_eig_bounds(&trace.h_end);
        let eq_identity_residual = outer_step_identity_check(&trace, oracle)?;
        scalars.push(CycleScalars {
            k,
            alpha: trace.alpha,
            gamma: trace.gamma,
            alpha_star: decision.alpha_star,
            trial_count: decision.trial_count,
            x_norm: x.norm(),
            full_grad_norm: grad_norm,
            e_norm: trace.grad_error.norm(),
            dist_to_opt: oracle.minimizer().map(|xs| (&x - xs).norm()),
            h_eig_min,
            h_eig_max,
            ehat_norm,
            eq_identity_residual,
        });

        for p in trace.points() {
            box_lo.zip_apply(p, |lo, v| *lo = lo.min(v));
            box_hi.zip_apply(p, |hi, v| *hi = hi.max(v));
        }

        x = trace.end.clone();
        h = trace.h_end.clone();
        if k <= detail_limit {
            details.push(trace);
        }
    }

    Ok(RunResult {
        scalars,
        details,
        final_x: x,
        final_grad_norm,
        cycles_used,
        termination,
        failure,
        observed_diameter: (&box_hi - &box_lo).norm(),
    })
}

/// [`run`] with the policy built from a declarative stepsize rule.
///
/// ```
/// use inewt_core::engine::{run_with_rule, RunConfig, Termination};
/// use inewt_core::problems::make_quadratic_sum;
/// use inewt_core::stepsize::StepsizeRule;
///
/// // Quadratic components are their own second-order models, so the
/// // unit-stepsize method finishes in a single cycle from a fresh state.
/// let problem = make_quadratic_sum(7, 4, 6, 100.0).unwrap();
/// let result = run_with_rule(&problem, StepsizeRule::Unit, &RunConfig::new(50, 1e-8)).unwrap();
/// assert_eq!(result.termination, Termination::Converged);
/// assert_eq!(result.cycles_used, 1);
/// ```
pub fn run_with_rule<O>(
    oracle: &O,
    rule: crate::stepsize::StepsizeRule,
    config: &RunConfig,
) -> Result<RunResult>
where
    O: IncrementalOracle + ?Sized,
{
    let mut policy = rule.make_policy::<O>()?;
    run(oracle, policy.as_mut(), config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{
        make_example1, make_quadratic_sum, make_zero_residual_problem, Component,
    };
    use crate::stepsize::StepsizeRule;
    use alloc::boxed::Box;
    use alloc::vec;

    fn vec1(x: f64) -> Vector {
        Vector::from_element(1, x)
    }

    fn two_parabolas() -> Problem {
        // f₁=(x−1)², f₂=(x+1)²
        let comps = vec![
            Component::Quadratic {
                a: Matrix::from_element(1, 1, 2.0),
                b: vec1(-2.0),
                c0: 1.0,
            },
            Component::Quadratic {
                a: Matrix::from_element(1, 1, 2.0),
                b: vec1(2.0),
                c0: 1.0,
            },
        ];
        Problem::new(comps, 2.0, 2.0, None, Some(vec1(0.0))).unwrap()
    }

    #[test]
    fn inner_update_hand_trace() {
        // f₁=(x−1)², start 5, H=0, α=1: H'=2, x' = 5 − (1/2)·2·(5−1) = 1.
        let p = two_parabolas();
        let state = InnerState::initial(vec1(5.0));
        let next = inner_update(&state, &p, 1.0).unwrap();
        assert_eq!(next.h[(0, 0)], 2.0);
        assert!((next.x[0] - 1.0).abs() < 1e-14);
        assert_eq!(next.i, 1);
    }

    #[test]
    fn inner_update_zero_gradient_is_fixed_point() {
        let p = two_parabolas();
        // At x=1 component 1 has zero gradient.
        let state = InnerState::initial(vec1(1.0));
        for alpha in [0.5, 1.0, 7.0] {
            let next = inner_update(&state, &p, alpha).unwrap();
            assert_eq!(next.x[0], 1.0);
        }
    }

    #[test]
    fn inner_update_example1_first_cycle_matrices() {
        // ε=1, k=1: H₁¹=2, H₂¹=4.
        let p = make_example1(1.0).unwrap();
        let s0 = InnerState::initial(vec1(5.0));
        let s1 = inner_update(&s0, &p, 1.0).unwrap();
        assert_eq!(s1.h[(0, 0)], 2.0);
        let s2 = inner_update(&s1, &p, 1.0).unwrap();
        assert_eq!(s2.h[(0, 0)], 4.0);
    }

    #[test]
    fn run_cycle_two_parabolas_hand_trace() {
        // start 5, α=1 → inner point 1, end 0.
        let p = two_parabolas();
        let h0 = Matrix::zeros(1, 1);
        let t = run_cycle(&vec1(5.0), &h0, &p, 1.0, 1).unwrap();
        assert_eq!(t.inner_points.len(), 1);
        assert!((t.inner_points[0][0] - 1.0).abs() < 1e-14);
        assert!(t.end[0].abs() < 1e-14);
        assert_eq!(t.m(), 2);
    }

    #[test]
    fn one_cycle_exactness_on_quadratic_sum() {
        let p = make_quadratic_sum(3, 4, 6, 100.0).unwrap();
        let xs = p.minimizer.clone().unwrap();
        let h0 = Matrix::zeros(4, 4);
        let start = Vector::from_element(4, 2.0);
        let t = run_cycle(&start, &h0, &p, 1.0, 1).unwrap();
        assert!((&t.end - &xs).norm() <= 1e-8 * (1.0 + xs.norm()));
    }

    #[test]
    fn example1_unit_alpha_converges_in_one_cycle() {
        let p = make_example1(1.0).unwrap();
        let t = run_cycle(&vec1(5.0), &Matrix::zeros(1, 1), &p, 1.0, 1).unwrap();
        assert!(t.end[0].abs() < 1e-12);
        // e¹ = 0 when α=1.
        assert!(t.grad_error.norm() < 1e-12);
    }

    #[test]
    fn closed_form_cycle_matches_recursion() {
        let p = make_quadratic_sum(11, 3, 5, 30.0).unwrap();
        let start = Vector::from_element(3, -1.5);
        // A mid-run state: H carries two earlier cycles.
        let h0 = p.full_hessian(&start).unwrap() * 2.0;
        let t = run_cycle(&start, &h0, &p, 2.5, 3).unwrap();
        let cf = closed_form_cycle(&start, &h0, &p, 2.5, 3).unwrap();
        assert_eq!(cf.len(), 5);
        for (i, cf_point) in cf.iter().enumerate() {
            let rec = if i + 1 < t.m() {
                &t.inner_points[i]
            } else {
                &t.end
            };
            let rel = (cf_point - rec).norm() / (1.0 + rec.norm());
            assert!(rel <= 1e-10, "mismatch at inner index {i}: {rel:e}");
        }
    }

    #[test]
    fn closed_form_first_step_degeneracy() {
        // i=1 aggregate has a single term and a vanishing correction, so
        // x₂ = x₁ − α(H₁)⁻¹∇f₁(x₁) exactly.
        let p = two_parabolas();
        let start = vec1(5.0);
        let cf = closed_form_cycle(&start, &Matrix::zeros(1, 1), &p, 1.0, 1).unwrap();
        // Hand evaluation: [1, 0].
        assert!((cf[0][0] - 1.0).abs() < 1e-14);
        assert!(cf[1][0].abs() < 1e-14);
    }

    #[test]
    fn gradient_error_zero_when_inner_points_equal_start() {
        let p = make_zero_residual_problem(4, 3, 4, false).unwrap();
        let xs = p.minimizer.clone().unwrap();
        // Every gradient vanishes at the common minimizer, so the cycle
        // never moves and every error summand vanishes.
        let t = run_cycle(&xs, &Matrix::zeros(3, 3), &p, 1.0, 1).unwrap();
        for ip in &t.inner_points {
            assert!((ip - &xs).norm() == 0.0);
        }
        assert_eq!(t.grad_error.norm(), 0.0);
    }

    #[test]
    fn gradient_error_recomputation_matches_cycle_accumulation() {
        let p = make_quadratic_sum(8, 2, 4, 20.0).unwrap();
        let start = Vector::from_element(2, 3.0);
        let t = run_cycle(&start, &Matrix::zeros(2, 2), &p, 1.7, 1).unwrap();
        let e = gradient_error(&p, &t.start, &t.inner_points, t.alpha).unwrap();
        assert!((&e - &t.grad_error).norm() <= 1e-12 * (1.0 + e.norm()));
    }

    #[test]
    fn unit_alpha_cycle_with_prior_matches_quadratic_oracle() {
        // With α=1 on quadratic components the aggregate Σⱼ(∇fⱼ(xⱼ) +
        // ∇²fⱼ(x₁−xⱼ)) collapses to ∇f(x₁), so the cycle from any prior
        // H₀ ends at x₁ − (H₀+ΣA)⁻¹∇f(x₁). Direct oracle for that.
        let p = make_quadratic_sum(5, 3, 4, 10.0).unwrap();
        let start = Vector::from_element(3, -2.0);
        let h0 = p.full_hessian(&start).unwrap() * 4.0; // as if 4 cycles done
        let t = run_cycle(&start, &h0, &p, 1.0, 5).unwrap();
        let g = p.full_gradient(&start).unwrap();
        let oracle = &start - crate::linalg::spd_solve(&t.h_end, &g).unwrap();
        assert!((&t.end - oracle).norm() <= 1e-10 * (1.0 + start.norm()));
    }

    #[test]
    fn outer_step_identity_holds_on_random_cycles() {
        let p = make_quadratic_sum(13, 3, 5, 50.0).unwrap();
        let mut x = Vector::from_element(3, 4.0);
        let mut h = Matrix::zeros(3, 3);
        for k in 1..=10 {
            let t = run_cycle(&x, &h, &p, 2.0, k).unwrap();
            let r = outer_step_identity_check(&t, &p).unwrap();
            assert!(r <= 1e-9 * (1.0 + x.norm()), "cycle {k}: residual {r:e}");
            x = t.end.clone();
            h = t.h_end.clone();
        }
    }

    #[test]
    fn hessian_error_zero_for_constant_hessians() {
        let p = make_quadratic_sum(2, 2, 3, 10.0).unwrap();
        let config = RunConfig::new(20, 0.0);
        let res =
            run_with_rule(&p, StepsizeRule::ConstantNormalized { gamma: 0.1 }, &config).unwrap();
        assert_eq!(res.scalars.len(), 20);
        for s in &res.scalars {
            assert_eq!(s.ehat_norm.unwrap(), 0.0);
        }
    }

    #[test]
    fn hessian_error_respects_trivial_bound() {
        let p = make_zero_residual_problem(17, 2, 4, true).unwrap();
        let bound = (p.eig_upper - p.eig_lower) * p.m() as f64;
        let config = RunConfig::new(60, 0.0);
        let res =
            run_with_rule(&p, StepsizeRule::ConstantNormalized { gamma: 0.05 }, &config).unwrap();
        for s in &res.scalars {
            assert!(s.ehat_norm.unwrap() <= bound + 1e-9);
        }
    }

    #[test]
    fn bounded_curvature_substitute_runs_through_the_engine() {
        // The engine only needs a symmetric curvature oracle with a
        // declared eigenvalue band, not the true Hessian. Substitute a
        // damped one (H + I, band [c+1, C+1]) and the run still converges,
        // with the accumulated matrix inside the substituted envelope.
        struct Damped<'a>(&'a Problem);
        impl IncrementalOracle for Damped<'_> {
            fn dim(&self) -> usize {
                self.0.n
            }
            fn num_components(&self) -> usize {
                self.0.m()
            }
            fn component_gradient(&self, i: usize, x: &Vector) -> Vector {
                self.0.component_gradient(i, x)
            }
            fn component_curvature(&self, i: usize, x: &Vector) -> Matrix {
                self.0.component_curvature(i, x) + Matrix::identity(self.0.n, self.0.n)
            }
            fn curvature_upper(&self) -> Option<f64> {
                Some(self.0.eig_upper + 1.0)
            }
            fn minimizer(&self) -> Option<&Vector> {
                self.0.minimizer.as_ref()
            }
        }
        let p = make_zero_residual_problem(33, 2, 3, false).unwrap();
        let oracle = Damped(&p);
        let rule = StepsizeRule::VariableBisection {
            eta: 0.9,
            tau: 0.5,
            initial_alpha: 1.0,
        };
        let config = RunConfig::new(300, 1e-8);
        let res = run_with_rule(&oracle, rule, &config).unwrap();
        assert_eq!(res.termination, Termination::Converged);
        let (lo, hi) = (p.eig_lower + 1.0, p.eig_upper + 1.0);
        for s in &res.scalars {
            let km = (s.k * p.m()) as f64;
            assert!(s.h_eig_min >= lo * km - 1e-9 * km);
            assert!(s.h_eig_max <= hi * km + 1e-9 * km);
        }
    }

    #[test]
    fn hessian_error_accumulators_track_the_run() {
        // Maintain S₁/S₂ by hand over a run and compare the resulting
        // ‖êᵏ‖ with what the engine recorded.
        let p = make_zero_residual_problem(9, 2, 3, true).unwrap();
        let config = RunConfig::new(25, 0.0);
        let res =
            run_with_rule(&p, StepsizeRule::ConstantNormalized { gamma: 0.05 }, &config).unwrap();
        let mut accums = HessianErrorAccumulators::new(2);
        for (t, s) in res.details.iter().zip(&res.scalars) {
            accums.s1 = t.h_end.clone();
            accums.s2 += p.full_hessian(&t.start).unwrap();
            let (ehat, norm) = hessian_error(&accums, t.k);
            assert_eq!(ehat.nrows(), 2);
            assert!((norm - s.ehat_norm.unwrap()).abs() <= 1e-12 * (1.0 + norm));
        }
    }

    #[test]
    fn problems_and_results_cross_threads() {
        fn takes_sync<T: Sync + Send>(_: &T) {}
        let p = make_quadratic_sum(1, 2, 3, 10.0).unwrap();
        takes_sync(&p);
        let res = run_with_rule(&p, StepsizeRule::Unit, &RunConfig::new(3, 1e-6)).unwrap();
        takes_sync(&res);
    }

    #[test]
    fn run_quadratic_unit_rule_converges_in_one_cycle() {
        let p = make_quadratic_sum(7, 5, 8, 100.0).unwrap();
        let config = RunConfig::new(50, 1e-8);
        let res = run_with_rule(&p, StepsizeRule::Unit, &config).unwrap();
        assert_eq!(res.termination, Termination::Converged);
        assert_eq!(res.cycles_used, 1);
        assert!(res.final_grad_norm <= 1e-8);
    }

    #[test]
    fn run_is_deterministic() {
        let p = make_zero_residual_problem(23, 3, 4, true).unwrap();
        let config = RunConfig::new(40, 1e-10);
        let rule = StepsizeRule::VariableBisection {
            eta: 0.9,
            tau: 0.5,
            initial_alpha: 1.0,
        };
        let a = run_with_rule(&p, rule, &config).unwrap();
        let b = run_with_rule(&p, rule, &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn run_reports_partial_trace_on_numerical_failure() {
        // Negative-definite "curvature" forces the factorization to fail
        // immediately on the first inner step.
        struct Indefinite;
        impl IncrementalOracle for Indefinite {
            fn dim(&self) -> usize {
                1
            }
            fn num_components(&self) -> usize {
                2
            }
            fn component_gradient(&self, _i: usize, _x: &Vector) -> Vector {
                Vector::from_element(1, 1.0)
            }
            fn component_curvature(&self, _i: usize, _x: &Vector) -> Matrix {
                Matrix::from_element(1, 1, -1.0)
            }
            fn curvature_upper(&self) -> Option<f64> {
                None
            }
            fn minimizer(&self) -> Option<&Vector> {
                None
            }
        }
        let config = RunConfig::new(10, 0.0);
        let res = run_with_rule(&Indefinite, StepsizeRule::Unit, &config).unwrap();
        assert_eq!(res.termination, Termination::StepsizeFailure);
        assert!(matches!(
            res.failure,
            Some(Error::NotPositiveDefinite { k: 1, i: 1 })
        ));
        assert!(res.scalars.is_empty());
    }

    #[test]
    fn trace_thinning_caps_detail_storage() {
        let p = make_zero_residual_problem(31, 2, 3, false).unwrap();
        let mut config = RunConfig::new(30, 0.0);
        config.trace_mode = TraceMode::Full { detail_limit: 7 };
        let res =
            run_with_rule(&p, StepsizeRule::ConstantNormalized { gamma: 0.05 }, &config).unwrap();
        assert_eq!(res.details.len(), 7);
        assert_eq!(res.scalars.len(), 30);
        let light = RunConfig {
            trace_mode: TraceMode::Light,
            ..config
        };
        let res =
            run_with_rule(&p, StepsizeRule::ConstantNormalized { gamma: 0.05 }, &light).unwrap();
        assert!(res.details.is_empty());
        assert!(res.scalars.iter().all(|s| s.ehat_norm.is_none()));
    }

    #[test]
    fn schedule_policy_runs_custom_alpha_sequence() {
        use crate::stepsize::SchedulePolicy;
        let p = make_example1(1.0).unwrap();
        let mut policy = SchedulePolicy::new(|k| 1.0 + libm::sqrt(k as f64));
        let config = RunConfig::new(25, 0.0).with_start(vec1(5.0));
        let res = run(&p, &mut policy, &config).unwrap();
        assert_eq!(res.cycles_used, 25);
        for s in &res.scalars {
            let expect = 1.0 + libm::sqrt(s.k as f64);
            assert_eq!(s.alpha, expect);
        }
    }

    #[test]
    fn boxed_policies_work_through_dyn_dispatch() {
        let p = two_parabolas();
        let mut policy: Box<dyn StepsizePolicy<Problem>> =
            StepsizeRule::Unit.make_policy().unwrap();
        let config = RunConfig::new(5, 1e-12).with_start(vec1(5.0));
        let res = run(&p, policy.as_mut(), &config).unwrap();
        assert_eq!(res.termination, Termination::Converged);
    }
}
