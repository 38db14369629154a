//! Stepsize regimes for the cycle engine.
//!
//! Four rules ship:
//!
//! * **Unit** — `αᵏ = 1`, the plain incremental Newton iteration.
//! * **ConstantNormalized** — `αᵏ = γ·k`, holding the effective per-cycle
//!   stepsize `γᵏ = αᵏ/k` at a constant `γ`.
//! * **VariableBisection** — enforces the acceptance window
//!   `1 ≤ αᵏ ≤ max(1, α*ᵏ)` where `α*ᵏ` is computed *from the trial cycle
//!   itself*:
//!
//!   ```text
//!       α*ᵏ = (1−η)/C · dᵀHₘᵏd / (‖d‖·Σᵢ₌₂..ₘ‖xᵢᵏ−x₁ᵏ‖ + (m/2)‖d‖²),
//!       d = x₁ᵏ⁺¹ − x₁ᵏ   (α*ᵏ = 0 when d = 0).
//!   ```
//!
//!   The quantity shrinks when the inner iterates travel far relative to
//!   the net per-cycle displacement, i.e. exactly in the oscillation
//!   regime the damping is meant to kill. Since `α*ᵏ` depends on the cycle
//!   produced by the candidate `α`, the rule runs trial cycles and backs
//!   off geometrically (`α ← max(1, τα)`); `α = 1` is always accepted, so
//!   the loop is finite.
//! * **LinearGrowth** — tries `αᵏ = (ν̂κ̂)·k` and falls back to `1`
//!   whenever the candidate leaves the acceptance window. With `κ̂` from
//!   the theory evaluators the accepted normalized stepsize tends to
//!   `ν̂κ̂ > 0`.
//!
//! [`SchedulePolicy`] additionally drives the engine with an arbitrary
//! `αᵏ = s(k)` sequence; the sublinear counterexample runs use it.

use alloc::boxed::Box;
use alloc::format;

use crate::engine::{CycleContext, CycleTrace, IncrementalOracle};
use crate::linalg::Matrix;
use crate::{Error, Result};

/// Declarative stepsize rule selection, as it appears in run configs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepsizeRule {
    Unit,
    ConstantNormalized {
        gamma: f64,
    },
    VariableBisection {
        eta: f64,
        tau: f64,
        /// First cycle's initial trial; later cycles warm-start from the
        /// previous accepted `α` scaled by `k/(k−1)`.
        initial_alpha: f64,
    },
    LinearGrowth {
        eta_hat: f64,
        nu_hat: f64,
        kappa_hat: f64,
    },
}

impl StepsizeRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepsizeRule::Unit => Ok(()),
            StepsizeRule::ConstantNormalized { gamma } => {
                if gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("need gamma > 0"))
                }
            }
            StepsizeRule::VariableBisection {
                eta,
                tau,
                initial_alpha,
            } => {
                if !(0.0 < eta && eta < 1.0) {
                    return Err(Error::invalid(format!("need 0 < eta < 1, got {eta}")));
                }
                if !(0.0 < tau && tau < 1.0) {
                    return Err(Error::invalid(format!("need 0 < tau < 1, got {tau}")));
                }
                if initial_alpha < 1.0 {
                    return Err(Error::invalid("need initial_alpha >= 1"));
                }
                Ok(())
            }
            StepsizeRule::LinearGrowth {
                eta_hat,
                nu_hat,
                kappa_hat,
            } => {
                if !(0.0 < eta_hat && eta_hat < 1.0) {
                    return Err(Error::invalid("need 0 < eta_hat < 1"));
                }
                if !(0.0 < nu_hat && nu_hat < 1.0) {
                    return Err(Error::invalid("need 0 < nu_hat < 1"));
                }
                if kappa_hat <= 0.0 {
                    return Err(Error::invalid("need kappa_hat > 0"));
                }
                Ok(())
            }
        }
    }

    /// Fresh per-run policy state for this rule.
    pub fn make_policy<O: IncrementalOracle + ?Sized>(
        self,
    ) -> Result<Box<dyn StepsizePolicy<O>>> {
        self.validate()?;
        Ok(match self {
            StepsizeRule::Unit => Box::new(UnitPolicy),
            StepsizeRule::ConstantNormalized { gamma } => {
                Box::new(ConstantNormalizedPolicy { gamma })
            }
            StepsizeRule::VariableBisection {
                eta,
                tau,
                initial_alpha,
            } => Box::new(BisectionPolicy {
                eta,
                tau,
                initial_alpha,
                prev_alpha: None,
            }),
            StepsizeRule::LinearGrowth {
                eta_hat,
                nu_hat,
                kappa_hat,
            } => Box::new(LinearGrowthPolicy {
                eta_hat,
                nu_hat,
                kappa_hat,
            }),
        })
    }
}

/// Outcome of a stepsize selection at one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDecision {
    /// Accepted `αᵏ`.
    pub alpha: f64,
    /// `α*ᵏ` evaluated on the accepted trial, for rules that compute it.
    pub alpha_star: Option<f64>,
    /// Trial cycles executed (1 when the first candidate was accepted).
    pub trial_count: u32,
    /// The accepted trial's trace; the engine commits it as cycle `k`.
    pub trace: CycleTrace,
}

/// A stepsize selection strategy driven by trial cycles.
pub trait StepsizePolicy<O: IncrementalOracle + ?Sized> {
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision>;
}

/// `α*ᵏ` from a completed cycle: the progress of the outer step relative
/// to the travel of the inner iterates, scaled by `(1−η)/C`.
///
/// Returns exactly `0` for a stationary cycle (`x₁ᵏ⁺¹ = x₁ᵏ`); the
/// denominator is positive whenever the displacement is not.
pub fn alpha_star(trace: &CycleTrace, h_m_k: &Matrix, eta: f64, curvature_upper: f64) -> f64 {
    let d = &trace.end - &trace.start;
    let d_norm = d.norm();
    if d_norm == 0.0 {
        return 0.0;
    }
    let inner_travel: f64 = trace
        .inner_points
        .iter()
        .map(|xi| (xi - &trace.start).norm())
        .sum();
    let m = trace.m() as f64;
    let quad = d.dot(&(h_m_k * &d));
    (1.0 - eta) / curvature_upper * quad / (d_norm * inner_travel + 0.5 * m * d_norm * d_norm)
}

/// `αᵏ = γ·k`: the stepsize whose normalized value is the constant `γ`.
pub fn constant_normalized(k: usize, gamma: f64) -> f64 {
    gamma * k as f64
}

pub struct UnitPolicy;

impl<O: IncrementalOracle + ?Sized> StepsizePolicy<O> for UnitPolicy {
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision> {
        let trace = ctx.run_trial(1.0)?;
        Ok(StepDecision {
            alpha: 1.0,
            alpha_star: None,
            trial_count: 1,
            trace,
        })
    }
}

pub struct ConstantNormalizedPolicy {
    pub gamma: f64,
}

impl<O: IncrementalOracle + ?Sized> StepsizePolicy<O> for ConstantNormalizedPolicy {
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision> {
        let alpha = constant_normalized(ctx.k, self.gamma);
        let trace = ctx.run_trial(alpha)?;
        Ok(StepDecision {
            alpha,
            alpha_star: None,
            trial_count: 1,
            trace,
        })
    }
}

/// Bisection-accepted variable stepsize.
///
/// Each cycle starts from a warm-started candidate and halves (by `τ`)
/// until the candidate sits inside its own acceptance window. Trial count
/// is bounded by `⌈log α(1) / log(1/τ)⌉ + 1` because `α = 1` always
/// passes.
pub struct BisectionPolicy {
    pub eta: f64,
    pub tau: f64,
    pub initial_alpha: f64,
    prev_alpha: Option<f64>,
}

impl BisectionPolicy {
    pub fn new(eta: f64, tau: f64, initial_alpha: f64) -> Self {
        BisectionPolicy {
            eta,
            tau,
            initial_alpha,
            prev_alpha: None,
        }
    }
}

impl<O: IncrementalOracle + ?Sized> StepsizePolicy<O> for BisectionPolicy {
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision> {
        let c_up = ctx.oracle.curvature_upper().ok_or_else(|| {
            Error::invalid("variable stepsize needs the curvature upper bound C in the metadata")
        })?;
        let k = ctx.k;
        let mut alpha = match self.prev_alpha {
            Some(prev) if k > 1 => (prev * k as f64 / (k as f64 - 1.0)).max(1.0),
            _ => self.initial_alpha.max(1.0),
        };
        let mut trial_count = 0u32;
        loop {
            trial_count += 1;
            let trace = ctx.run_trial(alpha)?;
            let star = alpha_star(&trace, &trace.h_end, self.eta, c_up);
            if alpha <= star.max(1.0) {
                self.prev_alpha = Some(alpha);
                return Ok(StepDecision {
                    alpha,
                    alpha_star: Some(star),
                    trial_count,
                    trace,
                });
            }
            alpha = (self.tau * alpha).max(1.0);
        }
    }
}

/// Variable stepsize with linear growth: candidate `(ν̂κ̂)k`, fallback `1`.
pub struct LinearGrowthPolicy {
    pub eta_hat: f64,
    pub nu_hat: f64,
    pub kappa_hat: f64,
}

impl<O: IncrementalOracle + ?Sized> StepsizePolicy<O> for LinearGrowthPolicy {
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision> {
        let c_up = ctx.oracle.curvature_upper().ok_or_else(|| {
            Error::invalid("variable stepsize needs the curvature upper bound C in the metadata")
        })?;
        let candidate = self.nu_hat * self.kappa_hat * ctx.k as f64;
        if candidate >= 1.0 {
            let trace = ctx.run_trial(candidate)?;
            let star = alpha_star(&trace, &trace.h_end, self.eta_hat, c_up);
            if candidate <= star.max(1.0) {
                return Ok(StepDecision {
                    alpha: candidate,
                    alpha_star: Some(star),
                    trial_count: 1,
                    trace,
                });
            }
            // Candidate rejected: discard the trial and commit a unit step.
            let trace = ctx.run_trial(1.0)?;
            let star = alpha_star(&trace, &trace.h_end, self.eta_hat, c_up);
            return Ok(StepDecision {
                alpha: 1.0,
                alpha_star: Some(star),
                trial_count: 2,
                trace,
            });
        }
        // Candidate below 1: unit step without any acceptance check.
        let trace = ctx.run_trial(1.0)?;
        let star = alpha_star(&trace, &trace.h_end, self.eta_hat, c_up);
        Ok(StepDecision {
            alpha: 1.0,
            alpha_star: Some(star),
            trial_count: 1,
            trace,
        })
    }
}

/// Drives cycles with a fixed schedule `αᵏ = s(k)`; no acceptance logic.
///
/// With `record_eta` set, `α*ᵏ` is still evaluated on each cycle (it is a
/// pure function of the trace) so bound checks can consume it.
pub struct SchedulePolicy<F: Fn(usize) -> f64> {
    schedule: F,
    record_eta: Option<f64>,
}

impl<F: Fn(usize) -> f64> SchedulePolicy<F> {
    pub fn new(schedule: F) -> Self {
        SchedulePolicy {
            schedule,
            record_eta: None,
        }
    }

    pub fn with_alpha_star_eta(mut self, eta: f64) -> Self {
        self.record_eta = Some(eta);
        self
    }
}

impl<O, F> StepsizePolicy<O> for SchedulePolicy<F>
where
    O: IncrementalOracle + ?Sized,
    F: Fn(usize) -> f64,
{
    fn choose(&mut self, ctx: &CycleContext<'_, O>) -> Result<StepDecision> {
        let alpha = (self.schedule)(ctx.k);
        let trace = ctx.run_trial(alpha)?;
        let alpha_star = match (self.record_eta, ctx.oracle.curvature_upper()) {
            (Some(eta), Some(c_up)) => Some(alpha_star(&trace, &trace.h_end, eta, c_up)),
            _ => None,
        };
        Ok(StepDecision {
            alpha,
            alpha_star,
            trial_count: 1,
            trace,
        })
    }
}
