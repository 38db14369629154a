//! Incremental Newton (IN) and incremental Gauss-Newton (EKF-S) solvers for
//! minimizing finite sums of strongly convex functions
//!
//! ```text
//!     minimize  f(x) = Σᵢ fᵢ(x),   x ∈ ℝⁿ,   cI ⪯ ∇²fᵢ(x) ⪯ CI
//! ```
//!
//! The method cycles deterministically through the components. Inner iteration
//! `i` of cycle `k` takes a damped Newton step on component `i` alone, against
//! the running sum `Hᵢᵏ` of every component curvature matrix evaluated so far:
//!
//! ```text
//!     Hᵢᵏ   = Hᵢ₋₁ᵏ + ∇²fᵢ(xᵢᵏ),          H₀¹ = 0, H₀ᵏ⁺¹ = Hₘᵏ
//!     xᵢ₊₁ᵏ = xᵢᵏ − αᵏ (Hᵢᵏ)⁻¹ ∇fᵢ(xᵢᵏ)
//! ```
//!
//! Because `H` grows linearly in `k`, the per-cycle map behaves like a Newton
//! step with effective stepsize `γᵏ = αᵏ/k` and an explicit gradient error
//! `eᵏ`; this crate exposes that decomposition, all four stepsize regimes
//! (unit, constant-normalized, bisection-accepted variable, linear growth),
//! and evaluators for every constant of the accompanying convergence theory
//! (`φ`, the `B` recursion, `κ`, `r_ν`, `φ̄_ν`), so the theory can be checked
//! against recorded traces.
//!
//! The crate is `no_std` + `alloc`; anything that touches files or processes
//! lives in the companion CLI crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod diagnostics;
pub mod engine;
mod error;
pub mod gaussnewton;
pub mod linalg;
pub mod problems;
pub mod stepsize;
pub mod theory;

pub use error::Error;
pub use linalg::{Matrix, Vector};

pub type Result<T> = core::result::Result<T, Error>;
