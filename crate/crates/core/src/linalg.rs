//! Small dense linear-algebra helpers shared by the solver modules.
//!
//! Problems here are deliberately small (`n` in the tens at most); everything
//! is dense `f64` and factorizations are recomputed rather than updated.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Scalar math routed through `libm` so the crate stays `no_std`-clean.
pub(crate) mod real {
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn tanh(x: f64) -> f64 {
        libm::tanh(x)
    }
    #[inline]
    pub fn cosh(x: f64) -> f64 {
        libm::cosh(x)
    }
    /// log(cosh(x)) without overflow for large |x|.
    #[inline]
    pub fn ln_cosh(x: f64) -> f64 {
        let a = x.abs();
        if a > 20.0 {
            // cosh(x) = e^|x|(1 + e^{-2|x|})/2
            a - core::f64::consts::LN_2 + libm::log1p(libm::exp(-2.0 * a))
        } else {
            ln(cosh(x))
        }
    }
    /// sech²(x) = 1/cosh²(x), the second derivative of log cosh.
    #[inline]
    pub fn sech2(x: f64) -> f64 {
        let c = cosh(x);
        1.0 / (c * c)
    }
}

/// Solve `a x = b` for symmetric positive definite `a` via Cholesky.
pub fn spd_solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    Cholesky::new(a.clone()).map(|chol| chol.solve(b))
}

/// A reusable SPD factorization of one accumulated curvature matrix.
pub struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(a: Matrix) -> Option<Self> {
        Cholesky::new(a).map(|chol| SpdFactor { chol })
    }

    pub fn solve(&self, b: &Vector) -> Vector {
        self.chol.solve(b)
    }
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn sym_eig_bounds(a: &Matrix) -> (f64, f64) {
    let eigs = a.clone().symmetric_eigenvalues();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &e in eigs.iter() {
        lo = lo.min(e);
        hi = hi.max(e);
    }
    (lo, hi)
}

/// Spectral norm of a symmetric matrix (largest |eigenvalue|).
pub fn sym_spectral_norm(a: &Matrix) -> f64 {
    let (lo, hi) = sym_eig_bounds(a);
    lo.abs().max(hi.abs())
}
