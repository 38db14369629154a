//! Finite-sum objectives `f(x) = Σᵢ fᵢ(x)` and deterministic generators for
//! the test-problem families the suite runs on.
//!
//! Three families, one per hypothesis the solver theory cares about:
//!
//! * [`make_quadratic_sum`] — random strongly convex quadratics. Every
//!   component is exactly its own second-order model, so a unit-stepsize
//!   cycle from a fresh state lands on the minimizer.
//! * [`make_zero_residual_problem`] — components sharing one common minimizer
//!   `x*`, which makes the gradient-growth condition
//!   `‖∇fᵢ(x)‖ ≤ M‖∇f(x)‖` hold with `M = C/(c·m)`. Optionally adds a
//!   log-cosh term so the family is not secretly quadratic.
//! * [`make_example1`] — the two-component scalar problem
//!   `f₁ = 1000x + εx²`, `f₂ = −1000x + εx²` whose component gradients do
//!   not vanish at the optimum; gradient growth fails by construction.
//!
//! Nonlinear least-squares instances for the Gauss-Newton path come from
//! [`make_nlls`] / [`make_nlls_nonlinear`].
//!
//! Generators are pure functions of their seed and parameters: identical
//! inputs produce bit-identical problem data.

use alloc::{format, vec, vec::Vec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{real, spd_solve, sym_eig_bounds, Matrix, Vector};
use crate::{Error, Result};

/// A point `x ∈ ℝⁿ`.
pub type Point = Vector;

/// Value / gradient / Hessian access to a single component `fᵢ`.
///
/// Hessians must be symmetric with eigenvalues inside the owning problem's
/// declared band `[c, C]` everywhere they are queried.
pub trait ComponentOracle {
    fn value(&self, x: &Point) -> f64;
    fn gradient(&self, x: &Point) -> Vector;
    fn hessian(&self, x: &Point) -> Matrix;
}

/// Concrete component functions used by the generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// `½ xᵀA x + bᵀx + c0`
    Quadratic { a: Matrix, b: Vector, c0: f64 },
    /// `½ (x−center)ᵀA (x−center) + scale·Σ_d ln cosh(x_d − center_d)`
    ///
    /// With `logcosh_scale = 0` this is a pure quadratic centered at
    /// `center`; with a positive scale the Hessian gains
    /// `scale·diag(sech²)`, bounded by `scale·I` and attained at the center.
    Shifted {
        a: Matrix,
        center: Vector,
        logcosh_scale: f64,
    },
}

impl Component {
    pub fn dim(&self) -> usize {
        match self {
            Component::Quadratic { a, .. } | Component::Shifted { a, .. } => a.nrows(),
        }
    }
}

impl ComponentOracle for Component {
    fn value(&self, x: &Point) -> f64 {
        match self {
            Component::Quadratic { a, b, c0 } => 0.5 * x.dot(&(a * x)) + b.dot(x) + c0,
            Component::Shifted {
                a,
                center,
                logcosh_scale,
            } => {
                let d = x - center;
                let mut v = 0.5 * d.dot(&(a * &d));
                if *logcosh_scale != 0.0 {
                    v += logcosh_scale * d.iter().map(|&z| real::ln_cosh(z)).sum::<f64>();
                }
                v
            }
        }
    }

    fn gradient(&self, x: &Point) -> Vector {
        match self {
            Component::Quadratic { a, b, .. } => a * x + b,
            Component::Shifted {
                a,
                center,
                logcosh_scale,
            } => {
                let d = x - center;
                let mut g = a * &d;
                if *logcosh_scale != 0.0 {
                    for (gd, &zd) in g.iter_mut().zip(d.iter()) {
                        *gd += logcosh_scale * real::tanh(zd);
                    }
                }
                g
            }
        }
    }

    fn hessian(&self, x: &Point) -> Matrix {
        match self {
            Component::Quadratic { a, .. } => a.clone(),
            Component::Shifted {
                a,
                center,
                logcosh_scale,
            } => {
                let mut h = a.clone();
                if *logcosh_scale != 0.0 {
                    let d = x - center;
                    for (idx, &zd) in d.iter().enumerate() {
                        h[(idx, idx)] += logcosh_scale * real::sech2(zd);
                    }
                }
                h
            }
        }
    }
}

/// A finite sum of strongly convex components with its curvature metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub components: Vec<Component>,
    /// Dimension `n`.
    pub n: usize,
    /// Uniform lower eigenvalue bound `c` of every component Hessian.
    pub eig_lower: f64,
    /// Uniform upper eigenvalue bound `C` of every component Hessian.
    pub eig_upper: f64,
    /// Gradient-growth constant `M` with `‖∇fᵢ(x)‖ ≤ M‖∇f(x)‖`, when the
    /// problem is known to satisfy it.
    pub gradient_growth: Option<f64>,
    /// Exact minimizer when known by construction.
    pub minimizer: Option<Point>,
    /// Iterate-set diameter, when recorded from a run.
    pub diameter: Option<f64>,
}

impl Problem {
    /// Validates the metadata against the stated invariants.
    pub fn new(
        components: Vec<Component>,
        eig_lower: f64,
        eig_upper: f64,
        gradient_growth: Option<f64>,
        minimizer: Option<Point>,
    ) -> Result<Self> {
        let m = components.len();
        if m < 2 {
            return Err(Error::invalid(format!("need m >= 2 components, got {m}")));
        }
        let n = components[0].dim();
        if components.iter().any(|comp| comp.dim() != n) {
            return Err(Error::invalid("components disagree on dimension"));
        }
        if !(eig_lower > 0.0 && eig_upper >= eig_lower) {
            return Err(Error::invalid(format!(
                "need 0 < c <= C, got c={eig_lower}, C={eig_upper}"
            )));
        }
        if let Some(growth) = gradient_growth {
            if growth <= 0.0 {
                return Err(Error::invalid("gradient growth constant must be positive"));
            }
        }
        let problem = Problem {
            components,
            n,
            eig_lower,
            eig_upper,
            gradient_growth,
            minimizer,
            diameter: None,
        };
        if let Some(xs) = &problem.minimizer {
            if xs.len() != n {
                return Err(Error::invalid("minimizer has wrong dimension"));
            }
            let g = problem.full_gradient(xs)?;
            if g.norm() > 1e-10 * (1.0 + eig_upper) {
                return Err(Error::invalid(format!(
                    "declared minimizer is not stationary: |grad| = {:e}",
                    g.norm()
                )));
            }
        }
        Ok(problem)
    }

    /// Number of components `m`.
    pub fn m(&self) -> usize {
        self.components.len()
    }

    /// Condition number `Q = C/c` of the curvature band.
    pub fn q(&self) -> f64 {
        self.eig_upper / self.eig_lower
    }

    pub fn full_value(&self, x: &Point) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.components.iter().map(|comp| comp.value(x)).sum())
    }

    /// `∇f(x) = Σᵢ ∇fᵢ(x)`.
    pub fn full_gradient(&self, x: &Point) -> Result<Vector> {
        self.check_dim(x)?;
        let mut g = Vector::zeros(self.n);
        for comp in &self.components {
            g += comp.gradient(x);
        }
        Ok(g)
    }

    pub fn full_hessian(&self, x: &Point) -> Result<Matrix> {
        self.check_dim(x)?;
        let mut h = Matrix::zeros(self.n, self.n);
        for comp in &self.components {
            h += comp.hessian(x);
        }
        Ok(h)
    }

    fn check_dim(&self, x: &Point) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::invalid(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.n
            )));
        }
        Ok(())
    }
}

/// One residual `gᵢ` of a nonlinear least-squares objective `½Σᵢ gᵢ²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Residual {
    /// `g(x) = aᵀx − b`
    Affine { a: Vector, b: f64 },
    /// `g(x) = aᵀ(x−root) + beta·tanh(wᵀ(x−root))` — vanishes at `root`.
    ShiftedTanh {
        a: Vector,
        w: Vector,
        beta: f64,
        root: Vector,
    },
}

impl Residual {
    pub fn dim(&self) -> usize {
        match self {
            Residual::Affine { a, .. } | Residual::ShiftedTanh { a, .. } => a.len(),
        }
    }

    pub fn value(&self, x: &Point) -> f64 {
        match self {
            Residual::Affine { a, b } => a.dot(x) - b,
            Residual::ShiftedTanh { a, w, beta, root } => {
                let d = x - root;
                a.dot(&d) + beta * real::tanh(w.dot(&d))
            }
        }
    }

    pub fn gradient(&self, x: &Point) -> Vector {
        match self {
            Residual::Affine { a, .. } => a.clone(),
            Residual::ShiftedTanh { a, w, beta, root } => {
                let d = x - root;
                a + w * (beta * real::sech2(w.dot(&d)))
            }
        }
    }
}

/// A least-squares instance `minimize ½ Σᵢ gᵢ(x)²` for the EKF-S path.
#[derive(Debug, Clone, PartialEq)]
pub struct NllsProblem {
    pub residuals: Vec<Residual>,
    pub n: usize,
    /// Common root of all residuals, when the instance is zero-residual.
    pub root: Option<Point>,
    /// Upper bound on `‖∇gᵢ(x)‖²` over the region of interest; plays the
    /// role of `C` in the variable-stepsize acceptance formula.
    pub curvature_upper: f64,
}

impl NllsProblem {
    pub fn m(&self) -> usize {
        self.residuals.len()
    }

    /// `∇f(x) = Σᵢ gᵢ(x)·∇gᵢ(x)` for `f = ½Σ gᵢ²`.
    pub fn full_gradient(&self, x: &Point) -> Vector {
        let mut g = Vector::zeros(self.n);
        for r in &self.residuals {
            g += r.gradient(x) * r.value(x);
        }
        g
    }

    pub fn full_value(&self, x: &Point) -> f64 {
        self.residuals
            .iter()
            .map(|r| {
                let v = r.value(x);
                0.5 * v * v
            })
            .sum()
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller on (0,1] uniforms.
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    real::sqrt(-2.0 * real::ln(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
}

fn normal_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| normal(rng)))
}

/// Random symmetric matrix `QᵀΛQ` with eigenvalues log-uniform in
/// `[lo, hi]` and `Q` drawn from a QR factorization of a Gaussian matrix.
fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Matrix {
    let eigs = Vector::from_iterator(
        n,
        (0..n).map(|_| {
            let u: f64 = rng.random();
            lo * real::exp(u * real::ln(hi / lo))
        }),
    );
    if n == 1 {
        return Matrix::from_element(1, 1, eigs[0]);
    }
    let gauss = Matrix::from_fn(n, n, |_, _| normal(rng));
    let q = gauss.qr().q();
    let a = q.transpose() * Matrix::from_diagonal(&eigs) * &q;
    // Symmetrize away factorization round-off.
    let at = a.transpose();
    (a + at) * 0.5
}

fn validate_nm(n: usize, m: usize) -> Result<()> {
    if n < 1 {
        return Err(Error::invalid("need n >= 1"));
    }
    if m < 2 {
        return Err(Error::invalid("need m >= 2"));
    }
    Ok(())
}

/// Sum of `m` random strongly convex quadratics
/// `fᵢ(x) = ½xᵀAᵢx + bᵢᵀx` with overall condition number at most
/// `condition_target`.
///
/// `c` and `C` are recorded as the exact extreme eigenvalues over all `Aᵢ`
/// (they feed the stepsize acceptance formula directly) and the minimizer
/// `x* = −(ΣAᵢ)⁻¹Σbᵢ` is stored.
pub fn make_quadratic_sum(seed: u64, n: usize, m: usize, condition_target: f64) -> Result<Problem> {
    validate_nm(n, m)?;
    if condition_target < 1.0 {
        return Err(Error::invalid("need condition_target >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut components = Vec::with_capacity(m);
    let mut a_sum = Matrix::zeros(n, n);
    let mut b_sum = Vector::zeros(n);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..m {
        let a = random_spd(&mut rng, n, 1.0, condition_target);
        let b = normal_vector(&mut rng, n);
        let (alo, ahi) = sym_eig_bounds(&a);
        lo = lo.min(alo);
        hi = hi.max(ahi);
        a_sum += &a;
        b_sum += &b;
        components.push(Component::Quadratic { a, b, c0: 0.0 });
    }
    let minimizer = spd_solve(&a_sum, &(-b_sum))
        .ok_or_else(|| Error::invalid("generated Hessian sum not positive definite"))?;
    Problem::new(components, lo, hi, None, Some(minimizer))
}

/// Eigenvalue band of the zero-residual quadratic parts. Kept narrow, and
/// large against the unit-bounded log-cosh curvature, so the family's
/// condition number stays near 1 and its gradient-growth constant
/// `M = C/(c·m)` stays small; both keep the variable-stepsize theory
/// constants built from them non-degenerate at desk scale.
const ZERO_RESIDUAL_BAND: (f64, f64) = (100.0, 105.0);

/// Components sharing a common minimizer `x*`:
/// `fᵢ(x) = ½(x−x*)ᵀAᵢ(x−x*)`, plus a coordinate-wise `ln cosh(·−x*)` term
/// when `nonquadratic` is set.
///
/// All component gradients vanish at `x*`, so the gradient-growth condition
/// holds with `M = C/(c·m)`: `‖∇fᵢ(x)‖ ≤ C‖x−x*‖` while
/// `‖∇f(x)‖ ≥ c·m‖x−x*‖` (the log-cosh part only helps, since
/// `tanh(z)·z ≥ 0`). That constant is stored on the problem.
pub fn make_zero_residual_problem(
    seed: u64,
    n: usize,
    m: usize,
    nonquadratic: bool,
) -> Result<Problem> {
    validate_nm(n, m)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = normal_vector(&mut rng, n) * 2.0;
    let scale = if nonquadratic { 1.0 } else { 0.0 };
    let mut components = Vec::with_capacity(m);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..m {
        let a = random_spd(&mut rng, n, ZERO_RESIDUAL_BAND.0, ZERO_RESIDUAL_BAND.1);
        let (alo, ahi) = sym_eig_bounds(&a);
        lo = lo.min(alo);
        hi = hi.max(ahi);
        components.push(Component::Shifted {
            a,
            center: center.clone(),
            logcosh_scale: scale,
        });
    }
    // sech² ∈ (0, 1]: the upper bound C grows by the log-cosh scale (attained
    // at the common center), the lower bound c is unchanged.
    let upper = hi + scale;
    let growth = upper / (lo * m as f64);
    Problem::new(components, lo, upper, Some(growth), Some(center))
}

/// The scalar two-component problem `f₁ = 1000x + εx²`, `f₂ = −1000x + εx²`
/// with `f = 2εx²`, minimizer `0` and `c = C = 2ε`.
///
/// Component gradients are `±1000` at the optimum, so no gradient-growth
/// constant exists; the field is left unset.
pub fn make_example1(epsilon: f64) -> Result<Problem> {
    if epsilon <= 0.0 {
        return Err(Error::invalid("need epsilon > 0"));
    }
    let a = Matrix::from_element(1, 1, 2.0 * epsilon);
    let components = vec![
        Component::Quadratic {
            a: a.clone(),
            b: Vector::from_element(1, 1000.0),
            c0: 0.0,
        },
        Component::Quadratic {
            a,
            b: Vector::from_element(1, -1000.0),
            c0: 0.0,
        },
    ];
    Problem::new(
        components,
        2.0 * epsilon,
        2.0 * epsilon,
        None,
        Some(Vector::from_element(1, 0.0)),
    )
}

/// Linear least-squares residuals `gᵢ(x) = aᵢᵀx − bᵢ`.
///
/// With `zero_residual` the right-hand sides are `bᵢ = aᵢᵀx*` for a stored
/// `x*`, making the system consistent; otherwise the `bᵢ` are random and the
/// minimizer is the ordinary least-squares solution (not stored).
pub fn make_nlls(seed: u64, n: usize, m: usize, zero_residual: bool) -> Result<NllsProblem> {
    validate_nm(n, m)?;
    if m < n {
        return Err(Error::invalid("need m >= n residuals for a full-rank system"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = normal_vector(&mut rng, n);
    let mut residuals = Vec::with_capacity(m);
    let mut curvature_upper = 0.0f64;
    for _ in 0..m {
        let a = normal_vector(&mut rng, n).normalize();
        let b = if zero_residual { a.dot(&root) } else { normal(&mut rng) };
        curvature_upper = curvature_upper.max(a.norm_squared());
        residuals.push(Residual::Affine { a, b });
    }
    Ok(NllsProblem {
        residuals,
        n,
        root: zero_residual.then_some(root),
        curvature_upper,
    })
}

/// Zero-residual least squares with a mild smooth nonlinearity:
/// `gᵢ(x) = aᵢᵀ(x−x*) + β·tanh(wᵢᵀ(x−x*))`, all vanishing at the stored
/// root `x*`.
pub fn make_nlls_nonlinear(seed: u64, n: usize, m: usize) -> Result<NllsProblem> {
    validate_nm(n, m)?;
    if m < n {
        return Err(Error::invalid("need m >= n residuals for a full-rank system"));
    }
    let beta = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root = normal_vector(&mut rng, n);
    let mut residuals = Vec::with_capacity(m);
    let mut curvature_upper = 0.0f64;
    for _ in 0..m {
        let a = normal_vector(&mut rng, n).normalize();
        let w = normal_vector(&mut rng, n).normalize();
        // ‖∇g‖ ≤ ‖a‖ + β‖w‖ everywhere since sech² ≤ 1.
        let bound = a.norm() + beta * w.norm();
        curvature_upper = curvature_upper.max(bound * bound);
        residuals.push(Residual::ShiftedTanh {
            a,
            w,
            beta,
            root: root.clone(),
        });
    }
    Ok(NllsProblem {
        residuals,
        n,
        root: Some(root),
        curvature_upper,
    })
}

/// Uniform sample from the box `[-radius, radius]ⁿ`; used by property tests
/// that probe oracles at random points.
pub fn sample_box(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|_| (2.0 * rng.random::<f64>() - 1.0) * radius))
}
