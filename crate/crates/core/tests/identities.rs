//! Property tests for the structural identities of the cycle engine:
//! the closed-form/recursive cycle equivalence and the exactness of the
//! perturbed-Newton rearrangement, across randomized problems, stepsizes
//! and accumulated-curvature states.

use inewt_core::diagnostics::{fit_rate, RateClass};
use inewt_core::engine::{
    closed_form_cycle, gradient_error, outer_step_identity_check, run_cycle, run_with_rule,
    RunConfig,
};
use inewt_core::problems::{make_quadratic_sum, make_zero_residual_problem};
use inewt_core::stepsize::StepsizeRule;
use inewt_core::{Matrix, Vector};
use proptest::prelude::*;

fn start_point(n: usize, coord: f64) -> Vector {
    Vector::from_iterator(n, (0..n).map(|i| coord * (1.0 + 0.3 * i as f64)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_and_recursive_cycles_agree(
        seed in 0u64..1000,
        n in 1usize..=6,
        m in 2usize..=8,
        cond in 1.0f64..100.0,
        alpha in 0.5f64..5.0,
        k in 1usize..=10,
        coord in -5.0f64..5.0,
    ) {
        let p = make_quadratic_sum(seed, n, m, cond).unwrap();
        let x0 = start_point(n, coord);
        // A plausible cycle-k state: k-1 cycles' worth of curvature.
        let h_in = p.full_hessian(&x0).unwrap() * (k - 1) as f64;
        let t = run_cycle(&x0, &h_in, &p, alpha, k).unwrap();
        let cf = closed_form_cycle(&x0, &h_in, &p, alpha, k).unwrap();
        for (i, cf_point) in cf.iter().enumerate() {
            let rec = if i + 1 < m { &t.inner_points[i] } else { &t.end };
            let rel = (cf_point - rec).norm() / (1.0 + rec.norm());
            prop_assert!(rel <= 1e-10, "index {i}: relative gap {rel:e}");
        }
    }

    #[test]
    fn outer_step_rearrangement_is_exact(
        seed in 0u64..1000,
        n in 1usize..=6,
        m in 2usize..=8,
        alpha in 0.5f64..5.0,
        k in 1usize..=10,
        coord in -5.0f64..5.0,
        nonquadratic in proptest::bool::ANY,
    ) {
        let p = make_zero_residual_problem(seed, n, m, nonquadratic).unwrap();
        let x0 = start_point(n, coord);
        let h_in = p.full_hessian(&x0).unwrap() * (k - 1) as f64;
        let t = run_cycle(&x0, &h_in, &p, alpha, k).unwrap();
        let residual = outer_step_identity_check(&t, &p).unwrap();
        prop_assert!(
            residual <= 1e-9 * (1.0 + x0.norm()),
            "residual {residual:e} at k={k}"
        );
        // And the error vector recomputed from the points matches the
        // cycle's accumulated one.
        let e = gradient_error(&p, &t.start, &t.inner_points, alpha).unwrap();
        let gap = (&e - &t.grad_error).norm();
        prop_assert!(gap <= 1e-10 * (1.0 + e.norm()));
    }

    #[test]
    fn rate_fit_classification_is_scale_invariant(
        rho in 0.5f64..0.99,
        scale in 1e-8f64..1e8,
        len in 30usize..200,
    ) {
        let series: Vec<f64> = (1..=len).map(|k| rho.powi(k as i32)).collect();
        let scaled: Vec<f64> = series.iter().map(|v| v * scale).collect();
        let a = fit_rate(&series, 0.5).unwrap();
        let b = fit_rate(&scaled, 0.5).unwrap();
        prop_assert!((a.rho_hat - b.rho_hat).abs() <= 1e-9);
        prop_assert!(a.classification == b.classification);
    }
}

#[test]
fn generated_problems_respect_their_declared_bands_at_random_points() {
    use inewt_core::linalg::sym_eig_bounds;
    use inewt_core::problems::{sample_box, ComponentOracle};
    use rand::SeedableRng;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7070);
    for seed in 0..6u64 {
        let problems = [
            make_quadratic_sum(seed, 2 + seed as usize % 4, 3 + seed as usize % 5, 200.0).unwrap(),
            make_zero_residual_problem(seed, 2 + seed as usize % 4, 3, seed % 2 == 0).unwrap(),
        ];
        for p in problems {
            for _ in 0..100 {
                let x = sample_box(&mut rng, p.n, 8.0);
                for comp in &p.components {
                    let (lo, hi) = sym_eig_bounds(&comp.hessian(&x));
                    assert!(lo >= p.eig_lower - 1e-9, "seed {seed}: lo {lo}");
                    assert!(hi <= p.eig_upper + 1e-9, "seed {seed}: hi {hi}");
                }
                if let Some(growth) = p.gradient_growth {
                    let full = p.full_gradient(&x).unwrap().norm();
                    for comp in &p.components {
                        assert!(
                            comp.gradient(&x).norm() <= growth * full + 1e-9,
                            "seed {seed}: gradient growth violated"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn quadratic_one_cycle_exactness_holds_from_fresh_state() {
    for seed in 0..20 {
        let n = 1 + (seed as usize % 6);
        let m = 2 + (seed as usize % 7);
        let p = make_quadratic_sum(seed, n, m, 10.0 + 13.0 * seed as f64).unwrap();
        let xs = p.minimizer.clone().unwrap();
        let x0 = start_point(n, 2.0 + seed as f64 * 0.1);
        let t = run_cycle(&x0, &Matrix::zeros(n, n), &p, 1.0, 1).unwrap();
        assert!(
            (&t.end - &xs).norm() <= 1e-8 * (1.0 + xs.norm()),
            "seed {seed}"
        );
    }
}

#[test]
fn identity_residuals_recorded_by_runs_stay_at_rounding_level() {
    let p = make_zero_residual_problem(77, 4, 6, true).unwrap();
    let rule = StepsizeRule::VariableBisection {
        eta: 0.9,
        tau: 0.5,
        initial_alpha: 1.0,
    };
    let config = RunConfig::new(200, 1e-12);
    let res = run_with_rule(&p, rule, &config).unwrap();
    for s in &res.scalars {
        assert!(
            s.eq_identity_residual <= 1e-9 * (1.0 + s.dist_to_opt.unwrap_or(1.0)),
            "cycle {}: identity residual {:e}",
            s.k,
            s.eq_identity_residual
        );
    }
}

#[test]
fn sublinear_oscillation_run_is_classified_sublinear() {
    // The two-component oscillation example with αᵏ = 1 + √k: the iterate
    // tracks a ~1/√k envelope, so the per-cycle ratio drifts to 1.
    use inewt_core::engine::{run, TraceMode};
    use inewt_core::problems::make_example1;
    use inewt_core::stepsize::SchedulePolicy;

    let p = make_example1(200.0).unwrap();
    let mut policy = SchedulePolicy::new(|k| 1.0 + libm::sqrt(k as f64));
    let config = RunConfig::new(8_000, 0.0)
        .with_start(Vector::from_element(1, 5.0))
        .with_trace_mode(TraceMode::Light);
    let res = run(&p, &mut policy, &config).unwrap();
    let dist: Vec<f64> = res.dist_series().unwrap();
    let fit = fit_rate(&dist, 0.5).unwrap();
    assert_eq!(fit.classification, RateClass::Sublinear);
    assert!(fit.ratio_tail >= 0.99);
    assert!(res.final_x[0].abs() < 0.05);
}
