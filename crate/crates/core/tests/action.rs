//! Gradient and Hessian of the action against finite differences, and the
//! algebraic identities of the doubled action.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use worldline::{Action, PotentialSpec, Problem, ProblemSpec, UnknownVector};

fn potential_strategy() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        Just(PotentialSpec::free()),
        (-1.0f64..1.0).prop_map(PotentialSpec::linear),
        (0.0f64..0.5).prop_map(PotentialSpec::quartic),
        prop::collection::vec(-0.3f64..0.3, 1..6).prop_map(PotentialSpec::polynomial),
    ]
}

fn problem(op: &str, n: usize, potential: PotentialSpec, regularizer: &str) -> Problem {
    let spec = ProblemSpec {
        potential,
        regularizer: regularizer.into(),
        ..ProblemSpec::paper_quartic().with_operator(op).with_n(n)
    };
    Problem::new(spec).unwrap()
}

fn point(n: usize, noise: &[f64]) -> UnknownVector {
    let mut z = UnknownVector::zeros(n);
    let at = |i: usize| noise[i % noise.len()];
    for k in 0..n {
        let g = k as f64 / (n - 1) as f64;
        z.t1[k] = g + 0.1 * at(4 * k);
        z.x1[k] = 1.0 + 0.1 * g + 0.1 * at(4 * k + 1);
        z.t2[k] = g + 0.1 * at(4 * k + 2);
        z.x2[k] = 1.0 + 0.1 * g + 0.1 * at(4 * k + 3);
    }
    for (i, l) in z.lambda.iter_mut().enumerate() {
        *l = at(7 * i + 3);
    }
    z
}

fn branch_symmetric(z: &UnknownVector) -> UnknownVector {
    let mut s = z.clone();
    s.t2 = s.t1.clone();
    s.x2 = s.x1.clone();
    s
}

fn rel(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).amax() / a.amax().max(1.0)
}

fn ops_strategy() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("sbp21"), Just("sbp42")]
}

fn reg_strategy() -> impl Strategy<Value = &'static str> {
    prop_oneof![Just("sat-lift"), Just("dissipation")]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gradient_matches_central_differences(
        op in ops_strategy(), reg in reg_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80), eps_scale in 0.0f64..1.0,
    ) {
        let p = problem(op, 16, pot, reg);
        let action = Action::new(&p, eps_scale * p.grid.d_gamma.powi(2)).unwrap();
        let z = point(16, &noise).pack();
        let g = action.gradient(&z).unwrap();
        let step = 1e-6;
        let fd = DVector::from_fn(z.len(), |i, _| {
            let (mut a, mut b) = (z.clone(), z.clone());
            a[i] += step;
            b[i] -= step;
            (action.value(&a).unwrap() - action.value(&b).unwrap()) / (2.0 * step)
        });
        prop_assert!(rel(&g, &fd) <= 1e-6, "{:e}", rel(&g, &fd));
    }

    #[test]
    fn hessian_matches_gradient_differences(
        op in ops_strategy(), reg in reg_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let p = problem(op, 12, pot, reg);
        let action = Action::new(&p, 0.0).unwrap();
        let z = point(12, &noise).pack();
        let hess = action.hessian(&z).unwrap();
        let step = 1e-6;
        let mut fd = DMatrix::zeros(z.len(), z.len());
        for i in 0..z.len() {
            let (mut a, mut b) = (z.clone(), z.clone());
            a[i] += step;
            b[i] -= step;
            fd.set_column(i, &((action.gradient(&a).unwrap() - action.gradient(&b).unwrap()) / (2.0 * step)));
        }
        let err = (&hess - &fd).amax() / hess.amax().max(1.0);
        prop_assert!(err <= 1e-5, "{:e}", err);
        prop_assert!((&hess - hess.transpose()).amax() <= 1e-12 * hess.amax());
    }

    #[test]
    fn time_shift_changes_value_by_lambda1(
        op in ops_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80), c in -2.0f64..2.0,
    ) {
        // Verbatim for the dissipation operator; the lifted operator is
        // anchored at t_i, so there the identity needs matching branches.
        for (reg, symmetric) in [("dissipation", false), ("sat-lift", true)] {
            let p = problem(op, 16, pot.clone(), reg);
            let mut z = point(16, &noise);
            if symmetric {
                z = branch_symmetric(&z);
            }
            let action = Action::new(&p, 1e-3).unwrap();
            let mut shifted = z.clone();
            shifted.t1.add_scalar_mut(c);
            shifted.t2.add_scalar_mut(c);
            let dv = action.value(&shifted.pack()).unwrap() - action.value(&z.pack()).unwrap();
            let expected = z.lambda[0] * c;
            let scale = action.value(&z.pack()).unwrap().abs().max(1.0);
            prop_assert!((dv - expected).abs() <= 1e-12 * scale.max((expected).abs()), "{} {:e}", reg, dv - expected);
        }
    }

    #[test]
    fn space_shift_changes_value_by_lambda3(
        op in ops_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80), c in -0.5f64..0.5,
    ) {
        // An x-shift moves the metric, so only matching branches cancel it.
        let p = problem(op, 16, pot, "sat-lift");
        let z = branch_symmetric(&point(16, &noise));
        let action = Action::new(&p, 0.0).unwrap();
        let mut shifted = z.clone();
        shifted.x1.add_scalar_mut(c);
        shifted.x2.add_scalar_mut(c);
        let dv = action.value(&shifted.pack()).unwrap() - action.value(&z.pack()).unwrap();
        prop_assert!((dv - z.lambda[2] * c).abs() <= 1e-12 * (z.lambda[2] * c).abs().max(1.0));
    }

    #[test]
    fn swapping_branches_negates_kinetic_part(
        op in ops_strategy(), reg in reg_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let p = problem(op, 16, pot, reg);
        let action = Action::new(&p, 1e-3).unwrap();
        let mut z = point(16, &noise);
        z.lambda = [0.0; 8];
        let mut swapped = z.clone();
        std::mem::swap(&mut swapped.t1, &mut swapped.t2);
        std::mem::swap(&mut swapped.x1, &mut swapped.x2);
        let a = action.value(&z.pack()).unwrap();
        let b = action.value(&swapped.pack()).unwrap();
        prop_assert!((a + b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn lambda_gradient_is_constraint_residual(
        op in ops_strategy(), pot in potential_strategy(),
        noise in prop::collection::vec(-1.0f64..1.0, 80),
    ) {
        let p = problem(op, 16, pot, "sat-lift");
        let z = point(16, &noise);
        let g = Action::new(&p, 0.0).unwrap().gradient(&z.pack()).unwrap();
        let init = &p.spec.initial;
        let d = &p.ops.d;
        let (dt1, dx1, dt2, dx2) = (d * &z.t1, d * &z.x1, d * &z.t2, d * &z.x2);
        let n = 16;
        let expected = [
            z.t1[0] - init.t_i,
            dt1[0] - init.tdot_i,
            z.x1[0] - init.x_i,
            dx1[0] - init.xdot_i,
            z.t1[n - 1] - z.t2[n - 1],
            dt1[n - 1] - dt2[n - 1],
            z.x1[n - 1] - z.x2[n - 1],
            dx1[n - 1] - dx2[n - 1],
        ];
        for (i, e) in expected.iter().enumerate() {
            prop_assert_eq!(g[4 * n + i], *e, "lambda {}", i + 1);
        }
    }
}

#[test]
fn free_t_block_is_the_quadratic_form() {
    let p = problem("sbp42", 16, PotentialSpec::free(), "dissipation");
    let eps = p.grid.d_gamma.powi(3);
    let action = Action::new(&p, eps).unwrap();
    let mut z = point(16, &[0.3, -0.2, 0.7, 0.1, -0.5]);
    z.lambda = [0.0; 8];
    let g = action.gradient(&z.pack()).unwrap();
    let d_reg = worldline::build_regularized(&p.ops, eps).unwrap().d_reg().clone();
    let h = DMatrix::from_diagonal(&p.ops.h_diag);
    let expected = d_reg.transpose() * h * &d_reg * &z.t1;
    assert!((g.rows(0, 16) - expected).amax() < 1e-12);
}
