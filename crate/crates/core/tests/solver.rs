//! Newton solver behaviour on the reference configurations.

use worldline::diagnostics::DiagnosticsReport;
use worldline::solver::default_epsilon_ladder;
use worldline::{
    initial_guess, solve, solve_physical, Action, EpsilonPolicy, Problem, ProblemSpec, SolveStatus, SolverSettings,
};

fn quartic(op: &str) -> Problem {
    Problem::new(ProblemSpec::paper_quartic().with_operator(op)).unwrap()
}

#[test]
fn quartic_converges_with_vanishing_lambda2() {
    for op in ["sbp21", "sbp42"] {
        let p = quartic(op);
        let sol = solve_physical(&p, &SolverSettings::default()).unwrap();
        assert!(sol.ok(), "{op}");
        assert_eq!(sol.result.status, SolveStatus::Converged);
        assert!(sol.result.residual_norm <= 1e-12);
        assert!(sol.result.z_star.lambda[1].abs() <= 1e-10);
        assert!(sol.branch_gap_x <= 1e-10 && sol.branch_gap_t <= 1e-10);
        let tf = sol.t[p.n() - 1];
        assert!(tf > 0.5 && tf < 1.5, "{op}: t_f = {tf}");
        assert!(!sol.retried && !sol.multiple_saddles);
    }
}

#[test]
fn residual_decreases_strictly_between_iterates() {
    for op in ["sbp21", "sbp42"] {
        let r = solve(&quartic(op), &initial_guess(&quartic(op)), &SolverSettings::default()).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] < w[0]), "{op}: {:?}", r.history);
    }
}

#[test]
fn constraints_hold_at_convergence() {
    let p = quartic("sbp42");
    let r = solve(&p, &initial_guess(&p), &SolverSettings::default()).unwrap();
    let action = Action::new(&p, r.epsilon_used).unwrap();
    let c = action.constraint_residuals(&r.z_star.pack()).unwrap();
    assert!(c.iter().all(|v| v.abs() <= 1e-12), "{c:?}");
}

#[test]
fn solves_are_bit_identical() {
    let p = quartic("sbp21");
    let a = solve(&p, &initial_guess(&p), &SolverSettings::default()).unwrap();
    let b = solve(&p, &initial_guess(&p), &SolverSettings::default()).unwrap();
    assert_eq!(a.z_star, b.z_star);
    assert_eq!(a.history, b.history);
}

#[test]
fn auto_policy_picks_zero_epsilon() {
    let p = quartic("sbp42");
    let r = solve(&p, &initial_guess(&p), &SolverSettings::default()).unwrap();
    assert_eq!(r.epsilon_used, 0.0);
    assert!(r.condition_estimate < 1e12);
}

#[test]
fn dissipation_operator_gives_checkerboard_charge() {
    // Converges at ε = 0, but the charge alternates in sign between nodes.
    let spec = ProblemSpec { regularizer: "dissipation".into(), ..ProblemSpec::paper_quartic() };
    let p = Problem::new(spec).unwrap();
    let sol = solve_physical(&p, &SolverSettings::default()).unwrap();
    assert!(sol.ok());
    let report = DiagnosticsReport::compute(&sol.result.z_star, &p, sol.result.epsilon_used).unwrap();
    assert!((report.q[0] - 1.5).abs() < 1e-9);
    assert!((report.q[1] + 1.5).abs() < 1e-9);
    assert!(report.charge_spread() > 1.0);
}

#[test]
fn top_ladder_rung_is_rejected_as_ill_conditioned() {
    for op in ["sbp21", "sbp42"] {
        let p = quartic(op);
        let eps = p.grid.d_gamma;
        let settings = SolverSettings { epsilon: EpsilonPolicy::Fixed { value: eps }, ..Default::default() };
        let err = solve(&p, &initial_guess(&p), &settings).unwrap_err();
        assert!(matches!(err, worldline::Error::SingularMatrix { .. }), "{op}: {err}");
    }
}

#[test]
fn continuation_changes_shrink_with_epsilon() {
    for op in ["sbp21", "sbp42"] {
        let p = quartic(op);
        // dγ itself is excluded, see `top_ladder_rung_is_rejected_as_ill_conditioned`.
        let mut ladder = default_epsilon_ladder(&p)[..3].to_vec();
        ladder.reverse();
        let settings = SolverSettings { epsilon: EpsilonPolicy::Ladder { values: ladder.clone() }, ..Default::default() };
        let r = solve(&p, &initial_guess(&p), &settings).unwrap();
        assert_eq!(r.rungs.len(), 3);
        let mut spreads = Vec::new();
        for (k, rung) in r.rungs.iter().enumerate() {
            assert!(rung.converged, "{op} rung {k}");
            if let Some(change) = rung.change_from_previous {
                let eps_prev = ladder[k - 1];
                println!("{op}: eps {:.3e} -> {:.3e}, change {change:.3e}", eps_prev, rung.epsilon);
                assert!(change <= eps_prev, "{op}: change {change:e} for eps {eps_prev:e}");
            }
            let report = DiagnosticsReport::compute(&rung.z, &p, rung.epsilon).unwrap();
            spreads.push(report.charge_spread());
        }
        println!("{op}: charge spread per rung {spreads:?}");
        assert!(spreads.windows(2).all(|w| w[1] < w[0]), "{op}: {spreads:?}");
        assert!(*spreads.last().unwrap() <= 1e-9);
    }
}

#[test]
fn free_particle_is_the_exact_ramp() {
    let p = Problem::new(ProblemSpec::free_particle()).unwrap();
    let sol = solve_physical(&p, &SolverSettings::default()).unwrap();
    assert!(sol.result.iterations <= 3);
    assert!((sol.t[p.n() - 1] - 1.0).abs() <= 1e-13);
    for k in 0..p.n() {
        assert!((sol.x[k] - (1.0 + 0.1 * p.grid.nodes[k])).abs() <= 1e-13);
    }
}

#[test]
fn invalid_settings_are_rejected() {
    let p = quartic("sbp21");
    let bad = SolverSettings { damping: 1.5, ..Default::default() };
    assert!(solve(&p, &initial_guess(&p), &bad).is_err());
    let bad = SolverSettings { epsilon: EpsilonPolicy::Fixed { value: -1.0 }, ..Default::default() };
    assert!(solve(&p, &initial_guess(&p), &bad).is_err());
}
