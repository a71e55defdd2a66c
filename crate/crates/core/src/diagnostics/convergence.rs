use rayon::prelude::*;

use super::oracle::oracle_solve;
use crate::error::{Error, Result};
use crate::problem::{Problem, ProblemSpec};
use crate::solver::{solve_physical, SolverSettings};

#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub n_gamma: usize,
    pub error_t: f64,
    pub error_x: f64,
    /// `max(error_t, error_x)`
    pub error: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Order from this row and the previous one.
    pub local_order: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ConvergenceStudy {
    pub operator: String,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log(error)` against `log(dγ)`.
    pub fitted_order: Option<f64>,
    pub oracle_error_bound: f64,
    pub oracle_drift: f64,
}

/// Least-squares slope of `ln e` against `ln h` over pairs with `e` above rounding level.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && e.is_finite() && *e > 1e-14)
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}

/// Solves `spec` for every grid size in `n_list` and compares against the ODE oracle.
pub fn convergence_study(spec: &ProblemSpec, n_list: &[usize], settings: &SolverSettings) -> Result<ConvergenceStudy> {
    if n_list.is_empty() {
        return Err(Error::invalid("n_list", "must not be empty"));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_list", "must be strictly increasing"));
    }
    for &n in n_list {
        spec.clone().with_n(n).validate()?;
    }
    let reference = Problem::new(spec.clone().with_n(n_list[0]))?;
    let oracle = oracle_solve(&reference, 4097)?;

    let mut rows: Vec<ConvergenceRow> = n_list
        .par_iter()
        .map(|&n| {
            let failed = |msg: String| ConvergenceRow {
                n_gamma: n,
                error_t: f64::NAN,
                error_x: f64::NAN,
                error: f64::NAN,
                iterations: 0,
                converged: false,
                local_order: None,
                failure: Some(msg),
            };
            let problem = match Problem::new(spec.clone().with_n(n)) {
                Ok(p) => p,
                Err(e) => return failed(e.to_string()),
            };
            match solve_physical(&problem, settings) {
                Ok(sol) => {
                    let (t_ref, x_ref) = oracle.at_nodes(&problem.grid.nodes);
                    let error_t = (&sol.t - t_ref).amax();
                    let error_x = (&sol.x - x_ref).amax();
                    ConvergenceRow {
                        n_gamma: n,
                        error_t,
                        error_x,
                        error: error_t.max(error_x),
                        iterations: sol.result.iterations,
                        converged: sol.ok(),
                        local_order: None,
                        failure: (!sol.ok()).then(|| "solver did not reach a physical critical point".to_string()),
                    }
                }
                Err(e) => failed(e.to_string()),
            }
        })
        .collect();

    let span = spec.gamma_f - spec.gamma_i;
    let h = |n: usize| span / (n - 1) as f64;
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        if a.converged && b.converged {
            rows[i].local_order = fit_order(&[(h(a.n_gamma), a.error), (h(b.n_gamma), b.error)]);
        }
    }
    let points: Vec<(f64, f64)> = rows.iter().filter(|r| r.converged).map(|r| (h(r.n_gamma), r.error)).collect();
    Ok(ConvergenceStudy {
        operator: spec.operator.clone(),
        fitted_order: fit_order(&points),
        rows,
        oracle_error_bound: oracle.error_bound,
        oracle_drift: oracle.first_integral_drift,
    })
}
