//! Critical point of the action by damped Newton iteration on its gradient.
//!
//! The doubled action is indefinite, so progress is measured on
//! `‖∇𝔼‖_max` only: a step is accepted when it strictly reduces the
//! gradient norm, otherwise it is halved (by `damping`) down to `min_step`.

use log::{debug, info, warn};
use nalgebra::{DMatrix, DVector, Dyn, LU};
use serde::{Deserialize, Serialize};

use crate::action::{Action, UnknownVector};
use crate::error::{Error, Result};
use crate::problem::Problem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "policy", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EpsilonPolicy {
    /// Smallest of `{0, dγ³, dγ², dγ}` whose Newton matrix is well conditioned.
    #[default]
    Auto,
    Fixed { value: f64 },
    /// Decreasing continuation ladder; each rung is warm-started from the previous one.
    Ladder { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSettings {
    #[serde(default = "defaults::residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "defaults::max_iters")]
    pub max_iters: usize,
    #[serde(default = "defaults::damping")]
    pub damping: f64,
    #[serde(default = "defaults::min_step")]
    pub min_step: f64,
    /// Condition estimate above which a Newton matrix counts as singular.
    #[serde(default = "defaults::max_condition")]
    pub max_condition: f64,
    #[serde(default)]
    pub epsilon: EpsilonPolicy,
}

mod defaults {
    pub fn residual_tol() -> f64 {
        1e-12
    }
    pub fn max_iters() -> usize {
        200
    }
    pub fn damping() -> f64 {
        0.5
    }
    pub fn min_step() -> f64 {
        1e-10
    }
    pub fn max_condition() -> f64 {
        1e12
    }
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            residual_tol: defaults::residual_tol(),
            max_iters: defaults::max_iters(),
            damping: defaults::damping(),
            min_step: defaults::min_step(),
            max_condition: defaults::max_condition(),
            epsilon: EpsilonPolicy::Auto,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("solver.residual_tol", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping < 1.0) {
            return Err(Error::invalid("solver.damping", "must lie in (0, 1)"));
        }
        if !(self.min_step > 0.0 && self.min_step <= 1.0) {
            return Err(Error::invalid("solver.min_step", "must lie in (0, 1]"));
        }
        if self.max_iters == 0 {
            return Err(Error::invalid("solver.max_iters", "must be at least 1"));
        }
        if !(self.max_condition > 1.0) {
            return Err(Error::invalid("solver.max_condition", "must exceed 1"));
        }
        match &self.epsilon {
            EpsilonPolicy::Auto => {}
            EpsilonPolicy::Fixed { value } => {
                if !(*value >= 0.0) || !value.is_finite() {
                    return Err(Error::invalid("solver.epsilon.value", "must be finite and non-negative"));
                }
            }
            EpsilonPolicy::Ladder { values } => {
                if values.is_empty() {
                    return Err(Error::invalid("solver.epsilon.values", "ladder must not be empty"));
                }
                if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return Err(Error::invalid("solver.epsilon.values", "must be finite and non-negative"));
                }
                if values.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(Error::invalid("solver.epsilon.values", "must be strictly decreasing"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    LineSearchStalled,
}

/// One rung of an ε-continuation.
#[derive(Debug, Clone)]
pub struct Rung {
    pub epsilon: f64,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    /// `‖z_k − z_{k−1}‖_max` against the previous rung's solution.
    pub change_from_previous: Option<f64>,
    pub z: UnknownVector,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub z_star: UnknownVector,
    pub residual_norm: f64,
    pub iterations: usize,
    pub epsilon_used: f64,
    pub converged: bool,
    pub status: SolveStatus,
    /// `‖∇𝔼‖_max` at the start and after every accepted step.
    pub history: Vec<f64>,
    /// 1-norm condition estimate of the Newton matrix at the starting point.
    pub condition_estimate: f64,
    pub rungs: Vec<Rung>,
}

/// Straight-line world-line through the initial data with all multipliers zero.
pub fn initial_guess(problem: &Problem) -> UnknownVector {
    let init = &problem.spec.initial;
    let g0 = problem.grid.gamma_i;
    let t = problem.grid.nodes.map(|g| init.t_i + init.tdot_i * (g - g0));
    let x = problem.grid.nodes.map(|g| init.x_i + init.xdot_i * (g - g0));
    UnknownVector { t1: t.clone(), x1: x.clone(), t2: t, x2: x, lambda: [0.0; 8] }
}

fn first_non_finite(v: &DVector<f64>) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

/// Hager/Higham estimate of `‖A⁻¹‖₁` for symmetric `A` from its LU factors.
fn inverse_norm1_estimate(lu: &LU<f64, Dyn, Dyn>, n: usize) -> Option<f64> {
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    let mut estimate = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x)?;
        estimate = y.lp_norm(1);
        let xi = y.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
        let z = lu.solve(&xi)?;
        let (j, zmax) = z.iter().enumerate().fold((0, 0.0f64), |acc, (i, v)| {
            if v.abs() > acc.1 { (i, v.abs()) } else { acc }
        });
        if zmax <= z.dot(&x) {
            break;
        }
        x = DVector::zeros(n);
        x[j] = 1.0;
    }
    Some(estimate)
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.lp_norm(1)).fold(0.0, f64::max)
}

/// 1-norm condition estimate of the Newton matrix; infinite when singular.
pub fn condition_estimate(hessian: &DMatrix<f64>) -> f64 {
    let n = hessian.nrows();
    let lu = hessian.clone().lu();
    match inverse_norm1_estimate(&lu, n) {
        Some(inv) if inv.is_finite() => norm1(hessian) * inv,
        _ => f64::INFINITY,
    }
}

/// Newton iteration at the fixed ε of `action`.
pub fn newton_solve(z0: &UnknownVector, action: &Action<'_>, settings: &SolverSettings) -> Result<SolveResult> {
    settings.validate()?;
    let n = action.problem().n();
    let mut z = z0.pack();
    if z.len() != action.len() {
        return Err(Error::DimensionMismatch { what: "initial guess", expected: action.len(), got: z.len() });
    }
    let mut grad = action.gradient(&z)?;
    if let Some(index) = first_non_finite(&grad) {
        return Err(Error::NonFinite { what: "gradient", index });
    }
    let mut residual = grad.amax();
    let mut history = vec![residual];
    let mut iterations = 0;
    let mut condition = f64::NAN;
    let epsilon = action.epsilon();

    let status = loop {
        if residual <= settings.residual_tol {
            break SolveStatus::Converged;
        }
        if iterations >= settings.max_iters {
            break SolveStatus::MaxIterations;
        }
        let hess = action.hessian(&z)?;
        if let Some(index) = hess.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "hessian", index });
        }
        let lu = hess.clone().lu();
        if iterations == 0 {
            condition = inverse_norm1_estimate(&lu, hess.nrows()).map_or(f64::INFINITY, |i| norm1(&hess) * i);
            if !(condition < settings.max_condition) {
                return Err(Error::SingularMatrix { epsilon });
            }
        }
        let step = lu.solve(&(-&grad)).ok_or(Error::SingularMatrix { epsilon })?;
        if first_non_finite(&step).is_some() {
            return Err(Error::SingularMatrix { epsilon });
        }

        let mut alpha = 1.0;
        let accepted = loop {
            let trial = &z + &step * alpha;
            let g = action.gradient(&trial)?;
            if first_non_finite(&g).is_none() {
                let r = g.amax();
                if r < residual {
                    break Some((trial, g, r));
                }
            }
            alpha *= settings.damping;
            if alpha < settings.min_step {
                break None;
            }
        };
        match accepted {
            Some((trial, g, r)) => {
                debug!("newton iter {}: |grad| {:.3e} -> {:.3e} (step {alpha})", iterations + 1, residual, r);
                z = trial;
                grad = g;
                residual = r;
                iterations += 1;
                history.push(residual);
            }
            None => break SolveStatus::LineSearchStalled,
        }
    };

    if status != SolveStatus::Converged {
        warn!("newton stopped without convergence ({status:?}) at |grad| = {residual:.3e}");
    }
    Ok(SolveResult {
        z_star: UnknownVector::unpack(&z, n)?,
        residual_norm: residual,
        iterations,
        epsilon_used: epsilon,
        converged: status == SolveStatus::Converged,
        status,
        history,
        condition_estimate: condition,
        rungs: Vec::new(),
    })
}

/// Default ε candidates `{0, dγ³, dγ², dγ}`, ascending.
pub fn default_epsilon_ladder(problem: &Problem) -> [f64; 4] {
    let h = problem.grid.d_gamma;
    [0.0, h * h * h, h * h, h]
}

/// Solves from `z0` under the ε policy of `settings`.
pub fn solve(problem: &Problem, z0: &UnknownVector, settings: &SolverSettings) -> Result<SolveResult> {
    settings.validate()?;
    match &settings.epsilon {
        EpsilonPolicy::Fixed { value } => newton_solve(z0, &Action::new(problem, *value)?, settings),
        EpsilonPolicy::Auto => {
            let ladder = default_epsilon_ladder(problem);
            for eps in ladder {
                let action = Action::new(problem, eps)?;
                match newton_solve(z0, &action, settings) {
                    Ok(result) => {
                        info!(
                            "epsilon = {eps:e} selected (condition estimate {:.2e})",
                            result.condition_estimate
                        );
                        return Ok(result);
                    }
                    Err(Error::SingularMatrix { .. }) => {
                        info!("Newton matrix singular at epsilon = {eps:e}; ascending the ladder");
                    }
                    Err(e) => return Err(e),
                }
            }
            Err(Error::SingularMatrix { epsilon: ladder[3] })
        }
        EpsilonPolicy::Ladder { values } => {
            let mut z = z0.clone();
            let mut rungs: Vec<Rung> = Vec::with_capacity(values.len());
            let mut last: Option<SolveResult> = None;
            let mut total_iters = 0;
            for eps in values {
                let result = newton_solve(&z, &Action::new(problem, *eps)?, settings)?;
                let change = rungs.last().map(|r| max_difference(&r.z, &result.z_star));
                info!(
                    "continuation rung epsilon = {eps:e}: {} iterations, |grad| {:.2e}",
                    result.iterations, result.residual_norm
                );
                total_iters += result.iterations;
                rungs.push(Rung {
                    epsilon: *eps,
                    iterations: result.iterations,
                    residual_norm: result.residual_norm,
                    converged: result.converged,
                    change_from_previous: change,
                    z: result.z_star.clone(),
                });
                z = result.z_star.clone();
                last = Some(result);
            }
            let mut result = last.expect("validated non-empty ladder");
            result.iterations = total_iters;
            result.rungs = rungs;
            Ok(result)
        }
    }
}

/// `max |a − b|` over all packed unknowns.
pub fn max_difference(a: &UnknownVector, b: &UnknownVector) -> f64 {
    (a.pack() - b.pack()).amax()
}

/// Converged solve in the physical limit, with the forward branch as trajectory.
#[derive(Debug, Clone)]
pub struct PhysicalSolution {
    pub result: SolveResult,
    pub gamma: DVector<f64>,
    pub t: DVector<f64>,
    pub x: DVector<f64>,
    pub branch_gap_t: f64,
    pub branch_gap_x: f64,
    /// Branch gaps within `100 · residual_tol`.
    pub physical: bool,
    pub retried: bool,
    /// Both attempts converged, to different critical points.
    pub multiple_saddles: bool,
}

impl PhysicalSolution {
    pub fn ok(&self) -> bool {
        self.result.converged && self.physical
    }
}

fn branch_gaps(z: &UnknownVector) -> (f64, f64) {
    ((&z.t1 - &z.t2).amax(), (&z.x1 - &z.x2).amax())
}

fn perturbed_guess(problem: &Problem) -> UnknownVector {
    let mut z = initial_guess(problem);
    let n = problem.n();
    for k in 1..n {
        let s = ((k + 1) as f64).sin();
        z.t2[k] += 1e-3 * s;
        z.x2[k] += 1e-3 * s * s;
    }
    z
}

pub fn solve_physical(problem: &Problem, settings: &SolverSettings) -> Result<PhysicalSolution> {
    let limit = 100.0 * settings.residual_tol;
    let first = solve(problem, &initial_guess(problem), settings)?;
    let (gt, gx) = branch_gaps(&first.z_star);
    let mut retried = false;
    let mut multiple_saddles = false;
    let chosen = if first.converged && gt <= limit && gx <= limit {
        first
    } else {
        warn!("branch gap (t {gt:.2e}, x {gx:.2e}) above {limit:.1e}; retrying from a perturbed guess");
        retried = true;
        let second = solve(problem, &perturbed_guess(problem), settings)?;
        if first.converged && second.converged && max_difference(&first.z_star, &second.z_star) > 1e-8 {
            warn!("two distinct critical points found");
            multiple_saddles = true;
        }
        let (gt2, gx2) = branch_gaps(&second.z_star);
        if second.converged && gt2 <= limit && gx2 <= limit {
            second
        } else {
            first
        }
    };
    let (branch_gap_t, branch_gap_x) = branch_gaps(&chosen.z_star);
    Ok(PhysicalSolution {
        gamma: problem.grid.nodes.clone(),
        t: chosen.z_star.t1.clone(),
        x: chosen.z_star.x1.clone(),
        physical: branch_gap_t <= limit && branch_gap_x <= limit,
        result: chosen,
        branch_gap_t,
        branch_gap_x,
        retried,
        multiple_saddles,
    })
}
