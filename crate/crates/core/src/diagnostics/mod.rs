//! Quantities evaluated at a solved point: the multiplier-corrected Noether
//! charge, corrected and naive discrete geodesic residuals, and the emergent
//! spacing of the time coordinate.
//!
//! All of them use the plain SBP derivative `D` unless
//! [`DiagnosticDerivative::Regularized`] is selected.

mod convergence;
mod oracle;

use nalgebra::{DMatrix, DVector};

pub use convergence::{convergence_study, fit_order, ConvergenceRow, ConvergenceStudy};
pub use oracle::{oracle_solve, OracleSolution};

use crate::action::{metric_diag, UnknownVector};
use crate::error::{Error, Result};
use crate::problem::{DiagnosticDerivative, Problem};
use crate::sbp::{build_regularized, lifting};

fn derivative(problem: &Problem, epsilon: f64) -> Result<DMatrix<f64>> {
    Ok(match problem.spec.diagnostics.derivative {
        DiagnosticDerivative::Plain => problem.ops.d.clone(),
        DiagnosticDerivative::Regularized => build_regularized(&problem.ops, epsilon)?.d_reg().clone(),
    })
}

fn check(z: &UnknownVector, problem: &Problem) -> Result<()> {
    let n = problem.n();
    for v in [&z.t1, &z.x1, &z.t2, &z.x2] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { what: "branch vector", expected: n, got: v.len() });
        }
    }
    Ok(())
}

/// `Q = (Dt₁) ∘ g(x₁) + λ₂ 𝔡₁ + λ₆ 𝔡_n` on the forward branch.
pub fn noether_charge(z: &UnknownVector, problem: &Problem) -> Result<DVector<f64>> {
    noether_charge_with(z, problem, &problem.ops.d)
}

fn noether_charge_with(z: &UnknownVector, problem: &Problem, d: &DMatrix<f64>) -> Result<DVector<f64>> {
    check(z, problem)?;
    let g = metric_diag(&z.x1, &problem.spec.physics, problem.potential.as_ref());
    let first = lifting(&problem.ops, 1)?.values;
    let last = lifting(&problem.ops, problem.n())?.values;
    Ok((d * &z.t1).component_mul(&g) + first * z.lambda[1] + last * z.lambda[5])
}

/// Charge of the backward branch, `(Dt₂) ∘ g(x₂) + λ₆ 𝔡_n`.
pub fn backward_charge(z: &UnknownVector, problem: &Problem) -> Result<DVector<f64>> {
    check(z, problem)?;
    let g = metric_diag(&z.x2, &problem.spec.physics, problem.potential.as_ref());
    let last = lifting(&problem.ops, problem.n())?.values;
    Ok((&problem.ops.d * &z.t2).component_mul(&g) + last * z.lambda[5])
}

/// `Q − ṫ_i (c² + 2V(x_i)/m)`
pub fn delta_e(q: &DVector<f64>, problem: &Problem) -> DVector<f64> {
    q.add_scalar(-problem.continuum_charge())
}

/// Corrected and naive time residuals: `D(g ∘ Dt) ± λ₆ D𝔡_n` and `D(g ∘ Dt)`.
pub fn geodesic_residual_t(z: &UnknownVector, problem: &Problem) -> Result<(DVector<f64>, DVector<f64>)> {
    geodesic_residual_t_with(z, problem, &problem.ops.d)
}

fn geodesic_residual_t_with(
    z: &UnknownVector,
    problem: &Problem,
    d: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check(z, problem)?;
    let g = metric_diag(&z.x1, &problem.spec.physics, problem.potential.as_ref());
    let naive = d * (d * &z.t1).component_mul(&g);
    let last = lifting(&problem.ops, problem.n())?.values;
    let correction = d * last * (problem.spec.diagnostics.lambda6_sign * z.lambda[5]);
    Ok((&naive + correction, naive))
}

/// Corrected and naive position residuals: `DDx + (V′(x)/m)(Dt)² ∓ λ₈ D𝔡_n`.
pub fn geodesic_residual_x(z: &UnknownVector, problem: &Problem) -> Result<(DVector<f64>, DVector<f64>)> {
    geodesic_residual_x_with(z, problem, &problem.ops.d)
}

fn geodesic_residual_x_with(
    z: &UnknownVector,
    problem: &Problem,
    d: &DMatrix<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check(z, problem)?;
    let dt = d * &z.t1;
    let m = problem.spec.physics.m;
    let force = DVector::from_fn(problem.n(), |k, _| problem.potential.derivative(z.x1[k]) / m * dt[k] * dt[k]);
    let naive = d * (d * &z.x1) + force;
    let last = lifting(&problem.ops, problem.n())?.values;
    let correction = d * last * (problem.spec.diagnostics.lambda8_sign * z.lambda[7]);
    Ok((&naive + correction, naive))
}

/// Emergent spacing of the time coordinate over the uniform γ grid.
#[derive(Debug, Clone)]
pub struct AmrSpacing {
    /// `t[k+1] − t[k]`, length `n − 1`.
    pub dt: DVector<f64>,
    /// `max(dt) / min(dt)`
    pub ratio: f64,
    /// Interval index (0-based) of the smallest time step.
    pub min_index: usize,
    /// Node index (0-based) of the largest `|DDx|`.
    pub max_curvature_index: usize,
    pub monotonic: bool,
}

pub fn amr_spacing(z: &UnknownVector, problem: &Problem) -> Result<AmrSpacing> {
    check(z, problem)?;
    let n = problem.n();
    let t = &z.t1;
    let dt = DVector::from_fn(n - 1, |k, _| t[k + 1] - t[k]);
    let monotonic = dt.iter().all(|v| *v > 0.0);
    if !monotonic {
        log::warn!("time coordinate is not monotonic along the world-line");
    }
    let d = &problem.ops.d;
    let curvature = d * (d * &z.x1);
    let argmax = |v: &DVector<f64>| v.iamax();
    let min_index = dt.imin();
    Ok(AmrSpacing {
        ratio: dt.max() / dt.min(),
        min_index,
        max_curvature_index: argmax(&curvature),
        monotonic,
        dt,
    })
}

#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub q: DVector<f64>,
    pub q_backward: DVector<f64>,
    pub q_continuum: f64,
    pub delta_e: DVector<f64>,
    pub dg_t: DVector<f64>,
    pub dg_x: DVector<f64>,
    pub dg_t_naive: DVector<f64>,
    pub dg_x_naive: DVector<f64>,
    pub branch_gap_t: f64,
    pub branch_gap_x: f64,
    pub amr: AmrSpacing,
    pub lambda: [f64; 8],
}

impl DiagnosticsReport {
    /// `epsilon` is only used when the regularized derivative is selected.
    pub fn compute(z: &UnknownVector, problem: &Problem, epsilon: f64) -> Result<Self> {
        let d = derivative(problem, epsilon)?;
        let q = noether_charge_with(z, problem, &d)?;
        let (dg_t, dg_t_naive) = geodesic_residual_t_with(z, problem, &d)?;
        let (dg_x, dg_x_naive) = geodesic_residual_x_with(z, problem, &d)?;
        Ok(Self {
            q_backward: backward_charge(z, problem)?,
            q_continuum: problem.continuum_charge(),
            delta_e: delta_e(&q, problem),
            q,
            dg_t,
            dg_x,
            dg_t_naive,
            dg_x_naive,
            branch_gap_t: (&z.t1 - &z.t2).amax(),
            branch_gap_x: (&z.x1 - &z.x2).amax(),
            amr: amr_spacing(z, problem)?,
            lambda: z.lambda,
        })
    }

    /// `max_k |Q_k − Q_1|`
    pub fn charge_spread(&self) -> f64 {
        self.q.add_scalar(-self.q[0]).amax()
    }

    /// `max |ΔE|`
    pub fn max_delta_e(&self) -> f64 {
        self.delta_e.amax()
    }
}
