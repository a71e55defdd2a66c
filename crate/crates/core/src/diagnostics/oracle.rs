//! High-accuracy reference solution of the continuum geodesic equations
//!
//! ```text
//! d/dγ[(c² + 2V/m) ṫ] = 0,    ẍ = −(V′(x)/m) ṫ²
//! ```
//!
//! integrated as a first-order system in `(t, ṫ, x, ẋ)` with an adaptive
//! Dormand–Prince 5(4) pair.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::Problem;

type State = [f64; 4];

/// Dense samples `(t, ṫ, x, ẋ)` on a uniform γ grid.
#[derive(Debug, Clone)]
pub struct OracleSolution {
    pub gamma: Vec<f64>,
    pub states: Vec<State>,
    /// Max difference in `(t, x)` against an independent run at 32 times the
    /// tolerance whose step size is not capped by the sample spacing.
    pub error_bound: f64,
    /// `max |g(x)ṫ − g(x_i)ṫ_i|` along the samples.
    pub first_integral_drift: f64,
}

const TOLERANCE: f64 = 1e-13;

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn rhs(problem: &Problem, y: &State) -> State {
    let [_, tdot, x, xdot] = *y;
    let g = problem.metric(x);
    let dg = problem.metric_derivative(x);
    [tdot, -dg * xdot * tdot / g, xdot, -0.5 * dg * tdot * tdot]
}

fn integrate(problem: &Problem, y0: State, outputs: &[f64], tol: f64) -> Result<Vec<State>> {
    let span = outputs[outputs.len() - 1] - outputs[0];
    let mut y = y0;
    let mut s = outputs[0];
    let mut h = span * 1e-3;
    let mut out = Vec::with_capacity(outputs.len());
    out.push(y);
    for &target in &outputs[1..] {
        while s < target {
            let last = target - s <= h;
            let step = if last { target - s } else { h };
            if step < 1e-14 * span {
                return Err(Error::StepUnderflow { gamma: s });
            }
            let mut k = [[0.0; 4]; 7];
            k[0] = rhs(problem, &y);
            for i in 1..7 {
                let mut yi = y;
                for j in 0..i {
                    for c in 0..4 {
                        yi[c] += step * A[i][j] * k[j][c];
                    }
                }
                k[i] = rhs(problem, &yi);
            }
            let mut y5 = y;
            let mut err = 0.0f64;
            for c in 0..4 {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for i in 0..7 {
                    d5 += B5[i] * k[i][c];
                    d4 += B4[i] * k[i][c];
                }
                y5[c] += step * d5;
                let scale = tol * (1.0 + y[c].abs().max(y5[c].abs()));
                err = err.max((step * (d5 - d4)).abs() / scale);
            }
            if !err.is_finite() {
                return Err(Error::NonFinite { what: "oracle state", index: 0 });
            }
            if err <= 1.0 {
                y = y5;
                s = if last { target } else { s + step };
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !last || err > 1.0 {
                h = step * factor;
            }
        }
        out.push(y);
    }
    Ok(out)
}

pub fn oracle_solve(problem: &Problem, n_dense: usize) -> Result<OracleSolution> {
    if n_dense < 2 {
        return Err(Error::invalid("n_dense", "need at least 2 samples"));
    }
    let (g0, g1) = (problem.grid.gamma_i, problem.grid.gamma_f);
    let gamma: Vec<f64> = (0..n_dense)
        .map(|k| if k + 1 == n_dense { g1 } else { g0 + (g1 - g0) * k as f64 / (n_dense - 1) as f64 })
        .collect();
    let init = &problem.spec.initial;
    let y0 = [init.t_i, init.tdot_i, init.x_i, init.xdot_i];
    let fine = integrate(problem, y0, &gamma, TOLERANCE)?;
    let stride = ((n_dense - 1) / 16).max(1);
    let mut sparse: Vec<usize> = (0..n_dense).step_by(stride).collect();
    if *sparse.last().unwrap() != n_dense - 1 {
        sparse.push(n_dense - 1);
    }
    let sparse_gamma: Vec<f64> = sparse.iter().map(|&k| gamma[k]).collect();
    let coarse = integrate(problem, y0, &sparse_gamma, TOLERANCE * 32.0)?;
    let error_bound = sparse
        .iter()
        .zip(&coarse)
        .map(|(&k, a)| (a[0] - fine[k][0]).abs().max((a[2] - fine[k][2]).abs()))
        .fold(0.0, f64::max);
    let q0 = problem.continuum_charge();
    let first_integral_drift =
        fine.iter().map(|y| (problem.metric(y[2]) * y[1] - q0).abs()).fold(0.0, f64::max);
    Ok(OracleSolution { gamma, states: fine, error_bound, first_integral_drift })
}

impl OracleSolution {
    /// Cubic Hermite interpolation of `(t, ṫ, x, ẋ)`; the rates are interpolated linearly.
    pub fn sample_at(&self, gamma: f64) -> State {
        let n = self.gamma.len();
        let (g0, g1) = (self.gamma[0], self.gamma[n - 1]);
        let pos = ((gamma - g0) / (g1 - g0) * (n - 1) as f64).clamp(0.0, (n - 1) as f64);
        let i = (pos.floor() as usize).min(n - 2);
        let h = self.gamma[i + 1] - self.gamma[i];
        let s = (gamma - self.gamma[i]) / h;
        let (a, b) = (&self.states[i], &self.states[i + 1]);
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        let herm = |p0: f64, m0: f64, p1: f64, m1: f64| h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
        [
            herm(a[0], a[1], b[0], b[1]),
            a[1] + s * (b[1] - a[1]),
            herm(a[2], a[3], b[2], b[3]),
            a[3] + s * (b[3] - a[3]),
        ]
    }

    /// `(t, x)` at the given nodes.
    pub fn at_nodes(&self, nodes: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let samples: Vec<State> = nodes.iter().map(|g| self.sample_at(*g)).collect();
        (
            DVector::from_iterator(nodes.len(), samples.iter().map(|y| y[0])),
            DVector::from_iterator(nodes.len(), samples.iter().map(|y| y[2])),
        )
    }

    pub fn final_time(&self) -> f64 {
        self.states[self.states.len() - 1][0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::ProblemSpec;

    #[test]
    fn free_particle_is_a_ramp() {
        let p = Problem::new(ProblemSpec::free_particle()).unwrap();
        let o = oracle_solve(&p, 101).unwrap();
        for (g, y) in o.gamma.iter().zip(&o.states) {
            assert!((y[2] - (1.0 + 0.1 * g)).abs() < 1e-13);
            assert!((y[0] - g).abs() < 1e-13);
        }
    }

    #[test]
    fn quartic_first_integral_and_final_time() {
        let p = Problem::new(ProblemSpec::paper_quartic()).unwrap();
        let o = oracle_solve(&p, 513).unwrap();
        assert!(o.first_integral_drift <= 1e-10, "{}", o.first_integral_drift);
        assert!(o.error_bound <= 1e-10, "{}", o.error_bound);
        let tf = o.final_time();
        assert!(tf > 0.5 && tf < 1.5, "{tf}");
    }

    #[test]
    fn interpolation_hits_samples() {
        let p = Problem::new(ProblemSpec::paper_linear()).unwrap();
        let o = oracle_solve(&p, 65).unwrap();
        let y = o.sample_at(o.gamma[17]);
        assert!((y[2] - o.states[17][2]).abs() < 1e-15);
        let mid = 0.5 * (o.gamma[17] + o.gamma[18]);
        let fine = oracle_solve(&p, 129).unwrap();
        assert!((o.sample_at(mid)[2] - fine.states[35][2]).abs() < 1e-9);
    }
}
