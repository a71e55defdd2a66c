//! The doubled-branch constrained world-line action.
//!
//! ```text
//! 𝔼 = ½[(D̄t₁)ᵀ d[g(x₁)] H (D̄t₁) − (D̄x₁)ᵀ H (D̄x₁)] − (same for branch 2)
//!   + λ₁(t₁[1] − t_i) + λ₂((Dt₁)[1] − ṫ_i) + λ₃(x₁[1] − x_i) + λ₄((Dx₁)[1] − ẋ_i)
//!   + λ₅(t₁[n] − t₂[n]) + λ₆((Dt₁)[n] − (Dt₂)[n])
//!   + λ₇(x₁[n] − x₂[n]) + λ₈((Dx₁)[n] − (Dx₂)[n])
//! ```
//!
//! with `g(x) = c² + 2V(x)/m`, `D̄` the kinetic operator of the selected
//! regularizer and plain `D` in every constraint.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::problem::{PhysicsParams, Problem};
use crate::regularizer::KineticOperator;

/// Number of Lagrange multipliers.
pub const N_MULTIPLIERS: usize = 8;

/// Unknowns of the action, packed as `(t₁, x₁, t₂, x₂, λ₁ … λ₈)`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownVector {
    pub t1: DVector<f64>,
    pub x1: DVector<f64>,
    pub t2: DVector<f64>,
    pub x2: DVector<f64>,
    pub lambda: [f64; N_MULTIPLIERS],
}

impl UnknownVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            t1: DVector::zeros(n),
            x1: DVector::zeros(n),
            t2: DVector::zeros(n),
            x2: DVector::zeros(n),
            lambda: [0.0; N_MULTIPLIERS],
        }
    }

    pub fn n(&self) -> usize {
        self.t1.len()
    }

    pub fn len(&self) -> usize {
        packed_len(self.n())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pack(&self) -> DVector<f64> {
        let n = self.n();
        let mut z = DVector::zeros(packed_len(n));
        z.rows_mut(0, n).copy_from(&self.t1);
        z.rows_mut(n, n).copy_from(&self.x1);
        z.rows_mut(2 * n, n).copy_from(&self.t2);
        z.rows_mut(3 * n, n).copy_from(&self.x2);
        for (i, l) in self.lambda.iter().enumerate() {
            z[4 * n + i] = *l;
        }
        z
    }

    pub fn unpack(z: &DVector<f64>, n: usize) -> Result<Self> {
        if z.len() != packed_len(n) {
            return Err(Error::DimensionMismatch {
                what: "unknown vector",
                expected: packed_len(n),
                got: z.len(),
            });
        }
        let mut lambda = [0.0; N_MULTIPLIERS];
        lambda.copy_from_slice(&z.as_slice()[4 * n..]);
        Ok(Self {
            t1: z.rows(0, n).into_owned(),
            x1: z.rows(n, n).into_owned(),
            t2: z.rows(2 * n, n).into_owned(),
            x2: z.rows(3 * n, n).into_owned(),
            lambda,
        })
    }

    fn check(&self, n: usize) -> Result<()> {
        for v in [&self.t1, &self.x1, &self.t2, &self.x2] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { what: "branch vector", expected: n, got: v.len() });
            }
        }
        Ok(())
    }
}

pub fn packed_len(n: usize) -> usize {
    4 * n + N_MULTIPLIERS
}

/// Diagonal metric weights `c² + 2V(x_k)/m`.
pub fn metric_diag(x: &DVector<f64>, physics: &PhysicsParams, potential: &dyn Potential) -> DVector<f64> {
    let c2 = physics.c * physics.c;
    x.map(|xk| c2 + 2.0 * potential.value(xk) / physics.m)
}

#[derive(Debug, Clone)]
pub struct ActionEvaluation {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// The action of one problem at a fixed regularization strength.
#[derive(Debug, Clone)]
pub struct Action<'a> {
    problem: &'a Problem,
    kinetic: KineticOperator,
    constraints: DMatrix<f64>,
    targets: [f64; N_MULTIPLIERS],
}

impl<'a> Action<'a> {
    pub fn new(problem: &'a Problem, epsilon: f64) -> Result<Self> {
        let kinetic = problem.regularizer.kinetic_operator(&problem.ops, epsilon)?;
        let n = problem.n();
        let d = &problem.ops.d;
        let (t1, x1, t2, x2) = (0, n, 2 * n, 3 * n);
        let last = n - 1;
        let mut c = DMatrix::zeros(N_MULTIPLIERS, 4 * n);
        c[(0, t1)] = 1.0;
        c.view_mut((1, t1), (1, n)).copy_from(&d.row(0));
        c[(2, x1)] = 1.0;
        c.view_mut((3, x1), (1, n)).copy_from(&d.row(0));
        c[(4, t1 + last)] = 1.0;
        c[(4, t2 + last)] = -1.0;
        c.view_mut((5, t1), (1, n)).copy_from(&d.row(last));
        c.view_mut((5, t2), (1, n)).copy_from(&(-d.row(last)));
        c[(6, x1 + last)] = 1.0;
        c[(6, x2 + last)] = -1.0;
        c.view_mut((7, x1), (1, n)).copy_from(&d.row(last));
        c.view_mut((7, x2), (1, n)).copy_from(&(-d.row(last)));
        let init = &problem.spec.initial;
        let targets = [init.t_i, init.tdot_i, init.x_i, init.xdot_i, 0.0, 0.0, 0.0, 0.0];
        Ok(Self { problem, kinetic, constraints: c, targets })
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    pub fn epsilon(&self) -> f64 {
        self.kinetic.epsilon
    }

    pub fn kinetic(&self) -> &KineticOperator {
        &self.kinetic
    }

    /// Jacobian of the eight constraints with respect to `(t₁, x₁, t₂, x₂)`.
    pub fn constraint_jacobian(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        packed_len(self.problem.n())
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn check_len(&self, z: &DVector<f64>) -> Result<()> {
        if z.len() != self.len() {
            return Err(Error::DimensionMismatch { what: "unknown vector", expected: self.len(), got: z.len() });
        }
        Ok(())
    }

    /// Constraint violations, which are also the λ-block of the gradient.
    pub fn constraint_residuals(&self, z: &DVector<f64>) -> Result<[f64; N_MULTIPLIERS]> {
        self.check_len(z)?;
        let n = self.problem.n();
        let d = &self.problem.ops.d;
        let (t1, x1, t2, x2) = (z.rows(0, n), z.rows(n, n), z.rows(2 * n, n), z.rows(3 * n, n));
        let (dt1, dx1, dt2, dx2) = (d * t1, d * x1, d * t2, d * x2);
        let last = n - 1;
        let values = [
            t1[0],
            dt1[0],
            x1[0],
            dx1[0],
            t1[last] - t2[last],
            dt1[last] - dt2[last],
            x1[last] - x2[last],
            dx1[last] - dx2[last],
        ];
        Ok(std::array::from_fn(|i| values[i] - self.targets[i]))
    }

    fn branch(&self, z: &DVector<f64>, b: usize) -> (DVector<f64>, DVector<f64>) {
        let n = self.problem.n();
        (z.rows(2 * b * n, n).into_owned(), z.rows((2 * b + 1) * n, n).into_owned())
    }

    pub fn value(&self, z: &DVector<f64>) -> Result<f64> {
        self.check_len(z)?;
        let p = self.problem;
        let h = &p.ops.h_diag;
        let init = &p.spec.initial;
        let mut value = 0.0;
        for (b, sign) in [(0, 1.0), (1, -1.0)] {
            let (t, x) = self.branch(z, b);
            let vt = self.kinetic.apply(&t, init.t_i);
            let vx = self.kinetic.apply(&x, init.x_i);
            let mut kin = 0.0;
            for k in 0..t.len() {
                kin += h[k] * (p.metric(x[k]) * vt[k] * vt[k] - vx[k] * vx[k]);
            }
            value += sign * 0.5 * kin;
        }
        let r = self.constraint_residuals(z)?;
        let n = p.n();
        for i in 0..N_MULTIPLIERS {
            value += z[4 * n + i] * r[i];
        }
        Ok(value)
    }

    pub fn gradient(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_len(z)?;
        let p = self.problem;
        let n = p.n();
        let h = &p.ops.h_diag;
        let init = &p.spec.initial;
        let jt = self.kinetic.linear.transpose();
        let mut grad = DVector::zeros(self.len());
        for (b, sign) in [(0, 1.0), (1, -1.0)] {
            let (t, x) = self.branch(z, b);
            let vt = self.kinetic.apply(&t, init.t_i);
            let vx = self.kinetic.apply(&x, init.x_i);
            let wt = DVector::from_fn(n, |k, _| h[k] * p.metric(x[k]) * vt[k]);
            let wx = vx.component_mul(h);
            let gt = &jt * wt * sign;
            let force = DVector::from_fn(n, |k, _| 0.5 * h[k] * p.metric_derivative(x[k]) * vt[k] * vt[k]);
            let gx = (force - &jt * wx) * sign;
            grad.rows_mut(2 * b * n, n).copy_from(&gt);
            grad.rows_mut((2 * b + 1) * n, n).copy_from(&gx);
        }
        let lambda = z.rows(4 * n, N_MULTIPLIERS);
        let mut primal = grad.rows_mut(0, 4 * n);
        primal += self.constraints.transpose() * lambda;
        let r = self.constraint_residuals(z)?;
        for i in 0..N_MULTIPLIERS {
            grad[4 * n + i] = r[i];
        }
        Ok(grad)
    }

    pub fn hessian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_len(z)?;
        let p = self.problem;
        let n = p.n();
        let h = &p.ops.h_diag;
        let init = &p.spec.initial;
        let j = &self.kinetic.linear;
        let jt = j.transpose();
        let mut hess = DMatrix::zeros(self.len(), self.len());
        // JᵀHJ is shared by both branches' position blocks
        let mut hj = j.clone();
        for k in 0..n {
            hj.row_mut(k).scale_mut(h[k]);
        }
        let jthj = &jt * &hj;
        for (b, sign) in [(0, 1.0), (1, -1.0)] {
            let (t, x) = self.branch(z, b);
            let vt = self.kinetic.apply(&t, init.t_i);
            let (it, ix) = (2 * b * n, (2 * b + 1) * n);

            let mut wj = j.clone();
            for k in 0..n {
                wj.row_mut(k).scale_mut(h[k] * p.metric(x[k]));
            }
            let tt = &jt * wj * sign;
            hess.view_mut((it, it), (n, n)).copy_from(&tt);

            let mut tx = jt.clone();
            for k in 0..n {
                tx.column_mut(k).scale_mut(sign * h[k] * p.metric_derivative(x[k]) * vt[k]);
            }
            hess.view_mut((it, ix), (n, n)).copy_from(&tx);
            hess.view_mut((ix, it), (n, n)).copy_from(&tx.transpose());

            let mut xx = -&jthj;
            for k in 0..n {
                xx[(k, k)] += 0.5 * h[k] * p.metric_second_derivative(x[k]) * vt[k] * vt[k];
            }
            hess.view_mut((ix, ix), (n, n)).copy_from(&(xx * sign));
        }
        hess.view_mut((4 * n, 0), (N_MULTIPLIERS, 4 * n)).copy_from(&self.constraints);
        hess.view_mut((0, 4 * n), (4 * n, N_MULTIPLIERS)).copy_from(&self.constraints.transpose());
        Ok(hess)
    }

    pub fn evaluate(&self, z: &DVector<f64>) -> Result<ActionEvaluation> {
        Ok(ActionEvaluation { value: self.value(z)?, gradient: self.gradient(z)?, hessian: self.hessian(z)? })
    }
}

fn packed(z: &UnknownVector, problem: &Problem) -> Result<DVector<f64>> {
    z.check(problem.n())?;
    Ok(z.pack())
}

pub fn assemble_action(z: &UnknownVector, problem: &Problem, epsilon: f64) -> Result<f64> {
    Action::new(problem, epsilon)?.value(&packed(z, problem)?)
}

pub fn assemble_gradient(z: &UnknownVector, problem: &Problem, epsilon: f64) -> Result<DVector<f64>> {
    Action::new(problem, epsilon)?.gradient(&packed(z, problem)?)
}

pub fn assemble_hessian(z: &UnknownVector, problem: &Problem, epsilon: f64) -> Result<DMatrix<f64>> {
    Action::new(problem, epsilon)?.hessian(&packed(z, problem)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::PotentialSpec;
    use crate::problem::ProblemSpec;

    fn quartic(n: usize) -> Problem {
        Problem::new(ProblemSpec::paper_quartic().with_n(n)).unwrap()
    }

    fn symmetric_point(n: usize) -> UnknownVector {
        let mut z = UnknownVector::zeros(n);
        for k in 0..n {
            let g = k as f64 / (n - 1) as f64;
            z.t1[k] = 0.1 + g + 0.2 * g * g;
            z.x1[k] = 1.0 + 0.1 * g - 0.3 * g * g;
        }
        z.t2 = z.t1.clone();
        z.x2 = z.x1.clone();
        z
    }

    #[test]
    fn metric_diag_examples() {
        let phys = PhysicsParams::default();
        let q = PotentialSpec::quartic(0.25).build().unwrap();
        let m = metric_diag(&DVector::from_element(4, 1.0), &phys, q.as_ref());
        assert!(m.iter().all(|v| *v == 1.5));
        let f = PotentialSpec::free().build().unwrap();
        let phys2 = PhysicsParams { c: 2.0, m: 3.0 };
        assert!(metric_diag(&DVector::from_element(3, 0.7), &phys2, f.as_ref()).iter().all(|v| *v == 4.0));
        let l = PotentialSpec::linear(0.25).build().unwrap();
        assert!(metric_diag(&DVector::zeros(3), &phys, l.as_ref()).iter().all(|v| *v == 1.0));
    }

    #[test]
    fn pack_unpack_roundtrip() {
        let mut z = symmetric_point(9);
        z.lambda = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let packed = z.pack();
        assert_eq!(packed.len(), 44);
        assert_eq!(packed[36], 1.0);
        assert_eq!(UnknownVector::unpack(&packed, 9).unwrap(), z);
        assert!(UnknownVector::unpack(&packed, 8).is_err());
    }

    #[test]
    fn branches_cancel_without_multipliers() {
        let p = quartic(16);
        let z = symmetric_point(16);
        assert_eq!(assemble_action(&z, &p, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn only_lambda1_term_survives() {
        let p = quartic(16);
        let mut z = symmetric_point(16);
        z.t1[0] = 0.3;
        z.t2[0] = 0.3;
        z.lambda[0] = 2.0;
        let v = assemble_action(&z, &p, 0.0).unwrap();
        assert!((v - 0.6).abs() < 1e-15, "{v}");
    }

    #[test]
    fn symmetric_shift_changes_value_by_lambda1_c() {
        for regularizer in ["sat-lift", "dissipation"] {
            let mut spec = ProblemSpec::paper_quartic().with_n(12);
            spec.regularizer = regularizer.into();
            let p = Problem::new(spec).unwrap();
            let mut z = symmetric_point(12);
            z.lambda = [0.7, -0.2, 0.4, 0.1, 0.3, -0.5, 0.9, 0.2];
            let c = 0.37;
            let mut s = z.clone();
            s.t1.add_scalar_mut(c);
            s.t2.add_scalar_mut(c);
            let dv = assemble_action(&s, &p, 0.0).unwrap() - assemble_action(&z, &p, 0.0).unwrap();
            assert!((dv - z.lambda[0] * c).abs() < 1e-12, "{regularizer}: {dv}");
        }
    }

    #[test]
    fn lambda_block_is_constraint_violation() {
        let p = quartic(10);
        let mut z = symmetric_point(10);
        z.t2[9] += 0.25;
        let g = assemble_gradient(&z, &p, 0.0).unwrap();
        let d = &p.ops.d;
        let dt1 = d * &z.t1;
        assert_eq!(g[40], z.t1[0] - 0.0);
        assert_eq!(g[41], dt1[0] - 1.0);
        assert_eq!(g[42], z.x1[0] - 1.0);
        assert_eq!(g[44], z.t1[9] - z.t2[9]);
    }

    #[test]
    fn free_t_block_is_quadratic_form() {
        let mut spec = ProblemSpec::free_particle().with_n(10);
        spec.physics.c = 1.7;
        let p = Problem::new(spec).unwrap();
        let mut z = symmetric_point(10);
        z.t1[0] = 0.0; // lift inactive
        let a = Action::new(&p, 0.0).unwrap();
        let g = a.gradient(&z.pack()).unwrap();
        let j = &a.kinetic().linear;
        let expected = j.transpose() * p.ops.h() * j * &z.t1 * (1.7 * 1.7);
        assert!((g.rows(0, 10) - expected).amax() < 1e-12);
    }

    #[test]
    fn free_hessian_is_constant() {
        let p = Problem::new(ProblemSpec::free_particle().with_n(10)).unwrap();
        let a = Action::new(&p, 0.0).unwrap();
        let h1 = a.hessian(&symmetric_point(10).pack()).unwrap();
        let mut z = symmetric_point(10);
        z.x2.add_scalar_mut(3.0);
        z.t1 *= 2.0;
        let h2 = a.hessian(&z.pack()).unwrap();
        assert_eq!(h1, h2);
    }

    #[test]
    fn hessian_is_symmetric() {
        let p = quartic(14);
        let mut z = symmetric_point(14);
        z.x2.add_scalar_mut(0.05);
        let hs = assemble_hessian(&z, &p, 1e-3).unwrap();
        assert!((&hs - hs.transpose()).amax() <= 1e-12 * hs.amax());
    }

    #[test]
    fn dimension_mismatch_reported() {
        let p = quartic(10);
        let z = symmetric_point(11);
        assert!(matches!(assemble_action(&z, &p, 0.0), Err(Error::DimensionMismatch { .. })));
        let a = Action::new(&p, 0.0).unwrap();
        assert!(a.gradient(&DVector::zeros(3)).is_err());
    }
}
