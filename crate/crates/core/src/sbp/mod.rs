//! Summation-by-parts finite-difference infrastructure.
//!
//! All operators are diagonal-norm: `H = diag(h)` and `HD + (HD)ᵀ = B` with
//! `B = diag(-1, 0, …, 0, 1)`. Matrices are stored dense, which is adequate
//! for the grid sizes used here (n ≤ 512).

mod families;
mod grid;

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use families::{Sbp21, Sbp42};
pub use grid::{build_grid, Grid};

use crate::error::{Error, Result};
use crate::registry::Registry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorOrder {
    Sbp21,
    Sbp42,
}

impl OperatorOrder {
    pub fn name(self) -> &'static str {
        match self {
            OperatorOrder::Sbp21 => "sbp21",
            OperatorOrder::Sbp42 => "sbp42",
        }
    }
}

impl fmt::Display for OperatorOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OperatorOrder::Sbp21 => "SBP21",
            OperatorOrder::Sbp42 => "SBP42",
        })
    }
}

/// A family of diagonal-norm SBP operators, constructed for any grid with at
/// least [`min_nodes`](SbpFamily::min_nodes) nodes.
pub trait SbpFamily: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn order(&self) -> OperatorOrder;
    fn min_nodes(&self) -> usize;
    /// Order `s` of the undivided difference used by dissipation-style regularization.
    fn dissipation_order(&self) -> usize;
    /// Highest monomial degree differentiated exactly by interior rows.
    fn interior_accuracy(&self) -> usize;
    /// Highest monomial degree differentiated exactly by boundary-closure rows.
    fn boundary_accuracy(&self) -> usize;
    /// Number of closure rows at each end.
    fn boundary_rows(&self) -> usize;
    /// Quadrature weights (diagonal of `H`) and derivative matrix `D`.
    fn norm_and_derivative(&self, grid: &Grid) -> (DVector<f64>, DMatrix<f64>);
}

pub type OperatorConstructor = fn() -> Box<dyn SbpFamily>;

fn sbp21() -> Box<dyn SbpFamily> {
    Box::new(Sbp21)
}

fn sbp42() -> Box<dyn SbpFamily> {
    Box::new(Sbp42)
}

/// Built-in operator families: `sbp21` and `sbp42`.
pub fn operators() -> &'static Registry<OperatorConstructor> {
    static REGISTRY: OnceLock<Registry<OperatorConstructor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<OperatorConstructor> = Registry::new("operator");
        r.register("sbp21", &["21", "sbp-21"], "second-order interior, diagonal norm", sbp21);
        r.register("sbp42", &["42", "sbp-42"], "fourth-order interior, diagonal norm", sbp42);
        r
    })
}

pub fn family(order: OperatorOrder) -> Box<dyn SbpFamily> {
    match order {
        OperatorOrder::Sbp21 => Box::new(Sbp21),
        OperatorOrder::Sbp42 => Box::new(Sbp42),
    }
}

/// Derivative, quadrature and regularized derivative on one grid.
///
/// Immutable after construction; share behind an `Arc` across solves.
#[derive(Debug, Clone)]
pub struct SbpOperatorSet {
    pub order: OperatorOrder,
    pub grid: Grid,
    pub d: DMatrix<f64>,
    /// Diagonal of the norm `H`; see [`SbpOperatorSet::h`] for the matrix.
    pub h_diag: DVector<f64>,
    /// Stored only when `ε > 0`; see [`SbpOperatorSet::d_reg`].
    d_reg: Option<DMatrix<f64>>,
    pub epsilon: f64,
    pub dissipation_order: usize,
    pub interior_accuracy: usize,
    pub boundary_accuracy: usize,
    pub boundary_rows: usize,
}

pub fn build_sbp(order: OperatorOrder, grid: &Grid) -> Result<SbpOperatorSet> {
    build_sbp_with(family(order).as_ref(), grid)
}

pub fn build_sbp_with(family: &dyn SbpFamily, grid: &Grid) -> Result<SbpOperatorSet> {
    let n = grid.n_gamma;
    if n < family.min_nodes() {
        return Err(Error::GridTooSmall { operator: family.name(), min: family.min_nodes(), n });
    }
    let (h_diag, mut d) = family.norm_and_derivative(grid);
    zero_row_sums(&mut d);
    Ok(SbpOperatorSet {
        order: family.order(),
        grid: grid.clone(),
        d_reg: None,
        d,
        h_diag,
        epsilon: 0.0,
        dissipation_order: family.dissipation_order(),
        interior_accuracy: family.interior_accuracy(),
        boundary_accuracy: family.boundary_accuracy(),
        boundary_rows: family.boundary_rows(),
    })
}

/// Nudges the largest entry of each row until the row sums to exactly zero
/// in floating point, so that `D·𝟙 = 0` holds without rounding residue.
fn zero_row_sums(d: &mut DMatrix<f64>) {
    let n = d.ncols();
    for i in 0..n {
        // Entries outside the stencil band are zero and do not change the sum.
        let band: Vec<usize> = (i.saturating_sub(8)..(i + 9).min(n)).filter(|j| d[(i, *j)] != 0.0).collect();
        let row_sum = |d: &DMatrix<f64>| band.iter().fold(0.0, |acc, j| acc + d[(i, *j)]);
        let mut by_size = band.clone();
        by_size.sort_by(|a, b| d[(i, *b)].abs().total_cmp(&d[(i, *a)].abs()));
        for pass in 0..8 {
            let sum = row_sum(d);
            if sum == 0.0 {
                break;
            }
            d[(i, by_size[pass % by_size.len()])] -= sum;
        }
    }
}

/// Undivided difference of order `s`: `(n − s) × n`, rows are signed binomial stencils.
pub fn undivided_difference(n: usize, s: usize) -> DMatrix<f64> {
    let rows = n.saturating_sub(s);
    let mut stencil = vec![1.0f64];
    for _ in 0..s {
        let mut next = vec![0.0; stencil.len() + 1];
        for (j, c) in stencil.iter().enumerate() {
            next[j] -= c;
            next[j + 1] += c;
        }
        stencil = next;
    }
    let mut m = DMatrix::zeros(rows, n);
    for r in 0..rows {
        for (j, c) in stencil.iter().enumerate() {
            m[(r, r + j)] = *c;
        }
    }
    m
}

/// Returns a copy of `ops` with `D_reg = D + ε H⁻¹ SᵀS`, `S` the undivided
/// difference of the family's dissipation order.
pub fn build_regularized(ops: &SbpOperatorSet, epsilon: f64) -> Result<SbpOperatorSet> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::NegativeEpsilon(epsilon));
    }
    let n = ops.grid.n_gamma;
    let mut out = ops.clone();
    out.epsilon = epsilon;
    if epsilon == 0.0 {
        out.d_reg = None;
        return Ok(out);
    }
    let s = undivided_difference(n, ops.dissipation_order);
    let mut diss = s.transpose() * &s;
    for i in 0..n {
        let scale = epsilon / ops.h_diag[i];
        diss.row_mut(i).scale_mut(scale);
    }
    let mut d_reg = &ops.d + diss;
    zero_row_sums(&mut d_reg);
    out.d_reg = Some(d_reg);
    Ok(out)
}

/// Discrete delta at node `k` (1-based): `𝔡_k = H⁻¹ e_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftingVector {
    pub k: usize,
    pub values: DVector<f64>,
}

pub fn lifting(ops: &SbpOperatorSet, k: usize) -> Result<LiftingVector> {
    let n = ops.grid.n_gamma;
    if k == 0 || k > n {
        return Err(Error::IndexOutOfRange { k, n });
    }
    let mut values = DVector::zeros(n);
    values[k - 1] = 1.0 / ops.h_diag[k - 1];
    Ok(LiftingVector { k, values })
}

impl SbpOperatorSet {
    pub fn n(&self) -> usize {
        self.grid.n_gamma
    }

    /// Regularized derivative `D_reg`; equal to `D` when `ε = 0`.
    pub fn d_reg(&self) -> &DMatrix<f64> {
        self.d_reg.as_ref().unwrap_or(&self.d)
    }

    /// Quadrature matrix `H` as a dense matrix.
    pub fn h(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.h_diag)
    }

    /// Boundary matrix `B = diag(−1, 0, …, 0, 1)`.
    pub fn b(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut b = DMatrix::zeros(n, n);
        b[(0, 0)] = -1.0;
        b[(n - 1, n - 1)] = 1.0;
        b
    }

    fn b_entry(&self, i: usize, j: usize) -> f64 {
        match (i == j, i) {
            (true, 0) => -1.0,
            (true, k) if k + 1 == self.n() => 1.0,
            _ => 0.0,
        }
    }

    /// `max |HD + (HD)ᵀ − B|`, evaluated in O(n²) using the diagonal norm.
    pub fn sbp_defect(&self) -> f64 {
        const BLOCK: usize = 64;
        let n = self.n();
        let (d, w) = (&self.d, &self.h_diag);
        let mut worst = 0.0f64;
        for jb in (0..n).step_by(BLOCK) {
            for ib in (0..=jb).step_by(BLOCK) {
                for j in jb..(jb + BLOCK).min(n) {
                    for i in ib..(ib + BLOCK).min(j + 1) {
                        let q = w[i] * d[(i, j)] + w[j] * d[(j, i)];
                        worst = worst.max((q - self.b_entry(i, j)).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest error of `D γ^p − p γ^{p−1}` over rows where degree `p` should be exact.
    pub fn accuracy_defect(&self, p: usize) -> f64 {
        self.accuracy_defects(p)[p]
    }

    /// [`accuracy_defect`](Self::accuracy_defect) for every degree `0..=max_p`, from one product.
    pub fn accuracy_defects(&self, max_p: usize) -> Vec<f64> {
        let n = self.n();
        let nodes = &self.grid.nodes;
        let f = DMatrix::from_fn(n, max_p + 1, |k, p| nodes[k].powi(p as i32));
        let df = &self.d * f;
        (0..=max_p)
            .map(|p| {
                let exact = |g: f64| if p == 0 { 0.0 } else { p as f64 * g.powi(p as i32 - 1) };
                let mut worst = 0.0f64;
                for k in 0..n {
                    let boundary = k < self.boundary_rows || k >= n - self.boundary_rows;
                    let limit = if boundary { self.boundary_accuracy } else { self.interior_accuracy };
                    if p <= limit {
                        worst = worst.max((df[(k, p)] - exact(nodes[k])).abs());
                    }
                }
                worst
            })
            .collect()
    }

    /// `|𝟙ᵀ H 𝟙 − (γ_f − γ_i)|`, summed with Neumaier compensation.
    pub fn quadrature_defect(&self) -> f64 {
        let (mut sum, mut carry) = (0.0f64, 0.0f64);
        for w in self.h_diag.iter() {
            let t = sum + w;
            carry += if sum.abs() >= w.abs() { (sum - t) + w } else { (w - t) + sum };
            sum = t;
        }
        (sum + carry - (self.grid.gamma_f - self.grid.gamma_i)).abs()
    }
}
