//! Diagonal-norm SBP operator families.

use nalgebra::{DMatrix, DVector};

use super::{Grid, OperatorOrder, SbpFamily};

/// Second-order interior, first-order boundary closure.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sbp21;

impl SbpFamily for Sbp21 {
    fn name(&self) -> &'static str {
        "sbp21"
    }

    fn order(&self) -> OperatorOrder {
        OperatorOrder::Sbp21
    }

    fn min_nodes(&self) -> usize {
        4
    }

    fn dissipation_order(&self) -> usize {
        2
    }

    fn interior_accuracy(&self) -> usize {
        2
    }

    fn boundary_accuracy(&self) -> usize {
        1
    }

    fn boundary_rows(&self) -> usize {
        1
    }

    fn norm_and_derivative(&self, grid: &Grid) -> (DVector<f64>, DMatrix<f64>) {
        let n = grid.n_gamma;
        let h = grid.d_gamma;
        let mut norm = DVector::from_element(n, h);
        norm[0] = 0.5 * h;
        norm[n - 1] = 0.5 * h;

        let mut d = DMatrix::zeros(n, n);
        d[(0, 0)] = -1.0 / h;
        d[(0, 1)] = 1.0 / h;
        for k in 1..n - 1 {
            d[(k, k - 1)] = -0.5 / h;
            d[(k, k + 1)] = 0.5 / h;
        }
        d[(n - 1, n - 2)] = -1.0 / h;
        d[(n - 1, n - 1)] = 1.0 / h;
        (norm, d)
    }
}

/// Fourth-order interior, second-order boundary closure (4 closure rows).
#[derive(Debug, Clone, Copy, Default)]
pub struct Sbp42;

const SBP42_WEIGHTS: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

const SBP42_CLOSURE: [[f64; 6]; 4] = [
    [-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0, 0.0, 0.0],
    [-0.5, 0.0, 0.5, 0.0, 0.0, 0.0],
    [4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0, 0.0],
    [3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0],
];

const CENTRAL4: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

impl SbpFamily for Sbp42 {
    fn name(&self) -> &'static str {
        "sbp42"
    }

    fn order(&self) -> OperatorOrder {
        OperatorOrder::Sbp42
    }

    fn min_nodes(&self) -> usize {
        8
    }

    fn dissipation_order(&self) -> usize {
        3
    }

    fn interior_accuracy(&self) -> usize {
        4
    }

    fn boundary_accuracy(&self) -> usize {
        2
    }

    fn boundary_rows(&self) -> usize {
        4
    }

    fn norm_and_derivative(&self, grid: &Grid) -> (DVector<f64>, DMatrix<f64>) {
        let n = grid.n_gamma;
        let h = grid.d_gamma;
        let mut norm = DVector::from_element(n, h);
        for (k, w) in SBP42_WEIGHTS.iter().enumerate() {
            norm[k] = w * h;
            norm[n - 1 - k] = w * h;
        }

        let mut d = DMatrix::zeros(n, n);
        for k in 4..n - 4 {
            for (j, c) in CENTRAL4.iter().enumerate() {
                d[(k, k + j - 2)] = *c / h;
            }
        }
        for (i, row) in SBP42_CLOSURE.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                d[(i, j)] = *c / h;
                d[(n - 1 - i, n - 1 - j)] = -*c / h;
            }
        }
        (norm, d)
    }
}
