use nalgebra::DVector;

use crate::error::{Error, Result};

/// Uniform mesh of the world-line parameter γ.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_gamma: usize,
    pub gamma_i: f64,
    pub gamma_f: f64,
    pub d_gamma: f64,
    pub nodes: DVector<f64>,
}

pub fn build_grid(gamma_i: f64, gamma_f: f64, n_gamma: usize) -> Result<Grid> {
    if !(gamma_i.is_finite() && gamma_f.is_finite()) {
        return Err(Error::InvalidGrid("bounds must be finite".into()));
    }
    if gamma_f <= gamma_i {
        return Err(Error::InvalidGrid(format!(
            "gamma_f ({gamma_f}) must exceed gamma_i ({gamma_i})"
        )));
    }
    if n_gamma < 2 {
        return Err(Error::InvalidGrid(format!("need at least 2 nodes, got {n_gamma}")));
    }
    let d_gamma = (gamma_f - gamma_i) / (n_gamma - 1) as f64;
    let mut nodes = DVector::from_fn(n_gamma, |k, _| gamma_i + k as f64 * d_gamma);
    nodes[n_gamma - 1] = gamma_f;
    Ok(Grid { n_gamma, gamma_i, gamma_f, d_gamma, nodes })
}

impl Grid {
    pub fn len(&self) -> usize {
        self.n_gamma
    }

    pub fn is_empty(&self) -> bool {
        self.n_gamma == 0
    }
}
