//! Regularized derivatives used in the kinetic part of the action.
//!
//! A regularizer turns an [`SbpOperatorSet`] into an affine operator
//! `D̄u = J u − a u₀`, where `u₀` is the initial value of the operand
//! (`t_i` for time, `x_i` for position). The constraint terms and all
//! diagnostics keep using the plain `D`.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::registry::Registry;
use crate::sbp::{build_regularized, lifting, SbpOperatorSet};

/// Affine derivative `u ↦ linear · u − anchor · u₀`.
#[derive(Debug, Clone)]
pub struct KineticOperator {
    pub linear: DMatrix<f64>,
    pub anchor: DVector<f64>,
    pub epsilon: f64,
}

impl KineticOperator {
    pub fn apply(&self, u: &DVector<f64>, u0: f64) -> DVector<f64> {
        &self.linear * u - &self.anchor * u0
    }
}

pub trait Regularizer: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn kinetic_operator(&self, ops: &SbpOperatorSet, epsilon: f64) -> Result<KineticOperator>;
}

/// `D̄u = D_ε u + H⁻¹e₁ (u₁ − u₀)`: the initial value is imposed weakly
/// through a simultaneous-approximation term, which removes the oscillatory
/// null mode of `Dᵀ` while keeping `D̄` invariant under the joint shift
/// `u → u + c, u₀ → u₀ + c`. At a solution with `u₁ = u₀` the lift vanishes.
#[derive(Debug, Clone, Copy, Default)]
pub struct SatLift;

impl Regularizer for SatLift {
    fn name(&self) -> &'static str {
        "sat-lift"
    }

    fn kinetic_operator(&self, ops: &SbpOperatorSet, epsilon: f64) -> Result<KineticOperator> {
        let reg = build_regularized(ops, epsilon)?;
        let anchor = lifting(ops, 1)?.values;
        let mut linear = reg.d_reg().clone();
        linear[(0, 0)] += anchor[0];
        Ok(KineticOperator { linear, anchor, epsilon })
    }
}

/// `D̄u = D + ε H⁻¹ SᵀS` with no initial-value lift.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dissipation;

impl Regularizer for Dissipation {
    fn name(&self) -> &'static str {
        "dissipation"
    }

    fn kinetic_operator(&self, ops: &SbpOperatorSet, epsilon: f64) -> Result<KineticOperator> {
        let reg = build_regularized(ops, epsilon)?;
        Ok(KineticOperator { linear: reg.d_reg().clone(), anchor: DVector::zeros(ops.n()), epsilon })
    }
}

pub type RegularizerConstructor = fn() -> Box<dyn Regularizer>;

pub fn regularizers() -> &'static Registry<RegularizerConstructor> {
    static REGISTRY: OnceLock<Registry<RegularizerConstructor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<RegularizerConstructor> = Registry::new("regularizer");
        r.register("sat-lift", &["sat"], "D_eps + H^-1 e1 (u1 - u_i)", || Box::new(SatLift));
        r.register("dissipation", &["plain"], "D + eps H^-1 S^T S", || Box::new(Dissipation));
        r
    })
}
