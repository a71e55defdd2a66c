use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{Potential, PotentialSpec};
use crate::regularizer::{regularizers, Regularizer};
use crate::sbp::{build_grid, build_sbp_with, operators, Grid, SbpOperatorSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicsParams {
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "one")]
    pub m: f64,
}

impl Default for PhysicsParams {
    fn default() -> Self {
        Self { c: 1.0, m: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub t_i: f64,
    pub x_i: f64,
    /// dt/dγ at γ_i
    pub tdot_i: f64,
    /// dx/dγ at γ_i
    pub xdot_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticDerivative {
    #[default]
    Plain,
    Regularized,
}

/// Knobs for the diagnostics. `lambda6_sign`/`lambda8_sign` select the sign
/// of the multiplier corrections in the geodesic residuals; the defaults are
/// the combination that makes the time residual vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticOptions {
    #[serde(default)]
    pub derivative: DiagnosticDerivative,
    #[serde(default = "one")]
    pub lambda6_sign: f64,
    #[serde(default = "minus_one")]
    pub lambda8_sign: f64,
}

impl Default for DiagnosticOptions {
    fn default() -> Self {
        Self { derivative: DiagnosticDerivative::Plain, lambda6_sign: 1.0, lambda8_sign: -1.0 }
    }
}

fn one() -> f64 {
    1.0
}

fn minus_one() -> f64 {
    -1.0
}

fn default_operator() -> String {
    "sbp21".into()
}

fn default_regularizer() -> String {
    "sat-lift".into()
}

fn gamma_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    #[serde(default = "default_operator")]
    pub operator: String,
    #[serde(default = "default_regularizer")]
    pub regularizer: String,
    pub n_gamma: usize,
    #[serde(default)]
    pub gamma_i: f64,
    #[serde(default = "gamma_one")]
    pub gamma_f: f64,
    #[serde(default)]
    pub physics: PhysicsParams,
    pub potential: PotentialSpec,
    pub initial: InitialData,
    #[serde(default)]
    pub diagnostics: DiagnosticOptions,
}

impl ProblemSpec {
    /// The quartic-potential configuration: κ = 1/4, 32 nodes on γ ∈ [0, 1],
    /// t_i = 0, x_i = 1, ṫ_i = 1, ẋ_i = 1/10.
    pub fn paper_quartic() -> Self {
        Self {
            operator: default_operator(),
            regularizer: default_regularizer(),
            n_gamma: 32,
            gamma_i: 0.0,
            gamma_f: 1.0,
            physics: PhysicsParams::default(),
            potential: PotentialSpec::quartic(0.25),
            initial: InitialData { t_i: 0.0, x_i: 1.0, tdot_i: 1.0, xdot_i: 0.1 },
            diagnostics: DiagnosticOptions::default(),
        }
    }

    /// Same initial data with `V = x/4`.
    pub fn paper_linear() -> Self {
        Self { potential: PotentialSpec::linear(0.25), ..Self::paper_quartic() }
    }

    pub fn free_particle() -> Self {
        Self { potential: PotentialSpec::free(), ..Self::paper_quartic() }
    }

    pub fn with_operator(mut self, name: &str) -> Self {
        self.operator = name.to_string();
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n_gamma = n;
        self
    }

    /// Checks every invariant that does not need the operators built.
    pub fn validate(&self) -> Result<()> {
        let finite = |key: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(key, format!("must be finite, got {v}")))
            }
        };
        finite("physics.c", self.physics.c)?;
        finite("physics.m", self.physics.m)?;
        if self.physics.c <= 0.0 {
            return Err(Error::invalid("physics.c", "must be positive"));
        }
        if self.physics.m <= 0.0 {
            return Err(Error::invalid("physics.m", "must be positive"));
        }
        finite("initial.t_i", self.initial.t_i)?;
        finite("initial.x_i", self.initial.x_i)?;
        finite("initial.tdot_i", self.initial.tdot_i)?;
        finite("initial.xdot_i", self.initial.xdot_i)?;
        if self.initial.tdot_i <= 0.0 {
            return Err(Error::invalid("initial.tdot_i", "must be positive (time advances with gamma)"));
        }
        for (key, s) in [
            ("diagnostics.lambda6_sign", self.diagnostics.lambda6_sign),
            ("diagnostics.lambda8_sign", self.diagnostics.lambda8_sign),
        ] {
            if s != 1.0 && s != -1.0 {
                return Err(Error::invalid(key, format!("must be +1 or -1, got {s}")));
            }
        }
        let family = operators().get(&self.operator)?();
        if self.n_gamma < family.min_nodes() {
            return Err(Error::GridTooSmall {
                operator: family.name(),
                min: family.min_nodes(),
                n: self.n_gamma,
            });
        }
        regularizers().get(&self.regularizer)?;
        self.potential.build()?;
        Ok(())
    }
}

/// A validated problem with its operators built.
#[derive(Debug, Clone)]
pub struct Problem {
    pub spec: ProblemSpec,
    pub grid: Grid,
    pub ops: Arc<SbpOperatorSet>,
    pub potential: Arc<dyn Potential>,
    pub regularizer: Arc<dyn Regularizer>,
}

impl Problem {
    pub fn new(spec: ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let grid = build_grid(spec.gamma_i, spec.gamma_f, spec.n_gamma)?;
        let family = operators().get(&spec.operator)?();
        let ops = Arc::new(build_sbp_with(family.as_ref(), &grid)?);
        let potential: Arc<dyn Potential> = Arc::from(spec.potential.build()?);
        let regularizer: Arc<dyn Regularizer> = Arc::from(regularizers().get(&spec.regularizer)?());
        Ok(Self { spec, grid, ops, potential, regularizer })
    }

    pub fn n(&self) -> usize {
        self.grid.n_gamma
    }

    /// `c² + 2V(x)/m`
    pub fn metric(&self, x: f64) -> f64 {
        let p = &self.spec.physics;
        p.c * p.c + 2.0 * self.potential.value(x) / p.m
    }

    pub fn metric_derivative(&self, x: f64) -> f64 {
        2.0 * self.potential.derivative(x) / self.spec.physics.m
    }

    pub fn metric_second_derivative(&self, x: f64) -> f64 {
        2.0 * self.potential.second_derivative(x) / self.spec.physics.m
    }

    /// Continuum Noether charge `ṫ_i (c² + 2V(x_i)/m)`.
    pub fn continuum_charge(&self) -> f64 {
        self.spec.initial.tdot_i * self.metric(self.spec.initial.x_i)
    }
}
