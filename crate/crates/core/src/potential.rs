//! External potentials `V(x)` absorbed into the metric as `g₀₀ = c² + 2V(x)/m`.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub trait Potential: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
    fn second_derivative(&self, x: f64) -> f64;
}

/// Serializable description of a potential, resolved through [`potentials`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strength: Option<f64>,
    /// Polynomial coefficients `c₀, c₁, …` of `Σ cₚ xᵖ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self { kind: "free".into(), strength: None, coefficients: None }
    }

    pub fn linear(alpha: f64) -> Self {
        Self { kind: "linear".into(), strength: Some(alpha), coefficients: None }
    }

    pub fn quartic(kappa: f64) -> Self {
        Self { kind: "quartic".into(), strength: Some(kappa), coefficients: None }
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self { kind: "polynomial".into(), strength: None, coefficients: Some(coefficients) }
    }

    pub fn build(&self) -> Result<Box<dyn Potential>> {
        let ctor = potentials().get(&self.kind)?;
        ctor(self)
    }

    fn strength_or_err(&self) -> Result<f64> {
        match self.strength {
            Some(s) if s.is_finite() => Ok(s),
            Some(s) => Err(Error::invalid("potential.strength", format!("must be finite, got {s}"))),
            None => Err(Error::invalid(
                "potential.strength",
                format!("required for potential kind `{}`", self.kind),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Free;

impl Potential for Free {
    fn name(&self) -> &'static str {
        "free"
    }
    fn value(&self, _x: f64) -> f64 {
        0.0
    }
    fn derivative(&self, _x: f64) -> f64 {
        0.0
    }
    fn second_derivative(&self, _x: f64) -> f64 {
        0.0
    }
}

/// `V(x) = α x`
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub alpha: f64,
}

impl Potential for Linear {
    fn name(&self) -> &'static str {
        "linear"
    }
    fn value(&self, x: f64) -> f64 {
        self.alpha * x
    }
    fn derivative(&self, _x: f64) -> f64 {
        self.alpha
    }
    fn second_derivative(&self, _x: f64) -> f64 {
        0.0
    }
}

/// `V(x) = κ x⁴`
#[derive(Debug, Clone, Copy)]
pub struct Quartic {
    pub kappa: f64,
}

impl Potential for Quartic {
    fn name(&self) -> &'static str {
        "quartic"
    }
    fn value(&self, x: f64) -> f64 {
        self.kappa * x.powi(4)
    }
    fn derivative(&self, x: f64) -> f64 {
        4.0 * self.kappa * x.powi(3)
    }
    fn second_derivative(&self, x: f64) -> f64 {
        12.0 * self.kappa * x * x
    }
}

#[derive(Debug, Clone)]
pub struct Polynomial {
    pub coefficients: Vec<f64>,
}

impl Potential for Polynomial {
    fn name(&self) -> &'static str {
        "polynomial"
    }
    fn value(&self, x: f64) -> f64 {
        self.coefficients.iter().enumerate().map(|(p, c)| c * x.powi(p as i32)).sum()
    }
    fn derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(p, c)| p as f64 * c * x.powi(p as i32 - 1))
            .sum()
    }
    fn second_derivative(&self, x: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .skip(2)
            .map(|(p, c)| (p * (p - 1)) as f64 * c * x.powi(p as i32 - 2))
            .sum()
    }
}

pub type PotentialConstructor = fn(&PotentialSpec) -> Result<Box<dyn Potential>>;

pub fn potentials() -> &'static Registry<PotentialConstructor> {
    static REGISTRY: OnceLock<Registry<PotentialConstructor>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<PotentialConstructor> = Registry::new("potential");
        r.register("free", &["none", "zero"], "V = 0", |_| Ok(Box::new(Free)));
        r.register("linear", &[], "V = strength * x", |s| {
            Ok(Box::new(Linear { alpha: s.strength_or_err()? }))
        });
        r.register("quartic", &["qrt"], "V = strength * x^4", |s| {
            Ok(Box::new(Quartic { kappa: s.strength_or_err()? }))
        });
        r.register("polynomial", &["poly"], "V = sum_p coefficients[p] * x^p", |s| {
            let coefficients = s.coefficients.clone().ok_or_else(|| {
                Error::invalid("potential.coefficients", "required for potential kind `polynomial`")
            })?;
            if coefficients.iter().any(|c| !c.is_finite()) {
                return Err(Error::invalid("potential.coefficients", "must be finite"));
            }
            Ok(Box::new(Polynomial { coefficients }))
        });
        r
    })
}
