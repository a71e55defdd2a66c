//! TOML run configuration.
//!
//! A file may start from a named preset and override any key:
//!
//! ```toml
//! preset = "paper-quartic"
//!
//! [problem]
//! operator = "sbp42"
//! n_gamma = 64
//!
//! [solver.epsilon]
//! policy = "fixed"
//! value = 1e-4
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};
use worldline::{ProblemSpec, SolverSettings};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("unknown preset `{name}` (known: {known})")]
    UnknownPreset { name: String, known: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] worldline::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSettings,
    /// Output directory; when absent the run directory is derived from the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

pub const PRESETS: [(&str, &str); 3] = [
    ("paper-quartic", "V = x^4/4, 32 nodes, t_i = 0, x_i = 1, tdot_i = 1, xdot_i = 1/10"),
    ("paper-linear", "V = x/4 with the paper-quartic initial data"),
    ("free", "V = 0 with the paper-quartic initial data"),
];

pub fn preset(name: &str) -> Result<RunConfig, ConfigError> {
    let (canonical, problem) = match name.to_ascii_lowercase().as_str() {
        "paper-quartic" => ("paper-quartic", ProblemSpec::paper_quartic()),
        "paper-linear" => ("paper-linear", ProblemSpec::paper_linear()),
        "free" | "free-particle" => ("free", ProblemSpec::free_particle()),
        _ => {
            return Err(ConfigError::UnknownPreset {
                name: name.into(),
                known: PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", "),
            })
        }
    };
    Ok(RunConfig {
        preset: Some(canonical.to_string()),
        problem,
        solver: SolverSettings::default(),
        output: None,
    })
}

pub fn is_preset(name: &str) -> bool {
    preset(name).is_ok()
}

fn merge(base: &mut Table, overlay: Table) {
    for (key, value) in overlay {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

/// Parses configuration text. Keys given explicitly override the preset named
/// by a top-level `preset` key, if any.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let overlay: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
    let config: RunConfig = match overlay.get("preset") {
        Some(Value::String(name)) => {
            let base = preset(name)?;
            let mut table = Table::try_from(&base).map_err(|e| ConfigError::Parse(e.to_string()))?;
            merge(&mut table, overlay);
            table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?
        }
        Some(other) => {
            return Err(ConfigError::Parse(format!("key `preset` must be a string, got {}", other.type_str())))
        }
        None => toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?,
    };
    config.validate()?;
    Ok(config)
}

/// Loads a file path, or expands a preset name when no such file exists.
pub fn load_config(source: &str) -> Result<RunConfig, ConfigError> {
    let path = Path::new(source);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.into(), source: e })?;
        return parse_config(&text).map_err(|e| match e {
            ConfigError::Parse(msg) => ConfigError::Parse(format!("{}: {msg}", path.display())),
            other => other,
        });
    }
    if source.ends_with(".toml") {
        return Err(ConfigError::Io {
            path: path.into(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    preset(source)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), worldline::Error> {
        self.problem.validate()?;
        self.solver.validate()
    }

    /// TOML text that reloads to an identical configuration.
    pub fn echo(&self) -> String {
        let mut out = String::from("# Effective configuration of this run.\n");
        if self.preset.as_deref().is_some_and(|p| p.starts_with("paper-")) {
            out.push_str(
                "# Interpretation: the paper-* presets take the quartic strength kappa = 1/4\n\
                 # and reuse 1/4 as the linear slope alpha. Override with --strength.\n",
            );
        }
        out.push('\n');
        out.push_str(&toml::to_string(self).expect("configuration serializes"));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartic_preset_matches_reference_configuration() {
        let c = load_config("paper-quartic").unwrap();
        assert_eq!(c.problem.n_gamma, 32);
        assert_eq!(c.problem.initial.x_i, 1.0);
        assert_eq!(c.problem.initial.xdot_i, 0.1);
        assert_eq!(c.problem.potential.strength, Some(0.25));
        assert_eq!(c.solver.residual_tol, 1e-12);
        assert_eq!(c.problem.physics.c, 1.0);
        assert_eq!((c.problem.gamma_i, c.problem.gamma_f), (0.0, 1.0));
    }

    #[test]
    fn overrides_apply_on_top_of_preset() {
        let c = parse_config("preset = \"paper-quartic\"\n[problem]\noperator = \"sbp42\"\nn_gamma = 40\n").unwrap();
        assert_eq!(c.problem.operator, "sbp42");
        assert_eq!(c.problem.n_gamma, 40);
        assert_eq!(c.problem.potential.kind, "quartic");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config("preset = \"free\"\n[problem]\nn_gama = 40\n").unwrap_err();
        assert!(e.to_string().contains("n_gama"), "{e}");
    }

    #[test]
    fn unknown_preset_lists_known_ones() {
        let e = load_config("paper-cubic").unwrap_err();
        assert!(e.to_string().contains("paper-quartic"));
    }

    #[test]
    fn echo_round_trips() {
        for name in ["paper-quartic", "paper-linear", "free"] {
            let c = load_config(name).unwrap();
            assert_eq!(parse_config(&c.echo()).unwrap(), c);
        }
    }
}
