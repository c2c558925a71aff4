//! Scenario configuration, the text config format and the built-in presets.

mod format;
mod presets;

use std::path::PathBuf;

use thiserror::Error;

pub use format::{parse_config, serialize};
pub use presets::{preset, PRESET_NAMES};

use crate::error::ModelError;
use crate::model::{ForcingSignal, ModelParams, SimState};
use crate::solver::SolverSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub path: Option<PathBuf>,
    /// Every `stride`-th step is written; the initial state always is.
    pub stride: usize,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            path: None,
            stride: 1,
        }
    }
}

/// Everything needed to run one simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub description: String,
    pub params: ModelParams,
    pub initial_phi: Vec<f64>,
    pub initial_psi: Vec<f64>,
    pub nutrient: ForcingSignal,
    pub antibiotic: ForcingSignal,
    pub solver: SolverSettings,
    pub output: OutputOptions,
}

/// Configuration problems. Each variant has a stable code, see [`ConfigError::code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("growth matrix is not symmetric: a[{row}][{col}] = {upper} but a[{col}][{row}] = {lower}")]
    AsymmetricGrowth {
        row: usize,
        col: usize,
        upper: f64,
        lower: f64,
    },
    #[error("viscosity of species {species} must be positive, got {value}")]
    NonPositiveViscosity { species: usize, value: f64 },
    #[error("initial volume fractions sum to {sum}, leaving no empty space")]
    NoEmptySpace { sum: f64 },
    #[error("unknown preset `{name}`; valid presets: {}", PRESET_NAMES.join(", "))]
    UnknownPreset { name: String },
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Syntax { .. } => "E-SYNTAX",
            Self::UnknownKey { .. } => "E-UNKNOWN-KEY",
            Self::MissingKey(_) => "E-MISSING-KEY",
            Self::InvalidValue { .. } => "E-INVALID-VALUE",
            Self::AsymmetricGrowth { .. } => "E-ASYMMETRIC-A",
            Self::NonPositiveViscosity { .. } => "E-VISCOSITY",
            Self::NoEmptySpace { .. } => "E-NO-EMPTY-SPACE",
            Self::UnknownPreset { .. } => "E-UNKNOWN-PRESET",
        }
    }
}

impl From<ModelError> for ConfigError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::AsymmetricGrowth {
                row,
                col,
                upper,
                lower,
            } => Self::AsymmetricGrowth {
                row,
                col,
                upper,
                lower,
            },
            ModelError::DimensionMismatch { what, expected, found } => Self::InvalidValue {
                key: what.to_string(),
                message: format!("expected {expected} entries, found {found}"),
            },
            ModelError::OutOfDomain { what, value } => Self::InvalidValue {
                key: what,
                message: format!("{value} is outside [0, 1]"),
            },
            ModelError::InvalidArgument(message) => Self::InvalidValue {
                key: "model".into(),
                message,
            },
        }
    }
}

impl ScenarioConfig {
    pub fn n(&self) -> usize {
        self.params.n()
    }

    /// Checks the cross-field invariants not already enforced by the types.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n();
        for (key, v) in [("initial_phi", &self.initial_phi), ("initial_psi", &self.initial_psi)] {
            if v.len() != n {
                return Err(ConfigError::InvalidValue {
                    key: key.into(),
                    message: format!("expected {n} entries, found {}", v.len()),
                });
            }
            if let Some(x) = v.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(ConfigError::InvalidValue {
                    key: key.into(),
                    message: format!("{x} is outside [0, 1]"),
                });
            }
        }
        let sum: f64 = self.initial_phi.iter().sum();
        if sum >= 1.0 {
            return Err(ConfigError::NoEmptySpace { sum });
        }
        for (key, f) in [("nutrient", &self.nutrient), ("antibiotic", &self.antibiotic)] {
            if !f.is_finite() {
                return Err(ConfigError::InvalidValue {
                    key: format!("forcing.{key}"),
                    message: "non-finite value".into(),
                });
            }
        }
        self.solver.validate().map_err(|e| ConfigError::InvalidValue {
            key: "solver".into(),
            message: e.to_string(),
        })?;
        if self.output.stride == 0 {
            return Err(ConfigError::InvalidValue {
                key: "output.stride".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn initial_state(&self) -> Result<SimState, ModelError> {
        SimState::initial(&self.initial_phi, &self.initial_psi)
    }

    /// The same scenario with species relabelled so that new species `k`
    /// is old species `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, ModelError> {
        let params = self.params.permuted(perm)?;
        Ok(Self {
            params,
            initial_phi: perm.iter().map(|&p| self.initial_phi[p]).collect(),
            initial_psi: perm.iter().map(|&p| self.initial_psi[p]).collect(),
            ..self.clone()
        })
    }
}
