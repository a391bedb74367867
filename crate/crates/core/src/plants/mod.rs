//! Closed-loop plant models with two timescales.
//!
//! State is split into slow `x` and fast `z`; the injection `v` enters the
//! fast dynamics only. Exogenous inputs `w` (references, loads) are passed
//! explicitly so plants stay immutable and scenarios can step them.

mod buck;
mod linear;
mod pmsm;

pub use buck::{buck_asc_term, buck_closedloop, BuckModel, BuckParams, BuckPlant};
pub use linear::LinearPlant;
pub use pmsm::{
    pmsm_duties, pmsm_fast_closedloop, pmsm_input_matrix, pmsm_jacobians, pmsm_slow, split_load,
    PmsmParams, PmsmPlant,
};

use crate::densemath::{LinalgError, RealMatrix};
use crate::params::ParamError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlantError {
    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParams { key: &'static str, reason: String },
    #[error("non-physical state: {0}")]
    NonPhysicalState(String),
    #[error("unknown exogenous input `{0}`")]
    UnknownInput(String),
    #[error("equilibrium search failed after {iterations} iterations (residual {residual:.3e})")]
    EquilibriumNotFound { iterations: usize, residual: f64 },
    #[error(transparent)]
    Params(#[from] ParamError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlantDims {
    pub n_x: usize,
    pub n_z: usize,
    /// Injection channels.
    pub m: usize,
}

/// Evaluator interface `ẋ = f(x, z, v; w)`, `ż = g(x, z; w) + B(x, z; w) v`.
///
/// `slow` takes `v` because some plants route the injection through an
/// actuator that also drives the slow states (PMSM duty ratios).
pub trait TwoTimescalePlant {
    fn dims(&self) -> PlantDims;

    fn slow(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError>;

    fn fast(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError>;

    fn input_matrix(&self, x: &[f64], z: &[f64], w: &[f64]) -> Result<RealMatrix, PlantError>;

    /// Analytic `(∇x g, ∇z g)`, when available.
    fn jacobians(
        &self,
        _x: &[f64],
        _z: &[f64],
        _w: &[f64],
    ) -> Option<Result<(RealMatrix, RealMatrix), PlantError>> {
        None
    }

    /// Names of `x` followed by `z`.
    fn state_names(&self) -> Vec<String>;

    fn injection_names(&self) -> Vec<String>;

    fn exogenous_names(&self) -> Vec<String>;

    fn default_exogenous(&self) -> Vec<f64>;

    /// Applies a scheduled change. The default sets the exogenous input of
    /// that name.
    fn apply_event(&self, w: &mut [f64], key: &str, value: f64) -> Result<(), PlantError> {
        let idx = self
            .exogenous_names()
            .iter()
            .position(|n| n == key)
            .ok_or_else(|| PlantError::UnknownInput(key.to_string()))?;
        w[idx] = value;
        Ok(())
    }

    /// Steady state `(x*, z*)` with `v = 0` under `w`.
    fn equilibrium(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PlantError>;
}

pub(crate) fn require_positive(key: &'static str, value: f64) -> Result<(), PlantError> {
    if !(value.is_finite() && value > 0.0) {
        return Err(PlantError::InvalidParams {
            key,
            reason: format!("must be positive, got {value}"),
        });
    }
    Ok(())
}

pub(crate) fn require_nonnegative(key: &'static str, value: f64) -> Result<(), PlantError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(PlantError::InvalidParams {
            key,
            reason: format!("must be nonnegative, got {value}"),
        });
    }
    Ok(())
}
