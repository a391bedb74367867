//! Two-timescale closed-loop analysis: singular-perturbation structure,
//! sensitivity-conditioning feedforward, reference converter and machine
//! models, and a fixed-step simulator.

pub mod densemath;
pub mod params;
pub mod plants;
pub mod senscond;
pub mod simkit;
pub mod sptheory;

#[cfg(test)]
mod testutil;

pub use densemath::{ComplexScalar, LinalgError, RealMatrix, SvdFactors, Tolerances};
pub use plants::{PlantError, TwoTimescalePlant};
pub use senscond::{CondError, ConditioningResult, SensitivityMode};
pub use sptheory::{BoundaryLayerSystem, EigenReport, PartitionedLinearSystem, SpError};
