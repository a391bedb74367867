//! Averaged buck converter under a cascaded PI loop: outer voltage PI
//! producing the inductor-current reference, inner current PI producing the
//! bridge voltage `u = d·V_in`.
//!
//! Slow state `x = (v_C, ζ_v)`, fast state `z = (i_L, ζ_i)`, and the
//! injection `v` adds to `u`.

use super::{require_nonnegative, require_positive, LinearPlant, PlantDims, PlantError, TwoTimescalePlant};
use crate::densemath::RealMatrix;
use crate::params::ParamMap;
use crate::senscond::{self, SensitivityMode};
use crate::sptheory::PartitionedLinearSystem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuckParams {
    /// Load resistance [Ω].
    pub r_load: f64,
    /// Output capacitance [F].
    pub c_out: f64,
    /// Inductance [H].
    pub l_ind: f64,
    /// Input voltage [V]; only used when the bridge voltage is saturated.
    pub v_in: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_i: f64,
    pub ki_i: f64,
}

impl BuckParams {
    pub const KEYS: [&'static str; 8] = [
        "r-load", "c-out", "l-ind", "v-in", "kp-v", "ki-v", "kp-i", "ki-i",
    ];

    /// The reference converter: 18.6 Ω, 510 µF, 1 mH, PI gains (1, 30) and
    /// (1, 700), 100 V input.
    pub fn reference() -> Self {
        Self {
            r_load: 18.6,
            c_out: 510e-6,
            l_ind: 1e-3,
            v_in: 100.0,
            kp_v: 1.0,
            ki_v: 30.0,
            kp_i: 1.0,
            ki_i: 700.0,
        }
    }

    /// Same circuit with gains `(kp_v, ki_v, kp_i, ki_i)`.
    pub fn with_gains(self, gains: [f64; 4]) -> Self {
        Self {
            kp_v: gains[0],
            ki_v: gains[1],
            kp_i: gains[2],
            ki_i: gains[3],
            ..self
        }
    }

    pub fn gains(&self) -> [f64; 4] {
        [self.kp_v, self.ki_v, self.kp_i, self.ki_i]
    }

    pub fn from_params(map: &ParamMap) -> Result<Self, PlantError> {
        let p = Self {
            r_load: map.number("r-load")?,
            c_out: map.number("c-out")?,
            l_ind: map.number("l-ind")?,
            v_in: map.number("v-in")?,
            kp_v: map.number("kp-v")?,
            ki_v: map.number("ki-v")?,
            kp_i: map.number("kp-i")?,
            ki_i: map.number("ki-i")?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        require_positive("r-load", self.r_load)?;
        require_positive("c-out", self.c_out)?;
        require_positive("l-ind", self.l_ind)?;
        require_positive("v-in", self.v_in)?;
        require_nonnegative("kp-v", self.kp_v)?;
        require_nonnegative("ki-v", self.ki_v)?;
        require_nonnegative("kp-i", self.kp_i)?;
        require_nonnegative("ki-i", self.ki_i)?;
        Ok(())
    }
}

/// The closed loop as a partitioned system plus the columns through which
/// the voltage reference `v_C^r` enters the slow (`ex`) and fast (`ez`)
/// dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct BuckModel {
    pub system: PartitionedLinearSystem,
    pub ex: [f64; 2],
    pub ez: [f64; 2],
}

pub fn buck_closedloop(p: &BuckParams) -> Result<BuckModel, PlantError> {
    p.validate()?;
    let (r, c, l) = (p.r_load, p.c_out, p.l_ind);
    let a11 = RealMatrix::from_rows(&[[-1.0 / (r * c), 0.0], [-1.0, 0.0]]);
    let a12 = RealMatrix::from_rows(&[[1.0 / c, 0.0], [0.0, 0.0]]);
    let a21 = RealMatrix::from_rows(&[
        [(-1.0 - p.kp_i * p.kp_v) / l, p.kp_i * p.ki_v / l],
        [-p.kp_v, p.ki_v],
    ]);
    let a22 = RealMatrix::from_rows(&[[-p.kp_i / l, p.ki_i / l], [-1.0, 0.0]]);
    let b = RealMatrix::column_vector(&[1.0 / l, 0.0]);
    let system = PartitionedLinearSystem::new(a11, a12, a21, a22, b).map_err(|e| {
        PlantError::InvalidParams {
            key: "ki-i",
            reason: format!("inner loop has no quasi-steady state: {e}"),
        }
    })?;
    Ok(BuckModel {
        system,
        ex: [0.0, 1.0],
        ez: [p.kp_i * p.kp_v / l, p.kp_v],
    })
}

/// Least-squares conditioning injection at `(x, z)` for reference `v_ref`:
/// `v = B†L S ẋ`, with `ẋ` including the reference term.
pub fn buck_asc_term(p: &BuckParams, x: &[f64], z: &[f64], v_ref: f64) -> Result<f64, PlantError> {
    let plant = BuckPlant::new(*p)?;
    let w = [v_ref];
    let f = plant.slow(x, z, &[0.0], &w)?;
    let s = senscond::sensitivity_linear(plant.model().system()).map_err(cond_to_plant)?;
    let target = s.mul_vec(&f)?;
    let b = plant.input_matrix(x, z, &w)?;
    let res = senscond::solve_injection(&b, &target, &SensitivityMode::Approximate)
        .map_err(cond_to_plant)?;
    Ok(res.v[0])
}

fn cond_to_plant(e: senscond::CondError) -> PlantError {
    match e {
        senscond::CondError::Linalg(l) => PlantError::Linalg(l),
        senscond::CondError::Plant(p) => p,
        other => PlantError::NonPhysicalState(other.to_string()),
    }
}

/// Buck converter as a [`TwoTimescalePlant`] with exogenous input `v-ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct BuckPlant {
    params: BuckParams,
    linear: LinearPlant,
    saturate: bool,
}

impl BuckPlant {
    pub const DEFAULT_V_REF: f64 = 50.0;

    pub fn new(params: BuckParams) -> Result<Self, PlantError> {
        let model = buck_closedloop(&params)?;
        let linear = LinearPlant::new(model.system)
            .with_exogenous(
                RealMatrix::column_vector(&model.ex),
                RealMatrix::column_vector(&model.ez),
                vec!["v-ref".to_string()],
                vec![Self::DEFAULT_V_REF],
            )?
            .with_state_names(
                ["v_c", "zeta_v", "i_l", "zeta_i"]
                    .map(String::from)
                    .to_vec(),
            );
        Ok(Self {
            params,
            linear,
            saturate: false,
        })
    }

    /// Clamp the bridge voltage (including the injection) to `[0, V_in]`.
    pub fn with_saturation(mut self, on: bool) -> Self {
        self.saturate = on;
        self
    }

    pub fn params(&self) -> &BuckParams {
        &self.params
    }

    pub fn model(&self) -> &LinearPlant {
        &self.linear
    }

    /// Bridge voltage commanded by the cascade plus the injection.
    pub fn bridge_voltage(&self, x: &[f64], z: &[f64], v: &[f64], v_ref: f64) -> f64 {
        let p = &self.params;
        let i_ref = p.kp_v * (v_ref - x[0]) + p.ki_v * x[1];
        p.kp_i * (i_ref - z[0]) + p.ki_i * z[1] + v[0]
    }
}

impl TwoTimescalePlant for BuckPlant {
    fn dims(&self) -> PlantDims {
        self.linear.dims()
    }

    fn slow(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        self.linear.slow(x, z, v, w)
    }

    fn fast(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        if !self.saturate {
            return self.linear.fast(x, z, v, w);
        }
        let p = &self.params;
        let u = self.bridge_voltage(x, z, v, w[0]).clamp(0.0, p.v_in);
        let i_ref = p.kp_v * (w[0] - x[0]) + p.ki_v * x[1];
        Ok(vec![(u - x[0]) / p.l_ind, i_ref - z[0]])
    }

    fn input_matrix(&self, x: &[f64], z: &[f64], w: &[f64]) -> Result<RealMatrix, PlantError> {
        self.linear.input_matrix(x, z, w)
    }

    fn jacobians(
        &self,
        x: &[f64],
        z: &[f64],
        w: &[f64],
    ) -> Option<Result<(RealMatrix, RealMatrix), PlantError>> {
        self.linear.jacobians(x, z, w)
    }

    fn state_names(&self) -> Vec<String> {
        self.linear.state_names()
    }

    fn injection_names(&self) -> Vec<String> {
        vec!["v".to_string()]
    }

    fn exogenous_names(&self) -> Vec<String> {
        self.linear.exogenous_names()
    }

    fn default_exogenous(&self) -> Vec<f64> {
        self.linear.default_exogenous()
    }

    fn equilibrium(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PlantError> {
        self.linear.equilibrium(w)
    }
}
