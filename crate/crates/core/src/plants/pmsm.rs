//! Averaged PMSM with an active rectifier feeding a dc bus, under
//! field-oriented control: an outer dc-voltage PI sets the q-axis current
//! reference (`i_d^r = 0`), inner dq-current PIs with decoupling set the
//! duty ratios.
//!
//! Slow state `x = (v_dc, ζ_v)`, fast state `z = (i_d, ζ_id, i_q, ζ_iq)`,
//! injection `v = (v_d, v_q)` added to the duty ratios, exogenous inputs
//! `w = (v-dc-ref, i-load)`.
//!
//! Rotor speed is a signed parameter. With the equations as written, power
//! flows from the machine into the bus (rectification) for negative speed.

use std::f64::consts::PI;

use super::{require_nonnegative, require_positive, PlantDims, PlantError, TwoTimescalePlant};
use crate::densemath::{jacobian_fd, solve_linear, vec_norm, RealMatrix, DEFAULT_FD_SCALE};
use crate::params::ParamMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmsmParams {
    /// Stator resistance [Ω].
    pub rs: f64,
    /// d-axis inductance [H].
    pub ld: f64,
    /// q-axis inductance [H].
    pub lq: f64,
    /// Permanent-magnet flux linkage [Wb].
    pub lambda_m: f64,
    pub poles: u32,
    /// Mechanical speed [rpm], signed.
    pub speed_rpm: f64,
    /// Bus damping resistance [Ω].
    pub r_load: f64,
    /// Bus capacitance [F].
    pub c_bus: f64,
    pub kp_v: f64,
    pub ki_v: f64,
    pub kp_id: f64,
    pub ki_id: f64,
    pub kp_iq: f64,
    pub ki_iq: f64,
    /// Constant-current load [A].
    pub i_load: f64,
}

/// Constant-current share of a load of `power` watts at bus voltage `v` when
/// the damping resistor `r` draws `v²/r`.
pub fn split_load(power: f64, v: f64, r: f64) -> f64 {
    power / v - v / r
}

impl PmsmParams {
    pub const KEYS: [&'static str; 15] = [
        "rs", "ld", "lq", "lambda-m", "poles", "speed-rpm", "r-load", "c-bus", "kp-v", "ki-v",
        "kp-id", "ki-id", "kp-iq", "ki-iq", "i-load",
    ];

    /// Reference machine at 8000 rpm in the generating direction, 540 V bus
    /// carrying 33.48 kW.
    pub fn reference() -> Self {
        Self {
            rs: 5.3e-3,
            ld: 9e-5,
            lq: 2.55e-4,
            lambda_m: 0.0385,
            poles: 12,
            speed_rpm: -8000.0,
            r_load: 50.0,
            c_bus: 1e-3,
            kp_v: 2.0,
            ki_v: 1000.0,
            kp_id: 0.5,
            ki_id: 2.0,
            kp_iq: 0.5,
            ki_iq: 2.0,
            i_load: split_load(33_480.0, 540.0, 50.0),
        }
    }

    /// Reads all [`Self::KEYS`]; `i-load` may instead be given as `p-load`
    /// (total watts at `v-dc-ref`, default 540 V).
    pub fn from_params(map: &ParamMap) -> Result<Self, PlantError> {
        let poles = map.number("poles")?;
        if poles.fract() != 0.0 || poles < 2.0 || poles % 2.0 != 0.0 {
            return Err(PlantError::InvalidParams {
                key: "poles",
                reason: format!("must be an even integer >= 2, got {poles}"),
            });
        }
        let r_load = map.number("r-load")?;
        let i_load = match (map.get("i-load"), map.get("p-load")) {
            (Some(_), _) | (None, None) => map.number("i-load")?,
            (None, Some(_)) => split_load(
                map.number("p-load")?,
                map.number_or("v-dc-ref", PmsmPlant::DEFAULT_V_DC_REF)?,
                r_load,
            ),
        };
        let p = Self {
            rs: map.number("rs")?,
            ld: map.number("ld")?,
            lq: map.number("lq")?,
            lambda_m: map.number("lambda-m")?,
            poles: poles as u32,
            speed_rpm: map.number("speed-rpm")?,
            r_load,
            c_bus: map.number("c-bus")?,
            kp_v: map.number("kp-v")?,
            ki_v: map.number("ki-v")?,
            kp_id: map.number("kp-id")?,
            ki_id: map.number("ki-id")?,
            kp_iq: map.number("kp-iq")?,
            ki_iq: map.number("ki-iq")?,
            i_load,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        require_positive("rs", self.rs)?;
        require_positive("ld", self.ld)?;
        require_positive("lq", self.lq)?;
        require_positive("lambda-m", self.lambda_m)?;
        require_positive("r-load", self.r_load)?;
        require_positive("c-bus", self.c_bus)?;
        if self.poles < 2 || !self.poles.is_multiple_of(2) {
            return Err(PlantError::InvalidParams {
                key: "poles",
                reason: format!("must be even and >= 2, got {}", self.poles),
            });
        }
        if !self.speed_rpm.is_finite() || !self.i_load.is_finite() {
            return Err(PlantError::InvalidParams {
                key: "speed-rpm",
                reason: "speed and load must be finite".to_string(),
            });
        }
        for (key, g) in [
            ("kp-v", self.kp_v),
            ("ki-v", self.ki_v),
            ("kp-id", self.kp_id),
            ("ki-id", self.ki_id),
            ("kp-iq", self.kp_iq),
            ("ki-iq", self.ki_iq),
        ] {
            require_nonnegative(key, g)?;
        }
        Ok(())
    }

    /// Mechanical speed [rad/s].
    pub fn omega_m(&self) -> f64 {
        2.0 * PI * self.speed_rpm / 60.0
    }

    /// Electrical speed [rad/s].
    pub fn omega_r(&self) -> f64 {
        f64::from(self.poles) / 2.0 * self.omega_m()
    }
}

fn require_bus(v_dc: f64) -> Result<(), PlantError> {
    if !(v_dc > 0.0 && v_dc.is_finite()) {
        return Err(PlantError::NonPhysicalState(format!(
            "dc-bus voltage must be positive, got {v_dc}"
        )));
    }
    Ok(())
}

fn iq_reference(p: &PmsmParams, x: &[f64], v_ref: f64) -> f64 {
    -(p.kp_v * (v_ref - x[0]) + p.ki_v * x[1])
}

/// Duty ratios `(d_d, d_q)` from the decoupled current PIs, with the
/// injection added.
pub fn pmsm_duties(
    p: &PmsmParams,
    x: &[f64],
    z: &[f64],
    v: &[f64],
    v_ref: f64,
) -> Result<(f64, f64), PlantError> {
    require_bus(x[0])?;
    let w_r = p.omega_r();
    let (i_d, zeta_id, i_q, zeta_iq) = (z[0], z[1], z[2], z[3]);
    let iq_ref = iq_reference(p, x, v_ref);
    let k = 2.0 / x[0];
    let d_d = k * (p.kp_id * (0.0 - i_d) + p.ki_id * zeta_id - w_r * p.lq * i_q) + v[0];
    let d_q = k * (p.kp_iq * (iq_ref - i_q) + p.ki_iq * zeta_iq + w_r * p.ld * i_d + w_r * p.lambda_m)
        + v[1];
    Ok((d_d, d_q))
}

/// Bus dynamics `(v̇_dc, ζ̇_v)` for given duty ratios; `w = (v_dc^r, i_L)`.
pub fn pmsm_slow(
    p: &PmsmParams,
    x: &[f64],
    z: &[f64],
    duties: (f64, f64),
    w: &[f64],
) -> Result<Vec<f64>, PlantError> {
    require_bus(x[0])?;
    let (d_d, d_q) = duties;
    let c = p.c_bus;
    let v_dot = -x[0] / (p.r_load * c) + 3.0 / (4.0 * c) * (d_d * z[0] + d_q * z[2]) - w[1] / c;
    Ok(vec![v_dot, w[0] - x[0]])
}

/// Machine and current-loop dynamics with the duty ratios of
/// [`pmsm_duties`] substituted.
pub fn pmsm_fast_closedloop(
    p: &PmsmParams,
    x: &[f64],
    z: &[f64],
    v: &[f64],
    w: &[f64],
) -> Result<Vec<f64>, PlantError> {
    let (d_d, d_q) = pmsm_duties(p, x, z, v, w[0])?;
    let v_dc = x[0];
    let w_r = p.omega_r();
    let (i_d, i_q) = (z[0], z[2]);
    let iq_ref = iq_reference(p, x, w[0]);
    Ok(vec![
        -p.rs / p.ld * i_d + w_r * p.lq / p.ld * i_q + d_d * v_dc / (2.0 * p.ld),
        0.0 - i_d,
        -p.rs / p.lq * i_q - w_r * p.ld / p.lq * i_d - w_r / p.lq * p.lambda_m
            + d_q * v_dc / (2.0 * p.lq),
        iq_ref - i_q,
    ])
}

/// How the duty-ratio injection enters `ż`.
pub fn pmsm_input_matrix(p: &PmsmParams, v_dc: f64) -> Result<RealMatrix, PlantError> {
    require_bus(v_dc)?;
    Ok(RealMatrix::from_rows(&[
        [v_dc / (2.0 * p.ld), 0.0],
        [0.0, 0.0],
        [0.0, v_dc / (2.0 * p.lq)],
        [0.0, 0.0],
    ]))
}

/// Analytic `(∇x g, ∇z g)` of the injection-free fast dynamics. The
/// decoupling terms cancel the speed cross-coupling and the `1/v_dc` of the
/// duty ratios, so both are constant.
pub fn pmsm_jacobians(
    p: &PmsmParams,
    x: &[f64],
    _z: &[f64],
) -> Result<(RealMatrix, RealMatrix), PlantError> {
    require_bus(x[0])?;
    let gx = RealMatrix::from_rows(&[
        [0.0, 0.0],
        [0.0, 0.0],
        [p.kp_iq * p.kp_v / p.lq, -p.kp_iq * p.ki_v / p.lq],
        [p.kp_v, -p.ki_v],
    ]);
    let gz = RealMatrix::from_rows(&[
        [-(p.rs + p.kp_id) / p.ld, p.ki_id / p.ld, 0.0, 0.0],
        [-1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, -(p.rs + p.kp_iq) / p.lq, p.ki_iq / p.lq],
        [0.0, 0.0, -1.0, 0.0],
    ]);
    Ok((gx, gz))
}

/// PMSM rectifier as a [`TwoTimescalePlant`].
#[derive(Debug, Clone, PartialEq)]
pub struct PmsmPlant {
    params: PmsmParams,
    v_dc_ref: f64,
}

const EQUILIBRIUM_TOL: f64 = 1e-9;
const EQUILIBRIUM_MAX_ITER: usize = 10_000;

impl PmsmPlant {
    pub const DEFAULT_V_DC_REF: f64 = 540.0;

    pub fn new(params: PmsmParams) -> Result<Self, PlantError> {
        params.validate()?;
        Ok(Self {
            params,
            v_dc_ref: Self::DEFAULT_V_DC_REF,
        })
    }

    pub fn with_v_dc_ref(mut self, v_dc_ref: f64) -> Result<Self, PlantError> {
        require_bus(v_dc_ref)?;
        self.v_dc_ref = v_dc_ref;
        Ok(self)
    }

    pub fn params(&self) -> &PmsmParams {
        &self.params
    }

    fn residual(&self, s: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        let (x, z) = s.split_at(2);
        let zero = [0.0, 0.0];
        let mut r = self.slow(x, z, &zero, w)?;
        r.extend(self.fast(x, z, &zero, w)?);
        Ok(r)
    }

    /// Power-balance starting point: `i_d = 0`, bus at its reference, and
    /// `i_q` carrying the load at the back-EMF-limited duty ratio.
    fn initial_guess(&self, w: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let v = w[0];
        let d_q = 2.0 * p.omega_r() * p.lambda_m / v;
        let i_q = (v / p.r_load + w[1]) / (0.75 * d_q);
        let zeta_v = -i_q / p.ki_v.max(f64::MIN_POSITIVE);
        let zeta_iq = (p.rs * i_q) / p.ki_iq.max(f64::MIN_POSITIVE);
        vec![v, zeta_v, 0.0, 0.0, i_q, zeta_iq]
    }
}

impl TwoTimescalePlant for PmsmPlant {
    fn dims(&self) -> PlantDims {
        PlantDims { n_x: 2, n_z: 4, m: 2 }
    }

    fn slow(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        let duties = pmsm_duties(&self.params, x, z, v, w[0])?;
        pmsm_slow(&self.params, x, z, duties, w)
    }

    fn fast(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        pmsm_fast_closedloop(&self.params, x, z, v, w)
    }

    fn input_matrix(&self, x: &[f64], _z: &[f64], _w: &[f64]) -> Result<RealMatrix, PlantError> {
        pmsm_input_matrix(&self.params, x[0])
    }

    fn jacobians(
        &self,
        x: &[f64],
        z: &[f64],
        _w: &[f64],
    ) -> Option<Result<(RealMatrix, RealMatrix), PlantError>> {
        Some(pmsm_jacobians(&self.params, x, z))
    }

    fn state_names(&self) -> Vec<String> {
        ["v_dc", "zeta_v", "i_d", "zeta_id", "i_q", "zeta_iq"]
            .map(String::from)
            .to_vec()
    }

    fn injection_names(&self) -> Vec<String> {
        vec!["v_d".to_string(), "v_q".to_string()]
    }

    fn exogenous_names(&self) -> Vec<String> {
        vec!["v-dc-ref".to_string(), "i-load".to_string()]
    }

    fn default_exogenous(&self) -> Vec<f64> {
        vec![self.v_dc_ref, self.params.i_load]
    }

    /// Also accepts `p-load` (total watts), split at the current bus
    /// reference.
    fn apply_event(&self, w: &mut [f64], key: &str, value: f64) -> Result<(), PlantError> {
        match key {
            "v-dc-ref" => {
                require_bus(value)?;
                w[0] = value;
            }
            "i-load" => w[1] = value,
            "p-load" => w[1] = split_load(value, w[0], self.params.r_load),
            other => return Err(PlantError::UnknownInput(other.to_string())),
        }
        Ok(())
    }

    /// Damped Newton iteration on the full right-hand side with a
    /// finite-difference Jacobian, from a power-balance guess.
    fn equilibrium(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PlantError> {
        require_bus(w[0])?;
        let mut s = self.initial_guess(w);
        let mut r = self.residual(&s, w)?;
        let mut r_norm = vec_norm(&r);
        for _ in 0..EQUILIBRIUM_MAX_ITER {
            let mut failed = None;
            let jac = jacobian_fd(
                |probe| {
                    self.residual(probe, w).unwrap_or_else(|e| {
                        failed.get_or_insert(e);
                        vec![f64::NAN; probe.len()]
                    })
                },
                &s,
                DEFAULT_FD_SCALE,
            );
            if let Some(e) = failed {
                return Err(e);
            }
            let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
            let step = solve_linear(&jac?, &neg_r)?;

            let mut lambda = 1.0;
            let (trial, trial_r, trial_norm) = loop {
                let trial: Vec<f64> = s.iter().zip(&step).map(|(a, d)| a + lambda * d).collect();
                if let Ok(tr) = self.residual(&trial, w) {
                    let n = vec_norm(&tr);
                    if n < r_norm || lambda < 1e-6 {
                        break (trial, tr, n);
                    }
                }
                lambda *= 0.5;
                if lambda < 1e-6 {
                    return Err(PlantError::EquilibriumNotFound {
                        iterations: 0,
                        residual: r_norm,
                    });
                }
            };
            let step_norm = lambda * vec_norm(&step);
            s = trial;
            r = trial_r;
            r_norm = trial_norm;
            if step_norm <= EQUILIBRIUM_TOL * (1.0 + vec_norm(&s)) {
                let z = s.split_off(2);
                return Ok((s, z));
            }
        }
        Err(PlantError::EquilibriumNotFound {
            iterations: EQUILIBRIUM_MAX_ITER,
            residual: r_norm,
        })
    }
}
