//! Fixed-step RK4 simulation of conditioned closed loops, with scheduled
//! step events, trajectory recording and transient metrics.

mod csv;
mod metrics;
mod scenario;
mod sweep;

pub use csv::write_csv;
pub use metrics::{compare_runs, metrics, ReferenceSchedule, RunComparison, TransientMetrics};
pub use scenario::{InitialState, ModeRequest, PlantKind, ScenarioConfig, ScheduledEvent};
pub use sweep::{epsilon_sweep, gain_sweep, GainSweepRow};

use crate::densemath::vec_norm;
use crate::params::ParamError;
use crate::plants::{PlantError, TwoTimescalePlant};
use crate::senscond::{self, CondError, SensitivityMode};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("state became non-finite at t = {time:.6e} s")]
    NonFiniteState { time: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("trajectories are on different time grids")]
    GridMismatch,
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Conditioning(#[from] CondError),
    #[error(transparent)]
    Params(#[from] ParamError),
}

/// Time-stamped samples of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub state_names: Vec<String>,
    pub injection_names: Vec<String>,
    pub exogenous_names: Vec<String>,
    pub n_x: usize,
    pub times: Vec<f64>,
    /// `[x, z]` per sample.
    pub states: Vec<Vec<f64>>,
    pub injections: Vec<Vec<f64>>,
    /// `‖B v − S f‖₂` per sample.
    pub residual_norms: Vec<f64>,
    /// `‖f‖₂` (slow derivative without injection) per sample.
    pub slow_deriv_norms: Vec<f64>,
    /// Exogenous inputs in effect at each sample.
    pub exogenous: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// One state component over time.
    pub fn component(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[index]).collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }
}

/// Injection and diagnostics at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionSample {
    pub v: Vec<f64>,
    pub residual_norm: f64,
    pub slow_deriv_norm: f64,
}

/// Conditioning injection of `plant` at `(x, z)`: `f` is evaluated without
/// injection, `S f` is the target, and `mode` turns it into `v`. With
/// [`SensitivityMode::None`] the injection is zero and the residual is the
/// full target.
pub fn injection_at<P: TwoTimescalePlant + ?Sized>(
    plant: &P,
    mode: &SensitivityMode,
    x: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<InjectionSample, SimError> {
    let m = plant.dims().m;
    let f = plant.slow(x, z, &vec![0.0; m], w)?;
    let s = senscond::sensitivity_nonlinear(plant, x, z, w)?;
    let target = senscond::conditioning_target(&s, &f)?;
    let b = plant.input_matrix(x, z, w)?;
    let res = senscond::solve_injection(&b, &target, mode)?;
    Ok(InjectionSample {
        v: res.v,
        residual_norm: res.residual_norm,
        slow_deriv_norm: vec_norm(&f),
    })
}

/// Run settings independent of how the plant was built.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub mode: SensitivityMode,
    pub dt: f64,
    pub horizon: f64,
    /// Record every k-th grid point (the last one is always recorded).
    pub sample_every: usize,
    pub events: Vec<ScheduledEvent>,
}

impl RunSpec {
    pub fn new(mode: SensitivityMode, dt: f64, horizon: f64) -> Self {
        Self {
            mode,
            dt,
            horizon,
            sample_every: 1,
            events: Vec::new(),
        }
    }

    pub fn with_event(mut self, time: f64, key: &str, value: f64) -> Self {
        self.events.push(ScheduledEvent {
            time,
            key: key.to_string(),
            value,
        });
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::InvalidScenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(SimError::InvalidScenario(format!(
                "horizon must be nonnegative, got {}",
                self.horizon
            )));
        }
        if self.sample_every == 0 {
            return Err(SimError::InvalidScenario("sample-every must be at least 1".into()));
        }
        for e in &self.events {
            if !(e.time >= 0.0 && e.time <= self.horizon) {
                return Err(SimError::InvalidScenario(format!(
                    "event `{}` at t = {} lies outside [0, {}]",
                    e.key, e.time, self.horizon
                )));
            }
        }
        Ok(())
    }
}

/// Grid index of the first point at or after `t`.
fn snap(t: f64, dt: f64) -> usize {
    (t / dt - 1e-9).ceil().max(0.0) as usize
}

/// Integrates `plant` from `(x0, z0)` under exogenous inputs `w0` with
/// classical RK4. The injection is re-evaluated at every stage, so the
/// conditioned loop is a smooth vector field between events.
pub fn simulate<P: TwoTimescalePlant + ?Sized>(
    plant: &P,
    spec: &RunSpec,
    x0: &[f64],
    z0: &[f64],
    w0: &[f64],
) -> Result<Trajectory, SimError> {
    spec.validate()?;
    let dims = plant.dims();
    if x0.len() != dims.n_x || z0.len() != dims.n_z || w0.len() != plant.exogenous_names().len() {
        return Err(SimError::InvalidScenario(format!(
            "initial state has {}+{} entries and {} inputs, plant expects {}+{} and {}",
            x0.len(),
            z0.len(),
            w0.len(),
            dims.n_x,
            dims.n_z,
            plant.exogenous_names().len()
        )));
    }
    let n_x = dims.n_x;
    let dt = spec.dt;
    let steps = if spec.horizon == 0.0 { 0 } else { snap(spec.horizon, dt) };

    let mut events: Vec<(usize, &ScheduledEvent)> =
        spec.events.iter().map(|e| (snap(e.time, dt), e)).collect();
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.time.total_cmp(&b.1.time)));
    let mut next_event = 0;

    let conditioned = spec.mode != SensitivityMode::None;
    let zero_v = vec![0.0; dims.m];
    let rhs = |s: &[f64], w: &[f64]| -> Result<Vec<f64>, SimError> {
        let (x, z) = s.split_at(n_x);
        let v = if conditioned {
            injection_at(plant, &spec.mode, x, z, w)?.v
        } else {
            zero_v.clone()
        };
        let mut d = plant.slow(x, z, &v, w)?;
        d.extend(plant.fast(x, z, &v, w)?);
        Ok(d)
    };

    let mut traj = Trajectory {
        state_names: plant.state_names(),
        injection_names: plant.injection_names(),
        exogenous_names: plant.exogenous_names(),
        n_x,
        times: Vec::new(),
        states: Vec::new(),
        injections: Vec::new(),
        residual_norms: Vec::new(),
        slow_deriv_norms: Vec::new(),
        exogenous: Vec::new(),
    };
    let mut s: Vec<f64> = x0.iter().chain(z0).copied().collect();
    let mut w = w0.to_vec();
    let mut k1 = vec![0.0; s.len()];
    let mut probe = vec![0.0; s.len()];

    for k in 0..=steps {
        while next_event < events.len() && events[next_event].0 <= k {
            let e = events[next_event].1;
            plant.apply_event(&mut w, &e.key, e.value)?;
            next_event += 1;
        }
        let t = k as f64 * dt;
        if k % spec.sample_every == 0 || k == steps {
            let (x, z) = s.split_at(n_x);
            let sample = injection_at(plant, &spec.mode, x, z, &w)?;
            traj.times.push(t);
            traj.states.push(s.clone());
            traj.injections.push(sample.v);
            traj.residual_norms.push(sample.residual_norm);
            traj.slow_deriv_norms.push(sample.slow_deriv_norm);
            traj.exogenous.push(w.clone());
        }
        if k == steps {
            break;
        }

        let d1 = rhs(&s, &w)?;
        for i in 0..s.len() {
            probe[i] = s[i] + 0.5 * dt * d1[i];
        }
        let d2 = rhs(&probe, &w)?;
        for i in 0..s.len() {
            probe[i] = s[i] + 0.5 * dt * d2[i];
        }
        let d3 = rhs(&probe, &w)?;
        for i in 0..s.len() {
            probe[i] = s[i] + dt * d3[i];
        }
        let d4 = rhs(&probe, &w)?;
        for i in 0..s.len() {
            k1[i] = d1[i] + 2.0 * d2[i] + 2.0 * d3[i] + d4[i];
            s[i] += dt / 6.0 * k1[i];
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState {
                time: (k + 1) as f64 * dt,
            });
        }
    }
    Ok(traj)
}

/// Builds the scenario's plant, resolves its initial state and runs it.
pub fn integrate(scenario: &ScenarioConfig) -> Result<Trajectory, SimError> {
    let plant = scenario.build_plant()?;
    let w0 = scenario.initial_exogenous(plant.as_ref())?;
    let (x0, z0) = scenario.initial_state(plant.as_ref(), &w0)?;
    let b = plant.input_matrix(&x0, &z0, &w0)?;
    let spec = RunSpec {
        mode: scenario.mode.resolve(&b),
        dt: scenario.dt,
        horizon: scenario.horizon,
        sample_every: scenario.sample_every,
        events: scenario.events.clone(),
    };
    simulate(plant.as_ref(), &spec, &x0, &z0, &w0)
}
