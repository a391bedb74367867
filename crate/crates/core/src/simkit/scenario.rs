use std::path::Path;

use super::SimError;
use crate::densemath::RealMatrix;
use crate::params::{parse_number_list, ParamError, ParamMap};
use crate::plants::{BuckParams, BuckPlant, LinearPlant, PmsmParams, PmsmPlant, TwoTimescalePlant};
use crate::senscond::{auto_mode, SensitivityMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlantKind {
    Buck,
    Pmsm,
    CustomLinear,
}

impl std::str::FromStr for PlantKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "buck" => Ok(PlantKind::Buck),
            "pmsm" => Ok(PlantKind::Pmsm),
            "custom-linear" | "linear" => Ok(PlantKind::CustomLinear),
            other => Err(format!("unknown plant `{other}` (expected buck, pmsm or custom-linear)")),
        }
    }
}

/// Conditioning mode as requested by a user; resolved against the input
/// matrix shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeRequest {
    #[default]
    None,
    /// Exact conditioning: inverse for square B, right pseudoinverse for
    /// wide B.
    Exact,
    Approx,
    /// Exact when B has at least as many columns as rows, least squares
    /// otherwise.
    Auto,
}

impl std::str::FromStr for ModeRequest {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(ModeRequest::None),
            "exact" => Ok(ModeRequest::Exact),
            "approx" | "approximate" => Ok(ModeRequest::Approx),
            "auto" => Ok(ModeRequest::Auto),
            other => Err(format!("unknown mode `{other}` (expected none, exact, approx or auto)")),
        }
    }
}

impl ModeRequest {
    pub fn resolve(self, b: &RealMatrix) -> SensitivityMode {
        match self {
            ModeRequest::None => SensitivityMode::None,
            ModeRequest::Approx => SensitivityMode::Approximate,
            ModeRequest::Auto => auto_mode(b),
            ModeRequest::Exact => {
                if b.cols() > b.rows() {
                    SensitivityMode::ExactWide { p: None }
                } else {
                    SensitivityMode::ExactSquare
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Steady state of the uninjected loop under the initial inputs.
    Equilibrium,
    /// Explicit `[x, z]`.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduledEvent {
    pub time: f64,
    pub key: String,
    pub value: f64,
}

/// A simulation scenario read from a `key = value` file:
///
/// ```text
/// plant = buck               # buck | pmsm | custom-linear
/// params-file = buck.params  # optional, relative to the scenario file
/// mode = approx              # none | exact | approx | auto
/// dt = 5e-6
/// horizon = 0.1
/// initial = equilibrium      # or a comma-separated [x, z] list
/// sample-every = 1
/// saturate = false           # buck bridge-voltage clamp
/// event = 0.05, v-ref, 75
/// ```
///
/// Every other key is a plant parameter or an initial exogenous input.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plant: PlantKind,
    pub params: ParamMap,
    pub mode: ModeRequest,
    pub dt: f64,
    pub horizon: f64,
    pub sample_every: usize,
    pub initial: InitialState,
    pub events: Vec<ScheduledEvent>,
    pub saturate: bool,
}

const SCENARIO_KEYS: [&str; 9] = [
    "plant",
    "params-file",
    "mode",
    "dt",
    "horizon",
    "initial",
    "sample-every",
    "saturate",
    "event",
];

impl ScenarioConfig {
    /// Parses scenario text; `params-file` is resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, SimError> {
        let map = ParamMap::parse(text)?;
        let plant: PlantKind = map
            .str("plant")?
            .parse()
            .map_err(|message| syntax(&map, "plant", message))?;

        let mut params = match map.get("params-file") {
            Some(e) => {
                let path = base_dir.map_or_else(|| e.value.clone().into(), |d| d.join(&e.value));
                let text = std::fs::read_to_string(&path).map_err(|err| {
                    SimError::InvalidScenario(format!("cannot read {}: {err}", path.display()))
                })?;
                ParamMap::parse(&text)?
            }
            None => ParamMap::default(),
        };
        for e in map.entries() {
            if !SCENARIO_KEYS.contains(&e.key.as_str()) {
                params.set(&e.key, e.value.clone());
            }
        }

        let mode = match map.get("mode") {
            Some(e) => e.value.parse().map_err(|m| syntax(&map, "mode", m))?,
            None => ModeRequest::None,
        };
        let initial = match map.get("initial") {
            None => InitialState::Equilibrium,
            Some(e) if e.value == "equilibrium" => InitialState::Equilibrium,
            Some(e) => InitialState::Values(
                parse_number_list(&e.value).map_err(|m| syntax(&map, "initial", m))?,
            ),
        };
        let sample_every = map.number_or("sample-every", 1.0)?;
        if sample_every < 1.0 || sample_every.fract() != 0.0 {
            return Err(SimError::InvalidScenario(format!(
                "sample-every must be a positive integer, got {sample_every}"
            )));
        }
        let saturate = match map.get("saturate") {
            None => false,
            Some(e) => match e.value.as_str() {
                "true" | "on" | "1" => true,
                "false" | "off" | "0" => false,
                _ => return Err(syntax(&map, "saturate", "expected true or false".into())),
            },
        };

        let mut events = Vec::new();
        for e in map.all("event") {
            let parts: Vec<&str> = e.value.split(',').map(str::trim).collect();
            let bad = || ParamError::Syntax {
                line: e.line,
                message: format!("event must be `<t>, <key>, <value>`, found `{}`", e.value),
            };
            let [t, key, value] = parts[..] else {
                return Err(bad().into());
            };
            let time: f64 = t.parse().map_err(|_| bad())?;
            let value: f64 = value.parse().map_err(|_| bad())?;
            if !time.is_finite() || !value.is_finite() {
                return Err(bad().into());
            }
            events.push(ScheduledEvent {
                time,
                key: key.to_string(),
                value,
            });
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));

        let cfg = Self {
            plant,
            params,
            mode,
            dt: map.number("dt")?,
            horizon: map.number("horizon")?,
            sample_every: sample_every as usize,
            initial,
            events,
            saturate,
        };
        if cfg.dt <= 0.0 {
            return Err(SimError::InvalidScenario(format!("dt must be positive, got {}", cfg.dt)));
        }
        if cfg.horizon < 0.0 {
            return Err(SimError::InvalidScenario(format!(
                "horizon must be nonnegative, got {}",
                cfg.horizon
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|err| {
            SimError::InvalidScenario(format!("cannot read {}: {err}", path.display()))
        })?;
        Self::parse(&text, path.parent())
    }

    pub fn build_plant(&self) -> Result<Box<dyn TwoTimescalePlant>, SimError> {
        Ok(match self.plant {
            PlantKind::Buck => Box::new(
                BuckPlant::new(BuckParams::from_params(&self.params)?)?.with_saturation(self.saturate),
            ),
            PlantKind::Pmsm => {
                let plant = PmsmPlant::new(PmsmParams::from_params(&self.params)?)?;
                let v_ref = self.params.number_or("v-dc-ref", PmsmPlant::DEFAULT_V_DC_REF)?;
                Box::new(plant.with_v_dc_ref(v_ref)?)
            }
            PlantKind::CustomLinear => Box::new(LinearPlant::from_params(&self.params)?),
        })
    }

    /// Plant defaults, overridden by parameters named like an exogenous
    /// input.
    pub fn initial_exogenous(&self, plant: &dyn TwoTimescalePlant) -> Result<Vec<f64>, SimError> {
        let mut w = plant.default_exogenous();
        for (i, name) in plant.exogenous_names().iter().enumerate() {
            w[i] = self.params.number_or(name, w[i])?;
        }
        Ok(w)
    }

    pub fn initial_state(
        &self,
        plant: &dyn TwoTimescalePlant,
        w: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>), SimError> {
        let dims = plant.dims();
        match &self.initial {
            InitialState::Equilibrium => Ok(plant.equilibrium(w)?),
            InitialState::Values(v) => {
                if v.len() != dims.n_x + dims.n_z {
                    return Err(SimError::InvalidScenario(format!(
                        "initial state has {} entries, plant has {}",
                        v.len(),
                        dims.n_x + dims.n_z
                    )));
                }
                let (x, z) = v.split_at(dims.n_x);
                Ok((x.to_vec(), z.to_vec()))
            }
        }
    }
}

fn syntax(map: &ParamMap, key: &str, message: String) -> SimError {
    ParamError::Syntax {
        line: map.get(key).map_or(0, |e| e.line),
        message: format!("key `{key}`: {message}"),
    }
    .into()
}
