use super::{PlantDims, PlantError, TwoTimescalePlant};
use crate::densemath::{solve_linear, RealMatrix};
use crate::params::{ParamError, ParamMap};
use crate::sptheory::PartitionedLinearSystem;

/// A [`PartitionedLinearSystem`] driven by exogenous inputs:
///
/// ```text
/// ẋ = A11 x + A12 z + Ex w
/// ż = A21 x + A22 z + Ez w + B v        (physical-time blocks)
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPlant {
    sys: PartitionedLinearSystem,
    ex: RealMatrix,
    ez: RealMatrix,
    exogenous: Vec<String>,
    defaults: Vec<f64>,
    state_names: Vec<String>,
}

impl LinearPlant {
    /// Without exogenous inputs; states are named `x1.., z1..`.
    pub fn new(sys: PartitionedLinearSystem) -> Self {
        let (n_x, n_z) = (sys.n_x(), sys.n_z());
        Self {
            ex: RealMatrix::zeros(n_x, 0),
            ez: RealMatrix::zeros(n_z, 0),
            exogenous: Vec::new(),
            defaults: Vec::new(),
            state_names: default_state_names(n_x, n_z),
            sys,
        }
    }

    /// Adds exogenous inputs entering through `ex` (n_x×k) and `ez`
    /// (n_z×k, physical time). `names` and `defaults` have length k.
    pub fn with_exogenous(
        mut self,
        ex: RealMatrix,
        ez: RealMatrix,
        names: Vec<String>,
        defaults: Vec<f64>,
    ) -> Result<Self, PlantError> {
        let k = names.len();
        if ex.shape() != (self.sys.n_x(), k) || ez.shape() != (self.sys.n_z(), k) || defaults.len() != k
        {
            return Err(PlantError::InvalidParams {
                key: "exogenous",
                reason: format!(
                    "shapes {:?} and {:?} do not fit {k} inputs",
                    ex.shape(),
                    ez.shape()
                ),
            });
        }
        self.ex = ex;
        self.ez = ez;
        self.exogenous = names;
        self.defaults = defaults;
        Ok(self)
    }

    pub fn with_state_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.sys.n_x() + self.sys.n_z());
        self.state_names = names;
        self
    }

    pub fn system(&self) -> &PartitionedLinearSystem {
        &self.sys
    }

    pub fn exogenous_matrices(&self) -> (&RealMatrix, &RealMatrix) {
        (&self.ex, &self.ez)
    }

    /// Reads `a11`, `a12`, `a21`, `a22`, `b` as matrix literals (`1, 2; 3, 4`),
    /// optional `epsilon`, and an optional exogenous input `w` with `ex`,
    /// `ez` column literals and default value `w`.
    pub fn from_params(map: &ParamMap) -> Result<Self, PlantError> {
        let block = |key: &str| -> Result<RealMatrix, PlantError> {
            let e = map
                .get(key)
                .ok_or_else(|| ParamError::MissingKey(key.to_string()))?;
            parse_matrix(&e.value).map_err(|message| {
                ParamError::Syntax {
                    line: e.line,
                    message: format!("key `{key}`: {message}"),
                }
                .into()
            })
        };
        let epsilon = map.number_or("epsilon", 1.0)?;
        let sys = PartitionedLinearSystem::new(
            block("a11")?,
            block("a12")?,
            block("a21")?,
            block("a22")?,
            block("b")?,
        )
        .and_then(|s| s.with_epsilon(epsilon))
        .map_err(|e| PlantError::InvalidParams {
            key: "a11..b",
            reason: e.to_string(),
        })?;
        let plant = LinearPlant::new(sys);
        if !map.contains("ex") && !map.contains("ez") {
            return Ok(plant);
        }
        let ex = block("ex")?;
        let ez = block("ez")?;
        let w = map.number_or("w", 0.0)?;
        plant.with_exogenous(ex, ez, vec!["w".to_string()], vec![w])
    }
}

fn default_state_names(n_x: usize, n_z: usize) -> Vec<String> {
    (1..=n_x)
        .map(|i| format!("x{i}"))
        .chain((1..=n_z).map(|i| format!("z{i}")))
        .collect()
}

/// Rows separated by `;`, entries by `,` or whitespace.
pub fn parse_matrix(text: &str) -> Result<RealMatrix, String> {
    let rows: Vec<Vec<f64>> = text
        .split(';')
        .map(|row| {
            row.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("`{s}` is not a number"))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err("rows must be nonempty and of equal length".to_string());
    }
    Ok(RealMatrix::from_rows(&rows))
}

fn add_into(acc: &mut [f64], m: &RealMatrix, v: &[f64]) -> Result<(), PlantError> {
    for (a, t) in acc.iter_mut().zip(m.mul_vec(v)?) {
        *a += t;
    }
    Ok(())
}

impl TwoTimescalePlant for LinearPlant {
    fn dims(&self) -> PlantDims {
        PlantDims {
            n_x: self.sys.n_x(),
            n_z: self.sys.n_z(),
            m: self.sys.m(),
        }
    }

    fn slow(&self, x: &[f64], z: &[f64], _v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        let mut out = self.sys.a11().mul_vec(x)?;
        add_into(&mut out, self.sys.a12(), z)?;
        add_into(&mut out, &self.ex, w)?;
        Ok(out)
    }

    fn fast(&self, x: &[f64], z: &[f64], v: &[f64], w: &[f64]) -> Result<Vec<f64>, PlantError> {
        let mut out = self.sys.a21().mul_vec(x)?;
        add_into(&mut out, &self.sys.a22(), z)?;
        add_into(&mut out, &self.sys.b(), v)?;
        add_into(&mut out, &self.ez, w)?;
        Ok(out)
    }

    fn input_matrix(&self, _x: &[f64], _z: &[f64], _w: &[f64]) -> Result<RealMatrix, PlantError> {
        Ok(self.sys.b())
    }

    fn jacobians(
        &self,
        _x: &[f64],
        _z: &[f64],
        _w: &[f64],
    ) -> Option<Result<(RealMatrix, RealMatrix), PlantError>> {
        Some(Ok((self.sys.a21(), self.sys.a22())))
    }

    fn state_names(&self) -> Vec<String> {
        self.state_names.clone()
    }

    fn injection_names(&self) -> Vec<String> {
        (1..=self.sys.m()).map(|i| format!("v{i}")).collect()
    }

    fn exogenous_names(&self) -> Vec<String> {
        self.exogenous.clone()
    }

    fn default_exogenous(&self) -> Vec<f64> {
        self.defaults.clone()
    }

    fn equilibrium(&self, w: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PlantError> {
        let n_x = self.sys.n_x();
        let mut rhs = self.ex.mul_vec(w)?;
        rhs.extend(self.ez.mul_vec(w)?);
        rhs.iter_mut().for_each(|r| *r = -*r);
        let mut s = solve_linear(&self.sys.full_matrix(), &rhs)?;
        let z = s.split_off(n_x);
        Ok((s, z))
    }
}
