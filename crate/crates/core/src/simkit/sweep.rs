use num_complex::Complex64;

use super::SimError;
use crate::densemath::vec_norm;
use crate::plants::{buck_closedloop, BuckParams};
use crate::senscond::{error_bound_estimate, sensitivity_linear, CondError};
use crate::sptheory::{eigen_report, scale_epsilon, EigenReport, PartitionedLinearSystem, SpError};

/// For each ε, the size of the conditioning term `ε S f` at the probe state,
/// relative to the fast-state field `A21 x + A22 z` in its ε-multiplied form
/// (which does not depend on ε). Falls back to the absolute size when that
/// field vanishes.
pub fn epsilon_sweep(
    base: &PartitionedLinearSystem,
    eps_list: &[f64],
    x: &[f64],
    z: &[f64],
) -> Result<Vec<(f64, f64)>, SimError> {
    let f = base.slow_derivative(x, z).map_err(SimError::from)?;
    let (a21, a22, _) = base.raw_fast_blocks();
    let mut g = a21.mul_vec(x).map_err(CondError::from)?;
    for (gi, t) in g.iter_mut().zip(a22.mul_vec(z).map_err(CondError::from)?) {
        *gi += t;
    }
    let g_norm = vec_norm(&g);
    eps_list
        .iter()
        .map(|&eps| {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(SimError::InvalidEpsilon(eps));
            }
            let scaled = scale_epsilon(base, eps).map_err(SimError::from)?;
            let sf = sensitivity_linear(&scaled)?.mul_vec(&f).map_err(CondError::from)?;
            let impact = scaled.epsilon() * vec_norm(&sf);
            Ok((eps, if g_norm > 0.0 { impact / g_norm } else { impact }))
        })
        .collect()
}

fn sp_to_sim(e: SpError) -> SimError {
    match e {
        SpError::InvalidEpsilon(eps) => SimError::InvalidEpsilon(eps),
        SpError::Linalg(l) => SimError::Conditioning(l.into()),
        SpError::Conditioning(c) => SimError::Conditioning(*c),
        other => SimError::InvalidScenario(other.to_string()),
    }
}

/// One gain set of the buck timescale study.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSweepRow {
    /// `(kp_v, ki_v, kp_i, ki_i)`.
    pub gains: [f64; 4],
    pub report: EigenReport,
    pub error_bound: f64,
}

impl GainSweepRow {
    pub fn displacement(&self) -> f64 {
        self.report.displacement()
    }

    pub fn no_sc(&self) -> &[Complex64] {
        &self.report.full_no_sc
    }

    pub fn with_sc(&self) -> &[Complex64] {
        &self.report.full_with_sc
    }
}

/// Eigen report and error estimate of the buck loop for each gain set;
/// failures are reported per row.
pub fn gain_sweep(base: &BuckParams, gain_sets: &[[f64; 4]]) -> Vec<Result<GainSweepRow, SimError>> {
    gain_sets
        .iter()
        .map(|&gains| {
            let p = base.with_gains(gains);
            let model = buck_closedloop(&p).map_err(SimError::from)?;
            let report = eigen_report(&model.system).map_err(SimError::from)?;
            let error_bound = error_bound_estimate(&model.system)?;
            Ok(GainSweepRow {
                gains,
                report,
                error_bound,
            })
        })
        .collect()
}

impl From<SpError> for SimError {
    fn from(e: SpError) -> Self {
        sp_to_sim(e)
    }
}
