//! Sensitivity conditioning: the quasi-steady-state sensitivity
//! `S = −(∇z g)⁻¹ ∇x g`, the feedforward target `S f`, and the injection `v`
//! that realizes it through the fast-state input matrix.

use crate::densemath::{
    jacobian_fd, pinv_left, pinv_right, solve_linear, solve_matrix, spectral_norm, vec_norm,
    LinalgError, RealMatrix, DEFAULT_FD_SCALE,
};
use crate::plants::{PlantError, TwoTimescalePlant};
use crate::sptheory::PartitionedLinearSystem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CondError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("mode {mode} needs an input matrix with {needs}, got {rows}x{cols}")]
    ModeShapeMismatch {
        mode: &'static str,
        needs: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("fast-state Jacobian is singular (condition estimate {condition:.3e})")]
    SingularJacobian { condition: f64 },
    #[error("free vector has length {found}, expected {expected}")]
    FreeVectorLength { found: usize, expected: usize },
    #[error("{op}: length {found}, expected {expected}")]
    DimensionMismatch {
        op: &'static str,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Plant(#[from] PlantError),
}

/// How the conditioning target is turned into an injection.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SensitivityMode {
    /// No injection.
    #[default]
    None,
    /// `v = B⁻¹ S f` for square invertible B.
    ExactSquare,
    /// `v = B†R S f + (I − B†R B) p` for wide B; `p = None` means zero.
    ExactWide { p: Option<Vec<f64>> },
    /// Least squares `v = B†L S f` for tall B.
    Approximate,
}

impl SensitivityMode {
    pub fn name(&self) -> &'static str {
        match self {
            SensitivityMode::None => "none",
            SensitivityMode::ExactSquare => "exact-square",
            SensitivityMode::ExactWide { .. } => "exact-wide",
            SensitivityMode::Approximate => "approximate",
        }
    }
}

/// Picks the mode from the shape of B: square → exact, wide → exact with
/// zero free vector, tall → least squares.
pub fn auto_mode(b: &RealMatrix) -> SensitivityMode {
    use std::cmp::Ordering::*;
    match b.cols().cmp(&b.rows()) {
        Equal => SensitivityMode::ExactSquare,
        Greater => SensitivityMode::ExactWide { p: None },
        Less => SensitivityMode::Approximate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningResult {
    pub mode: SensitivityMode,
    pub v: Vec<f64>,
    /// `S f`, the wanted rate of change of the quasi-steady state.
    pub target: Vec<f64>,
    /// `B v − S f`.
    pub residual: Vec<f64>,
    pub residual_norm: f64,
}

/// `S = −A22⁻¹A21` of a linear system (ε-invariant).
pub fn sensitivity_linear(sys: &PartitionedLinearSystem) -> Result<RealMatrix, CondError> {
    let (a21, a22, _) = sys.raw_fast_blocks();
    Ok(-&solve_matrix(a22, a21)?)
}

/// `S = −(∇z g)⁻¹ ∇x g` at `(x, z)` under exogenous inputs `w`, from the
/// plant's analytic Jacobians when it has them and central differences
/// otherwise.
pub fn sensitivity_nonlinear<P: TwoTimescalePlant + ?Sized>(
    plant: &P,
    x: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<RealMatrix, CondError> {
    let (gx, gz) = match plant.jacobians(x, z, w) {
        Some(j) => j?,
        None => fd_jacobians(plant, x, z, w)?,
    };
    sensitivity_from_jacobians(&gx, &gz)
}

/// `−gz⁻¹ gx`, failing with `SingularJacobian` past the default condition
/// limit.
pub fn sensitivity_from_jacobians(gx: &RealMatrix, gz: &RealMatrix) -> Result<RealMatrix, CondError> {
    match solve_matrix(gz, gx) {
        Ok(s) => Ok(-&s),
        Err(LinalgError::SingularMatrix { condition }) => {
            Err(CondError::SingularJacobian { condition })
        }
        Err(e) => Err(e.into()),
    }
}

/// Finite-difference `(∇x g, ∇z g)` of the plant's injection-free fast
/// dynamics.
pub fn fd_jacobians<P: TwoTimescalePlant + ?Sized>(
    plant: &P,
    x: &[f64],
    z: &[f64],
    w: &[f64],
) -> Result<(RealMatrix, RealMatrix), CondError> {
    let zero_v = vec![0.0; plant.dims().m];
    let mut failure = None;
    let mut eval = |xx: &[f64], zz: &[f64]| match plant.fast(xx, zz, &zero_v, w) {
        Ok(g) => g,
        Err(e) => {
            failure.get_or_insert(e);
            vec![f64::NAN; zz.len()]
        }
    };
    let gx = jacobian_fd(|xx| eval(xx, z), x, DEFAULT_FD_SCALE);
    let gz = jacobian_fd(|zz| eval(x, zz), z, DEFAULT_FD_SCALE);
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok((gx?, gz?))
}

/// `S f`.
pub fn conditioning_target(s: &RealMatrix, f_value: &[f64]) -> Result<Vec<f64>, CondError> {
    if f_value.len() != s.cols() {
        return Err(CondError::DimensionMismatch {
            op: "conditioning_target",
            found: f_value.len(),
            expected: s.cols(),
        });
    }
    Ok(s.mul_vec(f_value)?)
}

fn shape_error(mode: &'static str, needs: &'static str, b: &RealMatrix) -> CondError {
    CondError::ModeShapeMismatch {
        mode,
        needs,
        rows: b.rows(),
        cols: b.cols(),
    }
}

/// Solves `B v ≈ target` in the requested mode.
pub fn solve_injection(
    b: &RealMatrix,
    target: &[f64],
    mode: &SensitivityMode,
) -> Result<ConditioningResult, CondError> {
    let (n_z, m) = b.shape();
    if target.len() != n_z {
        return Err(CondError::DimensionMismatch {
            op: "solve_injection",
            found: target.len(),
            expected: n_z,
        });
    }
    let v = match mode {
        SensitivityMode::None => vec![0.0; m],
        SensitivityMode::ExactSquare => {
            if m != n_z {
                return Err(shape_error(mode.name(), "as many columns as rows", b));
            }
            solve_linear(b, target)?
        }
        SensitivityMode::ExactWide { p } => {
            if m <= n_z {
                return Err(shape_error(mode.name(), "more columns than rows", b));
            }
            let b_r = pinv_right(b)?;
            let mut v = b_r.mul_vec(target)?;
            if let Some(p) = p {
                if p.len() != m {
                    return Err(CondError::FreeVectorLength {
                        found: p.len(),
                        expected: m,
                    });
                }
                let bp = b.mul_vec(p)?;
                let back = b_r.mul_vec(&bp)?;
                for i in 0..m {
                    v[i] += p[i] - back[i];
                }
            }
            v
        }
        SensitivityMode::Approximate => {
            if m >= n_z {
                return Err(shape_error(mode.name(), "fewer columns than rows", b));
            }
            pinv_left(b)?.mul_vec(target)?
        }
    };
    let bv = b.mul_vec(&v)?;
    let residual: Vec<f64> = bv.iter().zip(target).map(|(a, t)| a - t).collect();
    Ok(ConditioningResult {
        mode: mode.clone(),
        residual_norm: vec_norm(&residual),
        v,
        target: target.to_vec(),
        residual,
    })
}

/// `B B†` for a full-rank B: the orthogonal projector onto the range of B
/// (the identity when B has full row rank).
pub fn range_projector(b: &RealMatrix) -> Result<RealMatrix, CondError> {
    if b.cols() >= b.rows() {
        pinv_right(b)?;
        return Ok(RealMatrix::identity(b.rows()));
    }
    Ok(b * &pinv_left(b)?)
}

fn require_tall(b: &RealMatrix, op: &'static str) -> Result<(), CondError> {
    if b.cols() > b.rows() {
        return Err(shape_error(op, "no more columns than rows", b));
    }
    Ok(())
}

/// `e = (I − B B†L) A22⁻¹A21 (A11 x + A12 z)`.
pub fn residual_error_matrixform(
    sys: &PartitionedLinearSystem,
    x: &[f64],
    z: &[f64],
) -> Result<Vec<f64>, CondError> {
    let b = sys.b();
    require_tall(&b, "residual_error_matrixform")?;
    let defect = &RealMatrix::identity(sys.n_z()) - &range_projector(&b)?;
    let m = -&sensitivity_linear(sys)?;
    let mut f = sys.a11().mul_vec(x)?;
    for (fi, t) in f.iter_mut().zip(sys.a12().mul_vec(z)?) {
        *fi += t;
    }
    Ok((&defect * &m).mul_vec(&f)?)
}

/// `‖(I − B B†L) A22⁻¹A21‖₂`, the state-independent factor bounding the
/// least-squares residual by `‖ẋ‖`.
pub fn error_bound_estimate(sys: &PartitionedLinearSystem) -> Result<f64, CondError> {
    let b = sys.b();
    require_tall(&b, "error_bound_estimate")?;
    let defect = &RealMatrix::identity(sys.n_z()) - &range_projector(&b)?;
    let m = -&sensitivity_linear(sys)?;
    Ok(spectral_norm(&(&defect * &m))?)
}

fn conditioned_matrix(sys: &PartitionedLinearSystem, projector: &RealMatrix) -> Result<RealMatrix, CondError> {
    let m = -&sensitivity_linear(sys)?;
    let pm = projector * &m;
    let bottom_left = &sys.a21() - &(&pm * sys.a11());
    let bottom_right = &sys.a22() - &(&pm * sys.a12());
    Ok(RealMatrix::from_blocks(
        sys.a11(),
        sys.a12(),
        &bottom_left,
        &bottom_right,
    )?)
}

/// Closed loop with least-squares conditioning folded in:
/// `[[A11, A12], [A21 − P M A11, A22 − P M A12]]`, `P = B B†L`,
/// `M = A22⁻¹A21`. Requires full-column-rank B with at most `n_z` columns.
pub fn closed_loop_asc(sys: &PartitionedLinearSystem) -> Result<RealMatrix, CondError> {
    let b = sys.b();
    require_tall(&b, "closed_loop_asc")?;
    conditioned_matrix(sys, &range_projector(&b)?)
}

/// Closed loop with exact conditioning:
/// `[[A11, A12], [A21 − M A11, A22 − M A12]]`.
pub fn closed_loop_exact(sys: &PartitionedLinearSystem) -> Result<RealMatrix, CondError> {
    conditioned_matrix(sys, &RealMatrix::identity(sys.n_z()))
}
