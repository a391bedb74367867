use super::{LinalgError, RealMatrix};

/// Default relative step for [`jacobian_fd`].
pub const DEFAULT_FD_SCALE: f64 = 1e-6;

/// Central-difference Jacobian of `func` at `point`, with per-coordinate
/// step `scale * max(1, |point_i|)`.
pub fn jacobian_fd<F>(mut func: F, point: &[f64], scale: f64) -> Result<RealMatrix, LinalgError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let base = func(point);
    if base.iter().any(|v| !v.is_finite()) {
        return Err(LinalgError::NonFiniteEvaluation);
    }
    let rows = base.len();
    let mut jac = RealMatrix::zeros(rows, point.len());
    let mut probe = point.to_vec();
    for j in 0..point.len() {
        let h = scale * point[j].abs().max(1.0);
        probe[j] = point[j] + h;
        let plus = func(&probe);
        probe[j] = point[j] - h;
        let minus = func(&probe);
        probe[j] = point[j];
        if plus.len() != rows || minus.len() != rows {
            return Err(LinalgError::DimensionMismatch {
                op: "jacobian_fd",
                left: (rows, 1),
                right: (plus.len().max(minus.len()), 1),
            });
        }
        for i in 0..rows {
            let d = (plus[i] - minus[i]) / (2.0 * h);
            if !d.is_finite() {
                return Err(LinalgError::NonFiniteEvaluation);
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac)
}
