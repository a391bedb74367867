//! Thin SVD by one-sided (Hestenes) Jacobi rotations and the
//! pseudoinverses built on it.

use super::{LinalgError, RealMatrix, Tolerances};

const MAX_JACOBI_SWEEPS: usize = 60;

/// Thin singular value decomposition `A = U Σ Vᵀ` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows × k`, orthonormal columns.
    pub u: RealMatrix,
    /// Nonincreasing, nonnegative.
    pub singular_values: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: RealMatrix,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> RealMatrix {
        let k = self.singular_values.len();
        let mut us = self.u.clone();
        for i in 0..us.rows() {
            for j in 0..k {
                us[(i, j)] *= self.singular_values[j];
            }
        }
        &us * &self.v.transpose()
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    pub fn sigma_min(&self) -> f64 {
        self.singular_values.last().copied().unwrap_or(0.0)
    }
}

/// Thin SVD of any finite matrix.
pub fn svd(a: &RealMatrix) -> Result<SvdFactors, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite { op: "svd" });
    }
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        let t = jacobi_tall(&a.transpose())?;
        Ok(SvdFactors {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        })
    }
}

fn jacobi_tall(a: &RealMatrix) -> Result<SvdFactors, LinalgError> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = RealMatrix::identity(n);

    let mut converged = n < 2;
    let orth_tol = f64::EPSILON * (m as f64).max(4.0);
    // Columns at roundoff level carry no information; rotating them only
    // reshuffles noise and can cycle.
    let negligible = (f64::EPSILON * a.frobenius_norm()).powi(2);
    for _ in 0..MAX_JACOBI_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if alpha <= negligible || beta <= negligible {
                    continue;
                }
                if gamma == 0.0 || gamma.abs() <= orth_tol * (alpha * beta).sqrt() {
                    continue;
                }
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + zeta.hypot(1.0));
                if t == 0.0 || !t.is_finite() {
                    continue;
                }
                rotated = true;
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (wp, wq) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let (vp, vq) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        converged = !rotated;
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            op: "svd",
            iterations: MAX_JACOBI_SWEEPS,
        });
    }

    let mut order: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, (0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut u = RealMatrix::zeros(m, n);
    let mut vs = RealMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let scale = order.first().map_or(0.0, |o| o.1);
    for (k, &(j, s)) in order.iter().enumerate() {
        sigma.push(s);
        for i in 0..n {
            vs[(i, k)] = v[(i, j)];
        }
        if s > scale * f64::EPSILON && s > 0.0 {
            for i in 0..m {
                u[(i, k)] = w[(i, j)] / s;
            }
        }
    }
    complete_orthonormal_columns(&mut u, &sigma, scale);
    Ok(SvdFactors {
        u,
        singular_values: sigma,
        v: vs,
    })
}

/// Fills columns of `u` belonging to (numerically) zero singular values with
/// unit vectors orthogonal to the rest, by Gram-Schmidt over the canonical
/// basis.
fn complete_orthonormal_columns(u: &mut RealMatrix, sigma: &[f64], scale: f64) {
    let m = u.rows();
    for k in 0..sigma.len() {
        if sigma[k] > scale * f64::EPSILON && sigma[k] > 0.0 {
            continue;
        }
        for e in 0..m {
            let mut cand = vec![0.0; m];
            cand[e] = 1.0;
            for j in 0..sigma.len() {
                if j == k || (u.column(j).iter().all(|&x| x == 0.0)) {
                    continue;
                }
                let col = u.column(j);
                let dot: f64 = col.iter().zip(&cand).map(|(a, b)| a * b).sum();
                for i in 0..m {
                    cand[i] -= dot * col[i];
                }
            }
            let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for i in 0..m {
                    u[(i, k)] = cand[i] / norm;
                }
                break;
            }
        }
    }
}

fn check_rank(f: &SvdFactors, tol: &Tolerances) -> Result<(), LinalgError> {
    let (max, min) = (f.sigma_max(), f.sigma_min());
    if max == 0.0 || min < tol.rank_rel * max {
        return Err(LinalgError::RankDeficient {
            sigma_min: min,
            sigma_max: max,
        });
    }
    Ok(())
}

/// `V Σ⁻¹ Uᵀ` over all singular values (the caller has checked the rank).
fn pinv_from(f: &SvdFactors) -> RealMatrix {
    let mut vs = f.v.clone();
    for i in 0..vs.rows() {
        for (j, s) in f.singular_values.iter().enumerate() {
            vs[(i, j)] /= s;
        }
    }
    &vs * &f.u.transpose()
}

/// Left inverse `(BᵀB)⁻¹Bᵀ` of a tall (or square) full-column-rank matrix.
pub fn pinv_left_with(b: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    if b.rows() < b.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "pinv_left (needs rows >= cols)",
            left: b.shape(),
            right: b.shape(),
        });
    }
    let f = svd(b)?;
    check_rank(&f, tol)?;
    Ok(pinv_from(&f))
}

/// Right inverse `Bᵀ(BBᵀ)⁻¹` of a wide (or square) full-row-rank matrix.
pub fn pinv_right_with(b: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    if b.rows() > b.cols() {
        return Err(LinalgError::DimensionMismatch {
            op: "pinv_right (needs cols >= rows)",
            left: b.shape(),
            right: b.shape(),
        });
    }
    let f = svd(b)?;
    check_rank(&f, tol)?;
    Ok(pinv_from(&f))
}

/// Largest singular value.
pub fn spectral_norm(a: &RealMatrix) -> Result<f64, LinalgError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0.0);
    }
    Ok(svd(a)?.sigma_max())
}
