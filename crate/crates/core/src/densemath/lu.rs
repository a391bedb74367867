//! LU factorization with partial pivoting, plus the solve and inverse
//! built on it.

use super::{LinalgError, RealMatrix, Tolerances};

struct Lu {
    lu: RealMatrix,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &RealMatrix, tol: &Tolerances) -> Result<Self, LinalgError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            });
        }
        if !a.is_finite() {
            return Err(LinalgError::NonFinite { op: "lu" });
        }
        let n = a.rows();
        // Frobenius norm bounds the spectral norm from above.
        let threshold = tol.pivot_rel * a.frobenius_norm();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();

        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pivot <= threshold || pivot == 0.0 {
                return Err(LinalgError::SingularMatrix {
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = tmp;
                }
            }
            let d = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / d;
                lu[(i, k)] = factor;
                if factor != 0.0 {
                    for j in (k + 1)..n {
                        lu[(i, j)] -= factor * lu[(k, j)];
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[(i, j)] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                y[i] -= self.lu[(i, j)] * y[j];
            }
            y[i] /= self.lu[(i, i)];
        }
        y
    }

    fn inverse(&self) -> RealMatrix {
        let n = self.lu.rows();
        let mut inv = RealMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }
}

fn checked_inverse(a: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    let lu = Lu::factor(a, tol)?;
    let inv = lu.inverse();
    let condition = a.norm_1() * inv.norm_1();
    if !condition.is_finite() || condition > tol.condition_limit {
        return Err(LinalgError::SingularMatrix { condition });
    }
    Ok(inv)
}

/// Inverse of a square matrix; fails when the 1-norm condition number
/// exceeds the configured limit.
pub fn inverse_with(a: &RealMatrix, tol: &Tolerances) -> Result<RealMatrix, LinalgError> {
    checked_inverse(a, tol)
}

/// Solves `A x = b` for square `A`.
pub fn solve_linear_with(
    a: &RealMatrix,
    b: &[f64],
    tol: &Tolerances,
) -> Result<Vec<f64>, LinalgError> {
    if b.len() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_linear",
            left: a.shape(),
            right: (b.len(), 1),
        });
    }
    let lu = Lu::factor(a, tol)?;
    let condition = a.norm_1() * lu.inverse().norm_1();
    if !condition.is_finite() || condition > tol.condition_limit {
        return Err(LinalgError::SingularMatrix { condition });
    }
    Ok(lu.solve(b))
}

/// Solves `A X = B` column by column with a single factorization.
pub fn solve_matrix_with(
    a: &RealMatrix,
    b: &RealMatrix,
    tol: &Tolerances,
) -> Result<RealMatrix, LinalgError> {
    if b.rows() != a.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve_matrix",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let lu = Lu::factor(a, tol)?;
    let condition = a.norm_1() * lu.inverse().norm_1();
    if !condition.is_finite() || condition > tol.condition_limit {
        return Err(LinalgError::SingularMatrix { condition });
    }
    let mut out = RealMatrix::zeros(b.rows(), b.cols());
    for j in 0..b.cols() {
        let col = lu.solve(&b.column(j));
        for i in 0..b.rows() {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}
