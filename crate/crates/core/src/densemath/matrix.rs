use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use super::LinalgError;

/// Dense real matrix stored row-major.
///
/// Sized for the small systems handled here (a handful of states per
/// timescale); no blocking, no SIMD.
#[derive(Clone, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    /// Builds a matrix from row-major entries, rejecting a wrong entry count
    /// or non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch {
                op: "RealMatrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LinalgError::NonFinite { op: "RealMatrix::new" });
        }
        Ok(Self { rows, cols, data })
    }

    /// Row-major constructor that panics on a bad entry count. Intended for
    /// literals in code and tests.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), rows * cols, "expected {rows}x{cols} entries");
        Self {
            rows,
            cols,
            data: data.to_vec(),
        }
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), ncols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Column vector (n×1).
    pub fn column_vector(values: &[f64]) -> Self {
        Self::from_row_slice(values.len(), 1, values)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Checked product `self * rhs`.
    pub fn matmul(&self, rhs: &RealMatrix) -> Result<RealMatrix, LinalgError> {
        if self.cols != rhs.rows {
            return Err(LinalgError::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    /// Checked matrix-vector product.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if self.cols != v.len() {
            return Err(LinalgError::DimensionMismatch {
                op: "mul_vec",
                left: self.shape(),
                right: (v.len(), 1),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn zip_with(
        &self,
        rhs: &RealMatrix,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<RealMatrix, LinalgError> {
        if self.shape() != rhs.shape() {
            return Err(LinalgError::DimensionMismatch {
                op,
                left: self.shape(),
                right: rhs.shape(),
            });
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn checked_add(&self, rhs: &RealMatrix) -> Result<RealMatrix, LinalgError> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn checked_sub(&self, rhs: &RealMatrix) -> Result<RealMatrix, LinalgError> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    /// Copies out the `nrows × ncols` block whose top-left corner is `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, nrows: usize, ncols: usize) -> RealMatrix {
        assert!(r0 + nrows <= self.rows && c0 + ncols <= self.cols);
        let mut out = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                out[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        out
    }

    /// Assembles `[[top_left, top_right], [bottom_left, bottom_right]]`.
    pub fn from_blocks(
        top_left: &RealMatrix,
        top_right: &RealMatrix,
        bottom_left: &RealMatrix,
        bottom_right: &RealMatrix,
    ) -> Result<RealMatrix, LinalgError> {
        let consistent = top_left.rows == top_right.rows
            && bottom_left.rows == bottom_right.rows
            && top_left.cols == bottom_left.cols
            && top_right.cols == bottom_right.cols;
        if !consistent {
            return Err(LinalgError::DimensionMismatch {
                op: "from_blocks",
                left: top_left.shape(),
                right: bottom_right.shape(),
            });
        }
        let rows = top_left.rows + bottom_left.rows;
        let cols = top_left.cols + top_right.cols;
        let mut out = Self::zeros(rows, cols);
        for (block, r0, c0) in [
            (top_left, 0, 0),
            (top_right, 0, top_left.cols),
            (bottom_left, top_left.rows, 0),
            (bottom_right, top_left.rows, top_left.cols),
        ] {
            for i in 0..block.rows {
                for j in 0..block.cols {
                    out[(r0 + i, c0 + j)] = block[(i, j)];
                }
            }
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

// Operator forms panic on shape mismatch, like the nalgebra operators.
impl Mul for &RealMatrix {
    type Output = RealMatrix;

    fn mul(self, rhs: &RealMatrix) -> RealMatrix {
        self.matmul(rhs).expect("matrix product shape mismatch")
    }
}

impl Add for &RealMatrix {
    type Output = RealMatrix;

    fn add(self, rhs: &RealMatrix) -> RealMatrix {
        self.checked_add(rhs).expect("matrix sum shape mismatch")
    }
}

impl Sub for &RealMatrix {
    type Output = RealMatrix;

    fn sub(self, rhs: &RealMatrix) -> RealMatrix {
        self.checked_sub(rhs).expect("matrix difference shape mismatch")
    }
}

impl Neg for &RealMatrix {
    type Output = RealMatrix;

    fn neg(self) -> RealMatrix {
        self.scale(-1.0)
    }
}

impl fmt::Debug for RealMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "RealMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Euclidean norm of a vector.
pub fn vec_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_bad_shapes_and_nan() {
        assert!(RealMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(RealMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(RealMatrix::new(1, 2, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn blocks_round_trip() {
        let a = RealMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let b = RealMatrix::from_rows(&[[5.0], [6.0]]);
        let c = RealMatrix::from_rows(&[[7.0, 8.0]]);
        let d = RealMatrix::from_rows(&[[9.0]]);
        let m = RealMatrix::from_blocks(&a, &b, &c, &d).unwrap();
        assert_eq!(m.shape(), (3, 3));
        assert_eq!(m.block(0, 0, 2, 2), a);
        assert_eq!(m.block(0, 2, 2, 1), b);
        assert_eq!(m.block(2, 0, 1, 2), c);
        assert_eq!(m.block(2, 2, 1, 1), d);
        assert!(RealMatrix::from_blocks(&a, &d, &c, &d).is_err());
    }

    #[test]
    fn products_and_norms() {
        let a = RealMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let p = &a * &RealMatrix::identity(2);
        assert_eq!(p, a);
        assert_eq!(a.mul_vec(&[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
        assert_eq!(a.trace(), 5.0);
        assert_eq!(a.norm_1(), 6.0);
        assert!(a.matmul(&RealMatrix::zeros(3, 1)).is_err());
        assert_eq!(a.transpose()[(0, 1)], 3.0);
    }
}
