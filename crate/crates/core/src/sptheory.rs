//! Singular-perturbation structure of linear partitioned systems
//!
//! ```text
//!   ẋ  = A11 x + A12 z
//! ε ż  = A21 x + A22 z + B v
//! ```
//!
//! The blocks are stored exactly as written above, with ε kept alongside as
//! metadata. The accessors [`PartitionedLinearSystem::a21`],
//! [`PartitionedLinearSystem::a22`] and [`PartitionedLinearSystem::b`] return
//! the physical-time fast blocks (divided by ε), which is what simulation and
//! eigenvalue analysis need.

use num_complex::Complex64;

use crate::densemath::{
    eigenvalues, inverse, solve_matrix, LinalgError, RealMatrix,
};
use crate::senscond::{self, CondError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("epsilon must be a positive finite number, got {0}")]
    InvalidEpsilon(f64),
    #[error("block {block} has shape {found:?}, expected {expected:?}")]
    BlockShape {
        block: &'static str,
        found: (usize, usize),
        expected: (usize, usize),
    },
    #[error(transparent)]
    Conditioning(#[from] Box<CondError>),
}

impl From<CondError> for SpError {
    fn from(e: CondError) -> Self {
        SpError::Conditioning(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedLinearSystem {
    a11: RealMatrix,
    a12: RealMatrix,
    a21: RealMatrix,
    a22: RealMatrix,
    b: RealMatrix,
    epsilon: f64,
}

fn expect_shape(
    block: &'static str,
    m: &RealMatrix,
    expected: (usize, usize),
) -> Result<(), SpError> {
    if m.shape() != expected {
        return Err(SpError::BlockShape {
            block,
            found: m.shape(),
            expected,
        });
    }
    Ok(())
}

impl PartitionedLinearSystem {
    /// Builds a system with ε = 1. `A22` must be nonsingular.
    pub fn new(
        a11: RealMatrix,
        a12: RealMatrix,
        a21: RealMatrix,
        a22: RealMatrix,
        b: RealMatrix,
    ) -> Result<Self, SpError> {
        let n_x = a11.rows();
        let n_z = a22.rows();
        expect_shape("a11", &a11, (n_x, n_x))?;
        expect_shape("a12", &a12, (n_x, n_z))?;
        expect_shape("a21", &a21, (n_z, n_x))?;
        expect_shape("a22", &a22, (n_z, n_z))?;
        expect_shape("b", &b, (n_z, b.cols()))?;
        inverse(&a22)?;
        Ok(Self {
            a11,
            a12,
            a21,
            a22,
            b,
            epsilon: 1.0,
        })
    }

    /// Same blocks, interpreted with the given ε.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self, SpError> {
        check_epsilon(epsilon)?;
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n_x(&self) -> usize {
        self.a11.rows()
    }

    pub fn n_z(&self) -> usize {
        self.a22.rows()
    }

    /// Number of injection channels.
    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn a11(&self) -> &RealMatrix {
        &self.a11
    }

    pub fn a12(&self) -> &RealMatrix {
        &self.a12
    }

    /// `A21 / ε`.
    pub fn a21(&self) -> RealMatrix {
        self.a21.scale(1.0 / self.epsilon)
    }

    /// `A22 / ε`.
    pub fn a22(&self) -> RealMatrix {
        self.a22.scale(1.0 / self.epsilon)
    }

    /// `B / ε`.
    pub fn b(&self) -> RealMatrix {
        self.b.scale(1.0 / self.epsilon)
    }

    /// Fast blocks as stored, i.e. multiplied by ε.
    pub fn raw_fast_blocks(&self) -> (&RealMatrix, &RealMatrix, &RealMatrix) {
        (&self.a21, &self.a22, &self.b)
    }

    /// The v = 0 closed loop `[[A11, A12], [A21/ε, A22/ε]]`.
    pub fn full_matrix(&self) -> RealMatrix {
        RealMatrix::from_blocks(&self.a11, &self.a12, &self.a21(), &self.a22())
            .expect("block shapes checked at construction")
    }

    /// `A11 x + A12 z`.
    pub fn slow_derivative(&self, x: &[f64], z: &[f64]) -> Result<Vec<f64>, SpError> {
        let mut out = self.a11.mul_vec(x)?;
        for (o, t) in out.iter_mut().zip(self.a12.mul_vec(z)?) {
            *o += t;
        }
        Ok(out)
    }

    /// `(A21 x + A22 z + B v) / ε`.
    pub fn fast_derivative(&self, x: &[f64], z: &[f64], v: &[f64]) -> Result<Vec<f64>, SpError> {
        let mut out = self.a21.mul_vec(x)?;
        for (o, t) in out.iter_mut().zip(self.a22.mul_vec(z)?) {
            *o += t;
        }
        for (o, t) in out.iter_mut().zip(self.b.mul_vec(v)?) {
            *o += t;
        }
        out.iter_mut().for_each(|o| *o /= self.epsilon);
        Ok(out)
    }
}

fn check_epsilon(eps: f64) -> Result<(), SpError> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(SpError::InvalidEpsilon(eps));
    }
    Ok(())
}

/// `H = −A22⁻¹A21`, so that `z = H x` is the quasi-steady state. Independent
/// of ε.
pub fn qss_matrix(sys: &PartitionedLinearSystem) -> Result<RealMatrix, SpError> {
    Ok(-&solve_matrix(&sys.a22, &sys.a21)?)
}

/// Slow and fast blocks of the boundary-layer coordinates `y = z − H x`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLayerSystem {
    /// `A11 − A12 A22⁻¹ A21`.
    pub slow_block: RealMatrix,
    /// `A12`.
    pub coupling: RealMatrix,
    /// `ε (A22⁻¹A21 A11 − A22⁻¹A21 A12 A22⁻¹A21)`.
    pub sigma1: RealMatrix,
    /// `ε A22⁻¹A21 A12`.
    pub sigma2: RealMatrix,
    /// `A22` in the ε-multiplied form.
    pub a22: RealMatrix,
}

impl BoundaryLayerSystem {
    /// The change of coordinates `(x, y) = T⁻¹ (x, z)` with
    /// `T = [[I, 0], [−A22⁻¹A21, I]]`.
    pub fn transform(sys: &PartitionedLinearSystem) -> Result<RealMatrix, SpError> {
        let h = qss_matrix(sys)?;
        Ok(RealMatrix::from_blocks(
            &RealMatrix::identity(sys.n_x()),
            &RealMatrix::zeros(sys.n_x(), sys.n_z()),
            &h,
            &RealMatrix::identity(sys.n_z()),
        )?)
    }
}

/// Boundary-layer form at the system's own ε.
pub fn boundary_transform(sys: &PartitionedLinearSystem) -> Result<BoundaryLayerSystem, SpError> {
    boundary_transform_at(sys, sys.epsilon)
}

/// Boundary-layer form with the stored blocks read at `eps`. `eps = 0` is
/// allowed and gives the reduced limit where both Σ blocks vanish.
pub fn boundary_transform_at(
    sys: &PartitionedLinearSystem,
    eps: f64,
) -> Result<BoundaryLayerSystem, SpError> {
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(SpError::InvalidEpsilon(eps));
    }
    let m = solve_matrix(&sys.a22, &sys.a21)?; // A22⁻¹A21
    let m_a12 = &m * &sys.a12;
    let sigma1 = (&(&m * &sys.a11) - &(&m_a12 * &m)).scale(eps);
    let sigma2 = m_a12.scale(eps);
    Ok(BoundaryLayerSystem {
        slow_block: &sys.a11 - &(&sys.a12 * &m),
        coupling: sys.a12.clone(),
        sigma1,
        sigma2,
        a22: sys.a22.clone(),
    })
}

/// `(A11 − A12 A22⁻¹ A21, A22/ε)`: the reduced slow model and the fast
/// boundary-layer matrix in physical time.
pub fn reduced_system(sys: &PartitionedLinearSystem) -> Result<(RealMatrix, RealMatrix), SpError> {
    let m = solve_matrix(&sys.a22, &sys.a21)?;
    Ok((&sys.a11 - &(&sys.a12 * &m), sys.a22()))
}

/// Multiplies ε by `eps`, i.e. divides the physical-time fast blocks by it.
/// The stored blocks are untouched, so the operation is exact and reversible.
pub fn scale_epsilon(
    sys: &PartitionedLinearSystem,
    eps: f64,
) -> Result<PartitionedLinearSystem, SpError> {
    check_epsilon(eps)?;
    let scaled = sys.epsilon * eps;
    check_epsilon(scaled)?;
    sys.clone().with_epsilon(scaled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenReport {
    pub n_x: usize,
    /// Eigenvalues of the v = 0 closed loop.
    pub full_no_sc: Vec<Complex64>,
    /// Eigenvalues with the conditioning term folded into the state matrix.
    pub full_with_sc: Vec<Complex64>,
    /// `σ(A11 − A12A22⁻¹A21) ∪ σ(A22)`.
    pub reduced_union: Vec<Complex64>,
    /// `min |Re λ_fast| / max |Re λ_slow|` over `full_no_sc`.
    pub gap_ratio: f64,
}

impl EigenReport {
    /// Distance between the with- and without-conditioning spectra.
    pub fn displacement(&self) -> f64 {
        spectral_distance(&self.full_with_sc, &self.full_no_sc)
    }
}

/// Eigenvalue report. Conditioning uses the exact closed loop when B has at
/// least as many columns as fast states, and the least-squares closed loop
/// otherwise.
pub fn eigen_report(sys: &PartitionedLinearSystem) -> Result<EigenReport, SpError> {
    let full_no_sc = eigenvalues(&sys.full_matrix())?;
    let with_sc = if sys.m() >= sys.n_z() {
        senscond::closed_loop_exact(sys)?
    } else {
        senscond::closed_loop_asc(sys)?
    };
    let full_with_sc = eigenvalues(&with_sc)?;
    let (slow, fast) = reduced_system(sys)?;
    let mut reduced_union = eigenvalues(&slow)?;
    reduced_union.extend(eigenvalues(&fast)?);
    let gap_ratio = gap_ratio(&full_no_sc, sys.n_x());
    Ok(EigenReport {
        n_x: sys.n_x(),
        full_no_sc,
        full_with_sc,
        reduced_union,
        gap_ratio,
    })
}

/// Sorts by `|Re λ|` (then `|Im λ|`) and splits off the `n_slow` smallest.
pub fn split_slow_fast(values: &[Complex64], n_slow: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut sorted = values.to_vec();
    sort_for_display(&mut sorted);
    let fast = sorted.split_off(n_slow.min(sorted.len()));
    (sorted, fast)
}

/// Timescale-gap proxy: smallest fast decay rate over largest slow one.
pub fn gap_ratio(values: &[Complex64], n_slow: usize) -> f64 {
    let (slow, fast) = split_slow_fast(values, n_slow);
    let max_slow = slow.iter().map(|l| l.re.abs()).fold(0.0, f64::max);
    let min_fast = fast.iter().map(|l| l.re.abs()).fold(f64::INFINITY, f64::min);
    if fast.is_empty() {
        return f64::INFINITY;
    }
    min_fast / max_slow
}

/// Orders by `|Re|`, then `|Im|`, then positive imaginary part first.
pub fn sort_for_display(values: &mut [Complex64]) {
    values.sort_by(|a, b| {
        a.re.abs()
            .total_cmp(&b.re.abs())
            .then(a.im.abs().total_cmp(&b.im.abs()))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Greedy nearest-neighbour pairing: each value of `a`, in order, takes the
/// closest still-unused value of `b`.
pub fn match_spectra(a: &[Complex64], b: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let mut used = vec![false; b.len()];
    let mut pairs = Vec::with_capacity(a.len().min(b.len()));
    for &la in a {
        let best = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .min_by(|(_, x), (_, y)| (**x - la).norm().total_cmp(&(**y - la).norm()));
        if let Some((j, &lb)) = best {
            used[j] = true;
            pairs.push((la, lb));
        }
    }
    pairs
}

/// `sqrt(Σ |λa − λb|²)` over the greedy matching.
pub fn spectral_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    match_spectra(a, b)
        .iter()
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Largest `|λa − λb|` over the greedy matching.
pub fn max_matched_deviation(a: &[Complex64], b: &[Complex64]) -> f64 {
    match_spectra(a, b)
        .iter()
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
