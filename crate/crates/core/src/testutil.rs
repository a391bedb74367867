//! Helpers shared by the unit tests.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densemath::RealMatrix;
use crate::sptheory::PartitionedLinearSystem;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> RealMatrix {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    RealMatrix::new(rows, cols, data).unwrap()
}

/// Random system whose `A22` is shifted to keep it comfortably invertible
/// and stable-ish, and whose `B` has full rank with overwhelming probability.
pub fn random_system(rng: &mut ChaCha8Rng, n_x: usize, n_z: usize, m: usize) -> PartitionedLinearSystem {
    loop {
        let a22 = &random_matrix(rng, n_z, n_z) - &RealMatrix::identity(n_z).scale(3.0);
        let sys = PartitionedLinearSystem::new(
            random_matrix(rng, n_x, n_x),
            random_matrix(rng, n_x, n_z),
            random_matrix(rng, n_z, n_x),
            a22,
            random_matrix(rng, n_z, m),
        );
        if let Ok(sys) = sys {
            return sys;
        }
    }
}

pub fn to_na(a: &RealMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn from_na(a: &nalgebra::DMatrix<f64>) -> RealMatrix {
    let mut out = RealMatrix::zeros(a.nrows(), a.ncols());
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[(i, j)] = a[(i, j)];
        }
    }
    out
}

/// nalgebra's inverse, as an oracle independent of this crate's solver.
pub fn na_inverse(a: &RealMatrix) -> RealMatrix {
    from_na(&to_na(a).try_inverse().expect("oracle inverse"))
}

pub fn na_eigenvalues(a: &RealMatrix) -> Vec<Complex64> {
    to_na(a).complex_eigenvalues().iter().copied().collect()
}

pub fn approx_eq(a: &RealMatrix, b: &RealMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).max_abs() <= tol
}

/// Multiset equality up to a relative tolerance, by greedy matching.
pub fn same_spectrum(a: &[Complex64], b: &[Complex64], rel: f64) -> bool {
    a.len() == b.len()
        && crate::sptheory::match_spectra(a, b)
            .iter()
            .all(|(x, y)| (x - y).norm() <= rel * x.norm().max(1.0))
}
