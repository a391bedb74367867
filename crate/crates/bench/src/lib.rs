//! Shared fixtures for the benchmarks.

use tscale::plants::{buck_closedloop, BuckParams};
use tscale::{PartitionedLinearSystem, RealMatrix};

/// The reference buck loop.
pub fn buck_system() -> PartitionedLinearSystem {
    buck_closedloop(&BuckParams::reference()).expect("reference parameters are valid").system
}

/// Deterministic, well-conditioned dense test matrix.
pub fn test_matrix(n: usize) -> RealMatrix {
    let mut m = RealMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = ((i * 7 + j * 13) % 11) as f64 / 11.0 - 0.5;
            m[(i, j)] = if i == j { v - n as f64 } else { v };
        }
    }
    m
}
