//! Fixtures shared by the benchmarks.

use lyaplab::symbolic::{Law, Subshift, SymbolicPoint};
use lyaplab::MatrixCocycle;

pub fn full_shift() -> Subshift {
    Subshift::full(2, 0.5).expect("full shift")
}

/// Seeded random cocycle with entries in [-1, 1].
pub fn random_cocycle(dim: usize, window: usize, seed: u64) -> MatrixCocycle {
    MatrixCocycle::random_locally_constant(2, window, dim, -1.0, 1.0, seed).expect("cocycle")
}

pub fn fair_point(seed: u64) -> SymbolicPoint {
    SymbolicPoint::seeded(seed, Law::fair_coin())
}
