//! Semi-invertible matrix cocycles over shift spaces.

pub mod cocycle;
mod error;
pub mod exterior;
pub mod harness;
pub mod linalg;
pub mod lyapunov_norm;
pub mod spectrum;
pub mod symbolic;

pub use error::{LabError, Result};

pub use cocycle::{MatrixCocycle, ScaledProduct};
pub use harness::{ExperimentConfig, ExperimentKind, ExperimentReport};
pub use linalg::{Mat, Vector};
pub use lyapunov_norm::{LyapNormParams, LyapunovNorm, OseledetsSplittingAtPeriodic};
pub use spectrum::{LyapunovSpectrum, SpectrumEstimate};
pub use symbolic::{ClosingCertificate, Law, PeriodicOrbit, Subshift, SymbolicPoint};
