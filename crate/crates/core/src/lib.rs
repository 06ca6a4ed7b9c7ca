//! Penalized free-boundary optimization of clamped-plate buckling loads.
//!
//! The crate discretizes a container by a uniform Cartesian grid, computes the
//! buckling load (or fundamental tone) of discrete domains through a
//! finite-difference generalized eigenproblem, minimizes the volume-penalized
//! functionals over supports, and measures the structural properties optimal
//! domains are known to satisfy.
//!
//! All numerical code is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix `f64`, which is what the optimizer and I/O layers are tuned for.

pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod optimizer;
pub mod scalar;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid64 = grid::Grid<f64>;
pub type Field64 = grid::Field<f64>;
pub type Support64 = grid::Support<f64>;
pub type Shape64 = grid::Shape<f64>;
pub type EigenResult64 = spectral::EigenResult<f64>;
pub type Thresholds64 = theory::Thresholds<f64>;
pub type PenaltyParams64 = theory::PenaltyParams<f64>;
pub type OptimizeConfig64 = optimizer::OptimizeConfig<f64>;
pub type OptimizeResult64 = optimizer::OptimizeResult<f64>;
pub type Certificate64 = optimizer::Certificate<f64>;
pub type DiagnosticsReport64 = diagnostics::DiagnosticsReport<f64>;

pub type Grid32 = grid::Grid<f32>;
pub type Field32 = grid::Field<f32>;
pub type Support32 = grid::Support<f32>;
