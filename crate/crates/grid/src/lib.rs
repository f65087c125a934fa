//! Split-step Fourier solver for the extended Gross-Pitaevskii equation with
//! contact and dipolar interactions and a complex double-well potential.
//!
//! Used as an independent check on the variational model: same units, same
//! potential, no ansatz.

pub mod error;
pub mod fft;
pub mod field;
pub mod lanczos;
pub mod operator;
pub mod quartet;
pub mod solver;

pub use error::{Error, Result};
pub use field::{Grid, GridField};
pub use lanczos::{lanczos_ground, LanczosResult};
pub use operator::{cutoff_kernel, GpeOperator, GridEnergies};
pub use quartet::{ddi_pair_quadrature, QuadratureOptions};
pub use solver::{grid_evolve, grid_ite, GridEvolveOptions, GridIteOptions, GridIteResult, GridObservables};
