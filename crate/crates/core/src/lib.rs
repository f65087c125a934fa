//! Variational two-Gaussian model of a dipolar condensate in a PT-symmetric
//! double well.

pub mod continuation;
pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod stability;
pub mod stationary;
pub mod tdvp;

pub use error::{Error, Result};
