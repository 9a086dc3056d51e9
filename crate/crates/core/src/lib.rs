pub mod calculus;
pub mod error;
pub mod fields;
mod spectral;

pub use error::{Error, Result};
pub mod functionals;
pub mod brackets;
pub mod constraints;
pub mod krylov;
pub mod reduction;
pub mod systems;
pub mod harness;
