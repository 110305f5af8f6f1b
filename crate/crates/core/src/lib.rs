pub mod affine1d;
pub mod affinend;
pub mod diff;
pub mod error;
pub mod matrix;
pub mod measures;
pub mod par;
pub mod propagator;
pub mod runner;
pub mod special;

pub use error::{Error, Result};
