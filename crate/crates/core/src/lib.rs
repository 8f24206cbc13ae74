pub mod dataset;
pub mod error;
pub mod forest;
pub mod harness;
pub mod market;
pub mod quadrature;
pub mod seed;
pub mod stats;

pub use error::{Error, Result};
