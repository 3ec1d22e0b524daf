pub mod agent;
pub mod baselines;
pub mod error;
pub mod fpc;
pub mod harness;
pub mod lifecycle;
pub mod mechanism;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};
