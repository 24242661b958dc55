//! Causal tensors: stochastic tensors of causal channels estimated from
//! symbolic time series, their algebra, and a structure-inference pipeline
//! built on transfer entropy and channel capacity.

pub mod alphabet;
pub mod capacity;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod inference;
pub mod info;
pub mod io;
pub mod rng;
pub mod sweep;
pub mod tensor;

pub use error::{Error, Result};
