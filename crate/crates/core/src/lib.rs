//! Physics-guided neural network feedforward: identification, training,
//! ISS certification and closed-loop simulation.
pub mod data;
pub mod error;
pub mod extrap;
pub mod linalg;
pub mod model;
pub mod recipes;
pub mod sim;
pub mod stability;
pub mod train;

pub use error::{Error, Result};
