//! Simulation and identification of systems `x_{t+1} = θ* φ(x_t, u_t) + w_t`.

pub mod bmsb;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod lse;
pub mod model;
pub mod sme;
pub mod stochastics;

pub use error::{CoreError, Result};
