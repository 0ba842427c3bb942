//! Simulation of a branching population whose cells split an accumulated
//! quantity at division, and nonparametric estimation of the splitting law
//! from observed division fractions.

pub mod analytics;
pub mod config;
pub mod error;
pub mod estimate;
pub mod experiments;
pub mod export;
pub mod grid;
pub mod kernel;
pub mod mle;
pub mod model;
pub mod rng;
pub mod select;
pub mod sim;
pub mod special;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
