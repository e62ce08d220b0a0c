//! Simulation and verification laboratory for martingale approximation of
//! stationary adapted processes.

pub mod approx;
pub mod conditions;
pub mod error;
pub mod experiment;
pub mod inequalities;
pub mod limit;
pub mod mc;
pub mod models;
pub mod projective;
pub mod quenched;
pub mod report;
pub mod rng;
pub mod special;

pub use error::{MartlabError, Result};
