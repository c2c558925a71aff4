//! Material-point model of a multi-species biofilm: volume fractions and
//! living fractions of `n` species evolve under nutrient-driven growth and
//! antibiotic-driven death, subject to a volume constraint.

pub mod error;
pub mod io;
pub mod model;
pub mod scenarios;
pub mod solver;
pub mod verification;

pub use error::{ModelError, SolverError};
