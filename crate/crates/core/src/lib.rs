//! Dressed-state qubit simulation: operators, noise processes, single- and
//! two-ion models, and a time-dependent propagator.

pub mod error;
pub mod noise;
pub mod ops;
pub mod propagator;
pub mod regimes;
pub mod single;
pub mod two;
pub mod units;

pub use error::{Error, Result};
