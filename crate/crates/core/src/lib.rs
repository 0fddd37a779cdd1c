//! Replicator dynamics simulation and sparse identification (SINDy) of the
//! governing equations from trajectory data.

pub mod error;
pub mod evaluation;
pub mod experiment;
pub mod game;
pub mod io;
pub mod plot;
pub mod sindy;
pub mod trajectory;

pub use error::{Error, Result};
