//! Langevin particle approximations of Nash and mean field game equilibria.

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod measures;
pub mod meanfield;
pub mod rng;

pub use error::{Error, Result};
