//! Discrete orthogonal polynomial ensembles with an impenetrable wall.
//!
//! Kernels, exact determinantal sampling, constrained equilibrium measures,
//! limit kernels with their Fredholm determinants, and the half-hexagon
//! tiling model whose vertical-line marginals are such ensembles.

pub mod dpp;
pub mod asymptotics;
pub mod ensembles;
pub mod equilibrium;
pub mod error;
pub mod halfhex;
pub mod io;
pub mod orthopoly;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
