//! Designed quadrature and quasi-Monte Carlo rules for simulated maximum
//! likelihood in mixed multinomial logit models.

pub mod cli;
pub mod dqgen;
pub mod error;
pub mod mmnl;
pub mod multiindex;
pub mod orthopoly;
pub mod qmc;
pub mod simstudy;

pub use error::{Error, Result};
