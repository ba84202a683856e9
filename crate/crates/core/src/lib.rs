//! Random matrix models for free products with amalgamation over atomic
//! algebras, an exact moment oracle, and Monte Carlo checks that the models
//! converge to the oracle.

pub mod geometry;
pub mod models;
pub mod ncpoly;
pub mod oracle;
pub mod seed;
pub mod verify;
