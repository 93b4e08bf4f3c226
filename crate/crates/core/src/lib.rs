//! Collective superradiant dynamics of multilevel atoms: mean-field dark
//! states, Holstein–Primakoff squeezing, cumulant and exact symmetric-subspace
//! evolution, and protocols that store squeezing in dark states.

pub mod atomic_model;
pub mod cumulant;
pub mod error;
pub mod exact_ed;
pub mod harness;
pub mod hp_gaussian;
pub mod linalg;
pub mod meanfield;
pub mod ode;
pub mod protocols;
pub mod witness;

pub use error::{Error, Result};
