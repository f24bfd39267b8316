//! Simulator for orthogonal space-time-frequency block coding in distributed
//! MIMO networks.
//!
//! The crate clusters radio-unit antennas and users from long-term channel
//! statistics, evaluates per-user ergodic spectral efficiency in closed form,
//! estimates outage spectral efficiency by Monte-Carlo, and compares against
//! small-cell, single-frequency-network and MRT baselines.

pub mod baselines;
pub mod channel;
pub mod clustering;
pub mod codes;
pub mod config;
pub mod error;
pub mod harness;
pub mod montecarlo;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
