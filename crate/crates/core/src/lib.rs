//! Discrete-event simulator for geographic routing in mobile ad hoc
//! networks: greedy forwarding with next-hop verification and backtracking,
//! plus pure-greedy and GPSR-style baselines.

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod goldens;
pub mod mobility;
pub mod packet;
pub mod presets;
pub mod protocol;
pub mod rng;
pub mod scenario;
pub mod traffic;

pub use error::{Error, Result};
