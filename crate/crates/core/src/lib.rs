//! Back-off rates for idealized CSMA networks from region-based free-energy
//! approximations, with a brute-force oracle and an event-driven simulator
//! for validation.

pub mod chordal_exact;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod free_energy;
pub mod graph;
pub mod oracle;
pub mod report;
pub mod simulator;

pub use error::{Error, Result};
pub use free_energy::{BackoffVector, Method, Region, RegionKind, RegionSet, ThroughputVector};
pub use graph::{Clique, CliqueTree, ConflictGraph};
