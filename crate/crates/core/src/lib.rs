//! Simulation of QKD-based quantum private query protocols, the attacks
//! against them, and a seeded Monte Carlo harness.

pub mod chang;
pub mod discrimination;
pub mod harness;
pub mod postprocess;
pub mod quantum;
pub mod rng;
pub mod stats;
pub mod yu;
