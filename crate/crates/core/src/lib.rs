//! Trace-driven simulation of a UAV uplink to a fixed base station.
//!
//! The pipeline runs mobility → channel → beam tracking → link adaptation
//! and HARQ → PDCP-level metrics, for a 28 GHz mmWave profile and a 2.1 GHz
//! LTE-class baseline. Every run is a single-threaded, seeded event loop;
//! batches of runs fan out over a worker pool in [`cli::matrix`].

pub mod beamforming;
pub mod channel;
pub mod cli;
pub mod error;
pub mod geo_mobility;
pub mod phy_mac;
pub mod stack_sim;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
