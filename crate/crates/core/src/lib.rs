//! Pull-based adaptive video streaming over multi-helper wireless networks.
//!
//! Users pick the quality of each requested chunk from their own request
//! queue and a virtual quality queue; helpers pick which users to serve by
//! maximizing the queue-weighted sum rate, either with single-antenna time
//! sharing or with multiuser MIMO zero-forcing beamforming. A playback
//! controller turns chunk delivery times into pre-buffering and
//! re-buffering metrics.

pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod phy;
pub mod playback;
pub mod policy;
pub mod queueing;
pub mod rng;
pub mod scenario;
pub mod video;

pub use config::SimConfig;
pub use engine::{run_simulation, MetricsReport, Simulation, UserMetrics};
pub use error::{Error, Result};
pub use phy::PhyMode;
