//! Vehicle position tracking by extended Kalman filter fusion of onboard IMU
//! readings with cellular range and angle-of-arrival observations.
//!
//! The crate is `no_std` (it needs `alloc`) and holds only the numerical and
//! simulation logic:
//!
//! * [`scenario`]: highway geometry, base-station deployment, ground truth and
//!   the V2X requirement profiles.
//! * [`measurements`]: seeded noisy IMU and per-BS range/azimuth generation.
//! * [`ekf`]: the constant-acceleration extended Kalman filter.
//! * [`stats`]: empirical error distributions and percentiles.
//! * [`runner`]: epoch loop, fusion modes, sweeps and requirement checks.
//! * [`fogsim`]: discrete-event model of legacy vs fog positioning paths and
//!   location-context handover.
//!
//! File formats, CSV export, parallel sweeps and the command line live in the
//! companion `fusion-track` crate.
#![no_std]

extern crate alloc;

pub mod angle;
pub mod ekf;
pub mod error;
pub mod fogsim;
pub mod measurements;
pub mod runner;
pub mod scenario;
pub mod stats;

pub use error::{ConfigError, Error, NumericError, Result};

/// 2D point or vector in the road frame, meters (or m/s, m/s²).
pub type Vec2 = nalgebra::Vector2<f64>;

/// Seeded random stream used for every stochastic draw in the crate.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds the random stream for a run seed.
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}
