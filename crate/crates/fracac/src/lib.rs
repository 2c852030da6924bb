//! Branching-process duality for the fractional Allen–Cahn equation:
//! stable and subordinated motions, ternary branching trees with (marked)
//! majority voting, Monte Carlo estimators, a spectral PDE oracle, and
//! shrinking-sphere geometry.

pub mod error;
pub mod estimator;
pub mod geometry;
pub mod levy;
pub mod oracle;
pub mod params;
pub mod point;
pub mod rng;
pub mod stats;
pub mod tree;
pub mod voting;

pub use error::{Error, Result};
pub use params::{ModelParams, ScalingPreset};
pub use point::Point;
pub use rng::StreamKey;
