//! Epsilon-smoothed coherence quantifiers for finite-dimensional quantum states.

pub mod channel;
pub mod coverage;
mod ellipsoid;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod measures;
pub mod metrics;
pub mod oneshot;
pub mod oracle;
pub mod simplex;
pub mod smoothing;
pub mod state;

pub use error::{Error, Result};
