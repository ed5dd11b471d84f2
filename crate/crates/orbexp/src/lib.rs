//! One-range expansions of exponentially decaying functions.

pub mod accel;
pub mod addition;
pub mod basis;
pub mod error;
pub mod expansions;
pub mod oracle;
pub mod report;
pub mod special;
pub mod stgo;
pub mod transforms;

pub use error::{Error, Result};

/// Library version recorded in report sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
