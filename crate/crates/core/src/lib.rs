//! Joint trajectory and bit-allocation planning for a UAV-LEO edge computing mission.

pub mod baselines;
pub mod convex;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod init;
pub mod mission;
pub mod plan;
pub mod sca;
pub mod scenario;
pub mod surrogate;

pub use error::{Error, Result};
