//! Numerical kernels for a cell-free integrated sensing and communication
//! network whose access points carry movable-antenna arrays and nonlinear
//! power amplifiers.

pub mod comm;
pub mod config;
pub mod error;
pub mod fp;
pub mod geometry;
pub mod metrics;
pub mod numerics;
pub mod oracle;
pub mod pa;
pub mod robust;
pub mod sensing;

pub use error::{Error, Result};
