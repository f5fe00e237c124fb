//! Files and command-line stages around `trust-siot-core`.

pub mod artifact;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod stages;
