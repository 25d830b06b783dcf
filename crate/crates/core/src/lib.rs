//! Minimal resonator neurons: device models, neuron systems, time-domain
//! simulation, phase-plane analysis and I-V characterization.
// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod device;
pub mod error;
pub mod export;
pub mod integrate;
pub mod ivlab;
pub mod metrics;
pub mod params;
pub mod phase;
pub mod presets;
pub mod protocol;
pub mod roots;
pub mod run;
pub mod systems;
pub mod units;

pub use error::{Error, Result};
