//! Transmit-beamspace MIMO radar ambiguity functions.

pub mod ambiguity;
pub mod clear_region;
pub mod config;
pub mod error;
pub mod geometry;
pub mod output;
pub mod pipeline;
pub mod sim_oracle;
pub mod tb_core;
pub mod tb_design;
pub mod waveforms;

pub use error::{Error, Result};
