//! File formats, configuration, a thread-pool executor and the command line
//! for `edgeflip-core`.

pub use edgeflip_core as core;

pub mod cli;
pub mod config;
pub mod exec;
pub mod formats;
pub mod pipeline;
