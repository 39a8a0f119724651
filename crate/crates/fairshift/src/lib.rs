//! File formats, parallel execution and the command line for
//! [`fairshift_core`].

pub mod cli;
pub mod io;
pub mod manifest;
pub mod parallel;
pub mod report;
pub mod synth_presets;

pub use fairshift_core as core;
