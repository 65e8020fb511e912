//! File formats, reports, parallel protocol runs, and the `gdrkit` command
//! line on top of [`gdrkit_core`].

pub use gdrkit_core as core;

pub mod cli;
pub mod config;
pub mod io;
pub mod manifest;
pub mod modelfile;
pub mod report;
pub mod runner;
pub mod synth;
