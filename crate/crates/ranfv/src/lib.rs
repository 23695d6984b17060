//! File formats, the Monte Carlo harness and the worked example on top of
//! `ranfv-core`.

pub mod config;
pub mod demo;
pub mod harness;
pub mod io;
