//! Command-line front end for `wkm-core`: configuration files, CSV/JSON
//! input and output, a rayon fan-out and a bootstrap table cache.

pub mod cache;
pub mod cli;
pub mod config;
pub mod io;
pub mod parallel;

pub use parallel::RayonFanout;
