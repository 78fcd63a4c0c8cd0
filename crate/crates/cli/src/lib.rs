//! Command-line pipeline and review API for the standards crosswalk.

pub mod adjudication;
pub mod config;
pub mod pipeline;
pub mod server;
