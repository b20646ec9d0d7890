//! Change point detection in quasi-periodic signals.
pub mod bootstrap;
pub mod config;
pub mod detector;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod report;
pub mod signal;
pub mod transport;

pub use error::{Error, Result};
