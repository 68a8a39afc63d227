//! File formats, run configuration and pipeline stages on top of
//! `trendrec-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod formats;
pub mod pipeline;

pub use error::{Error, Result};
