//! Cold-start recommendation fused with a temporal social-media background.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece of
//! the pipeline:
//!
//! - [`corpus`]: messages, purchases, item catalog, embedding tables and the
//!   data-preparation filters.
//! - [`trend`]: hourly word frequencies, emergence detection and the hourly /
//!   per-segment social embeddings.
//! - [`autodiff`]: a small reverse-mode tape over dense `f64` tensors, Adam and
//!   a finite-difference gradient checker.
//! - [`model`]: the GMF + MLP network with optional social fusion (segment
//!   average or item-conditioned attention).
//! - [`train`]: time-aware instances, negative sampling and the training loop.
//! - [`eval`]: candidate tasks, HR@K / NDCG@K, baselines and lagged correlation.
//! - [`synth`]: a seeded generator for corpora with a planted lagged signal.
//!
//! File formats, configuration and the command line live in the `trendrec`
//! companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod corpus;
mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod train;
pub mod trend;

pub use error::{Error, Result};
