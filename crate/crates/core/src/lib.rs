//! Citation matching toolkit.
//!
//! Links extracted reference strings, together with their labeled segments
//! and segmenter probabilities, to records of a bibliographic database. The
//! pipeline runs in three stages:
//!
//! 1. [`blocking`] retrieves a small candidate set per reference from an
//!    embedded [`index`], using queries built from segments, from the raw
//!    string, or both.
//! 2. [`features`] compares each (reference, record) pair and produces a
//!    fixed-schema feature vector.
//! 3. [`classify`] decides match / non-match per pair; [`eval`] measures the
//!    whole pipeline against a gold standard.

pub mod blocking;
pub mod classify;
pub mod config;
pub mod convert;
pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod strsim;
pub mod synth;
pub mod textnorm;

pub use error::{Error, Result};
