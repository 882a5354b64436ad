//! Numerics for sampling-based min-entropy certification of high-dimensional
//! quantum sources: the classical sampling strategy and its tail bound, the
//! derived min-entropy bound constants, closed-form key-length formulas with
//! their comparison sweep, a desk-scale qudit statevector simulator that
//! exercises the bound empirically, and a Toeplitz two-universal extractor
//! for privacy amplification.
//!
//! Monte Carlo loops and sweeps run data-parallel on rayon when the default
//! `parallel` feature is enabled and fall back to sequential iteration
//! without it; either way results are bit-identical for a fixed seed.

pub mod entmath;
pub mod error;
pub mod exec;
pub mod extractor;
pub mod qsim;
pub mod rates;
pub mod sampling;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
