//! Speech enhancement by time-frequency mask fusion.
//!
//! The crate is organised bottom-up:
//!
//! - [`dsp`]: radix-2 FFT, periodic Hamming window, STFT analysis and
//!   weighted-overlap-add synthesis at 512/256.
//! - [`masks`]: oracle ideal ratio mask and target binary mask, the
//!   threshold/scale fusion rule, and mask application.
//! - [`objectives`]: summed MSE and clamped BCE losses with analytic gradients.
//! - [`estimator`]: a two-head mask estimation network trained with Adam and
//!   dev-set model selection.
//! - [`evalkit`]: synthetic corpus, SNR mixing, objective metrics and the
//!   threshold/scale sweep harness.

pub mod dsp;
pub mod error;
pub mod estimator;
pub mod evalkit;
pub mod masks;
pub mod objectives;

pub use error::{Error, Result};

/// Sample rate accepted by every pipeline entry point.
pub const SAMPLE_RATE: u32 = 16_000;
