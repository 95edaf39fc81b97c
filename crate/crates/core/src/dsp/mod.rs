//! Signal types and the STFT analysis/synthesis pair.

mod fft;
mod stft;

pub use fft::{fft, ifft, Radix2Fft};
pub use stft::{hamming_window, istft, magnitude, stft, stft_with, StftConfig};

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Mono time-domain audio.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Mean power, Σx²/T.
    pub fn power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s * s).sum::<f64>() / self.samples.len() as f64
    }
}

/// One-sided complex STFT, frames × bins.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    data: Array2<Complex64>,
    config: StftConfig,
    signal_len: usize,
}

impl ComplexSpectrogram {
    pub fn new(data: Array2<Complex64>, config: StftConfig, signal_len: usize) -> Result<Self> {
        if data.ncols() != config.bins() {
            return Err(Error::invalid(format!(
                "spectrogram has {} bins, frame length {} implies {}",
                data.ncols(),
                config.frame_len(),
                config.bins()
            )));
        }
        if data.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::invalid("spectrogram contains non-finite values"));
        }
        Ok(Self {
            data,
            config,
            signal_len,
        })
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn config(&self) -> StftConfig {
        self.config
    }

    /// Length of the time signal this spectrogram was computed from.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub(crate) fn with_data(&self, data: Array2<Complex64>) -> Self {
        Self {
            data,
            config: self.config,
            signal_len: self.signal_len,
        }
    }
}

/// Nonnegative magnitude grid, frames × bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnitudeSpectrogram {
    data: Array2<f64>,
}

impl MagnitudeSpectrogram {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("magnitudes must be finite and nonnegative"));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn frames(&self) -> usize {
        self.data.nrows()
    }

    pub fn bins(&self) -> usize {
        self.data.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}
