use rand::Rng;

use crate::dsp::Waveform;
use crate::error::{Error, Result};

/// Which clean and noise signals make up a mixture, and at what SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSpec {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub seed: u64,
}

/// Gain g such that P_clean / (g² P_noise) = 10^(snr/10).
pub fn noise_gain(clean_power: f64, noise_power: f64, snr_db: f64) -> f64 {
    (clean_power / (noise_power * 10f64.powf(snr_db / 10.0))).sqrt()
}

pub fn snr_db(clean: &Waveform, noise: &Waveform) -> f64 {
    10.0 * (clean.power() / noise.power()).log10()
}

/// Returns `(clean + g·noise, g·noise)`.
pub fn mix_at_snr(clean: &Waveform, noise: &Waveform, snr_db: f64) -> Result<(Waveform, Waveform)> {
    if !snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite, got {snr_db}")));
    }
    if clean.len() != noise.len() {
        return Err(Error::invalid(format!(
            "clean has {} samples but noise has {}; fit the noise first",
            clean.len(),
            noise.len()
        )));
    }
    if clean.sample_rate() != noise.sample_rate() {
        return Err(Error::invalid("clean and noise sample rates differ"));
    }
    let (pc, pn) = (clean.power(), noise.power());
    if pc <= 0.0 {
        return Err(Error::invalid("clean signal is silent"));
    }
    if pn <= 0.0 {
        return Err(Error::invalid("noise signal is silent"));
    }
    let g = noise_gain(pc, pn, snr_db);
    let scaled: Vec<f64> = noise.samples().iter().map(|n| g * n).collect();
    let noisy = clean
        .samples()
        .iter()
        .zip(&scaled)
        .map(|(x, n)| x + n)
        .collect();
    let rate = clean.sample_rate();
    Ok((Waveform::new(noisy, rate)?, Waveform::new(scaled, rate)?))
}

/// Crops (at a random offset) or loops `noise` to exactly `len` samples.
pub fn fit_noise(noise: &Waveform, len: usize, rng: &mut impl Rng) -> Result<Waveform> {
    if noise.is_empty() {
        return Err(Error::invalid("noise signal is empty"));
    }
    let src = noise.samples();
    let offset = if src.len() > len {
        rng.random_range(0..=src.len() - len)
    } else {
        rng.random_range(0..src.len())
    };
    let samples = (0..len).map(|i| src[(offset + i) % src.len()]).collect();
    Waveform::new(samples, noise.sample_rate())
}
