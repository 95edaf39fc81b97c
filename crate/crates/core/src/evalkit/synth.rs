//! Deterministic synthetic speech-in-noise corpus.
//!
//! Clean "speech" is a train of voiced segments: harmonic complexes whose f0
//! glides between 80 and 300 Hz, shaped by three moving formant resonances and a
//! syllable-rate amplitude modulation, separated by silent gaps. Noise is
//! white, pink (1/f power via STFT filtering) or a babble-like sum of tonal
//! bursts.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mix::{fit_noise, mix_at_snr};
use crate::dsp::{istft, stft, Waveform};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

const FS: f64 = SAMPLE_RATE as f64;
/// RMS every clean utterance is normalised to.
const CLEAN_RMS: f64 = 0.05;
const MIN_F0: f64 = 80.0;
const MAX_F0: f64 = 300.0;
const MAX_HARMONIC_HZ: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    White,
    Pink,
    Babble,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Pink, NoiseKind::Babble];

    pub fn id(&self) -> &'static str {
        match self {
            NoiseKind::White => "white",
            NoiseKind::Pink => "pink",
            NoiseKind::Babble => "babble",
        }
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown noise kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn id(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }

    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Test];

    fn tag(&self) -> u64 {
        match self {
            Split::Train => 1,
            Split::Dev => 2,
            Split::Test => 3,
        }
    }
}

/// A clean utterance mixed with scaled noise at a target SNR.
impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    /// Utterance id, shared by every mixture of the same clean signal.
    pub id: String,
    pub split: Split,
    pub clean: Waveform,
    /// Noise after scaling, so that `noisy = clean + noise`.
    pub noise: Waveform,
    pub noisy: Waveform,
    pub noise_kind: NoiseKind,
    pub snr_db: f64,
    pub clean_seed: u64,
    pub noise_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub duration_s: f64,
    pub snrs_db: Vec<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_train: 60,
            n_dev: 10,
            n_test: 10,
            duration_s: 2.0,
            snrs_db: vec![-5.0, 0.0, 5.0, 10.0],
        }
    }
}

/// Train and dev utterances get one mixture each (SNRs cycled); every test
/// utterance is mixed at every SNR.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub train: Vec<Mixture>,
    pub dev: Vec<Mixture>,
    pub test: Vec<Mixture>,
}

impl Corpus {
    pub fn split(&self, split: Split) -> &[Mixture] {
        match split {
            Split::Train => &self.train,
            Split::Dev => &self.dev,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &Mixture> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn derive_seed(seed: u64, split: Split, index: usize, stream: u64) -> u64 {
    splitmix(splitmix(splitmix(seed ^ (split.tag() << 56)) ^ index as u64) ^ stream)
}

fn formant_gain(freq: f64, formants: &[(f64, f64, f64); 3]) -> f64 {
    let tilt = 1.0 / (1.0 + freq / 800.0);
    let peaks: f64 = formants
        .iter()
        .map(|&(centre, bw, gain)| gain / (1.0 + ((freq - centre) / bw).powi(2)))
        .sum();
    tilt * (0.05 + peaks)
}

fn random_formants(rng: &mut impl Rng) -> [(f64, f64, f64); 3] {
    [
        (rng.random_range(300.0..850.0), 90.0, 1.0),
        (rng.random_range(900.0..2300.0), 130.0, 0.7),
        (rng.random_range(2400.0..3300.0), 200.0, 0.4),
    ]
}

/// Harmonic "speech" with silent gaps, normalised to a fixed RMS.
pub fn synth_speech(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    let speaker_f0: f64 = rng.random_range(100.0..220.0);
    // short utterances still get at least one voiced segment
    let mut t = ((rng.random_range(0.05..0.2) * FS) as usize).min(len / 8);
    let min_voiced = ((0.1 * FS) as usize).min(len / 2);
    while t + min_voiced < len {
        let seg_len = ((rng.random_range(0.15..0.4) * FS) as usize).min(len - t);
        let f0_start = (speaker_f0 * rng.random_range(0.8..1.25)).clamp(MIN_F0, MAX_F0);
        let f0_end = (speaker_f0 * rng.random_range(0.8..1.25)).clamp(MIN_F0, MAX_F0);
        let vibrato_hz = rng.random_range(3.0..6.0);
        let from = random_formants(rng);
        let to = random_formants(rng);
        let am_hz = rng.random_range(3.0..6.0);
        let ramp = (0.02 * FS) as usize;
        let harmonics = (MAX_HARMONIC_HZ / MIN_F0) as usize;
        let mut phases: Vec<f64> = (0..harmonics)
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();

        for i in 0..seg_len {
            let frac = i as f64 / seg_len as f64;
            let time = i as f64 / FS;
            let f0 = ((f0_start + (f0_end - f0_start) * frac)
                * (1.0 + 0.03 * (2.0 * PI * vibrato_hz * time).sin()))
            .clamp(MIN_F0, MAX_F0);
            let formants = [0, 1, 2].map(|k| {
                let (a, b) = (from[k], to[k]);
                (a.0 + (b.0 - a.0) * frac, a.1, a.2)
            });
            let edge = (i.min(seg_len - 1 - i) as f64 / ramp as f64).min(1.0);
            let envelope =
                0.5 * (1.0 - (PI * edge).cos()) * (0.7 + 0.3 * (2.0 * PI * am_hz * time).sin());
            let mut sample = 0.0;
            for (k, phase) in phases.iter_mut().enumerate() {
                let freq = f0 * (k + 1) as f64;
                if freq >= MAX_HARMONIC_HZ {
                    break;
                }
                *phase += 2.0 * PI * freq / FS;
                sample += formant_gain(freq, &formants) * phase.sin();
            }
            out[t + i] = envelope * sample;
        }
        t += seg_len + (rng.random_range(0.06..0.25) * FS) as usize;
    }
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= CLEAN_RMS / rms);
    }
    out
}

fn white(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

fn pink(len: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    let base = Waveform::new(white(len, rng), SAMPLE_RATE)?;
    let spec = stft(&base)?;
    let mut data = spec.data().clone();
    for (k, mut col) in data.columns_mut().into_iter().enumerate() {
        let gain = 1.0 / (k.max(1) as f64).sqrt();
        col.iter_mut().for_each(|c| *c *= gain);
    }
    let filtered = crate::dsp::ComplexSpectrogram::new(data, spec.config(), spec.signal_len())?;
    Ok(istft(&filtered)?.into_samples())
}

fn babble(len: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for _ in 0..6 {
        let mut t = (rng.random_range(0.0..0.2) * FS) as usize;
        while t < len {
            let burst = ((rng.random_range(0.08..0.3) * FS) as usize).min(len - t);
            let f0 = rng.random_range(100.0..250.0);
            let amp = rng.random_range(0.5..1.0);
            let glide = rng.random_range(-0.2..0.2);
            for i in 0..burst {
                let time = i as f64 / FS;
                let env = (PI * i as f64 / burst as f64).sin().powi(2);
                let f = f0 * (1.0 + glide * i as f64 / burst as f64);
                let s: f64 = (1..=8)
                    .map(|h| (2.0 * PI * f * h as f64 * time).sin() / h as f64)
                    .sum();
                out[t + i] += amp * env * s;
            }
            t += burst + (rng.random_range(0.0..0.15) * FS) as usize;
        }
    }
    out
}

pub fn synth_noise(kind: NoiseKind, len: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    match kind {
        NoiseKind::White => Ok(white(len, rng)),
        NoiseKind::Pink => pink(len, rng),
        NoiseKind::Babble => Ok(babble(len, rng)),
    }
}

fn utterance_mixtures(
    cfg: &SynthConfig,
    split: Split,
    index: usize,
    snrs: &[f64],
) -> Result<Vec<Mixture>> {
    let len = (cfg.duration_s * FS).round() as usize;
    let clean_seed = derive_seed(cfg.seed, split, index, 0);
    let clean = Waveform::new(
        synth_speech(len, &mut ChaCha8Rng::seed_from_u64(clean_seed)),
        SAMPLE_RATE,
    )?;
    let kind = NoiseKind::ALL[(index + split.tag() as usize) % NoiseKind::ALL.len()];
    let id = format!("{}-{index:04}", split.id());
    snrs.iter()
        .enumerate()
        .map(|(k, &snr)| {
            let noise_seed = derive_seed(cfg.seed, split, index, 1 + k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
            let long = Waveform::new(synth_noise(kind, len + len / 4, &mut rng)?, SAMPLE_RATE)?;
            let noise = fit_noise(&long, len, &mut rng)?;
            let (noisy, scaled) = mix_at_snr(&clean, &noise, snr)?;
            Ok(Mixture {
                id: id.clone(),
                split,
                clean: clean.clone(),
                noise: scaled,
                noisy,
                noise_kind: kind,
                snr_db: snr,
                clean_seed,
                noise_seed,
            })
        })
        .collect()
}

pub fn synth_corpus(cfg: &SynthConfig) -> Result<Corpus> {
    if cfg.snrs_db.is_empty() || cfg.snrs_db.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("SNR list must be non-empty and finite"));
    }
    if !cfg.duration_s.is_finite() || cfg.duration_s * FS < 512.0 {
        return Err(Error::invalid("utterances must be at least one frame long"));
    }
    let cycled = |split, n: usize| -> Result<Vec<Mixture>> {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let snr = cfg.snrs_db[i % cfg.snrs_db.len()];
            out.extend(utterance_mixtures(cfg, split, i, &[snr])?);
        }
        Ok(out)
    };
    let mut test = Vec::with_capacity(cfg.n_test * cfg.snrs_db.len());
    for i in 0..cfg.n_test {
        test.extend(utterance_mixtures(cfg, Split::Test, i, &cfg.snrs_db)?);
    }
    Ok(Corpus {
        train: cycled(Split::Train, cfg.n_train)?,
        dev: cycled(Split::Dev, cfg.n_dev)?,
        test,
    })
}
