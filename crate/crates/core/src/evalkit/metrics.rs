//! Objective quality metrics, all in dB.

use std::fmt;
use std::str::FromStr;

use crate::dsp::{magnitude, stft, Waveform};
use crate::error::{Error, Result};

/// SI-SDR is reported inside ±this bound; identical signals hit the ceiling.
pub const SI_SDR_CAP_DB: f64 = 100.0;
pub const SEG_SNR_MIN_DB: f64 = -10.0;
pub const SEG_SNR_MAX_DB: f64 = 35.0;
/// Reference frames with mean power below this are skipped by segmental SNR.
pub const SEG_SNR_SILENCE: f64 = 1e-10;
pub const LSD_MAG_FLOOR: f64 = 1e-8;

fn check_pair(est: &Waveform, reference: &Waveform) -> Result<()> {
    if est.len() != reference.len() {
        return Err(Error::invalid(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    Ok(())
}

/// Scale-invariant signal-to-distortion ratio.
pub fn si_sdr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    check_pair(est, reference)?;
    let (e, r) = (est.samples(), reference.samples());
    let ref_energy: f64 = r.iter().map(|v| v * v).sum();
    if ref_energy <= 0.0 {
        return Err(Error::invalid("reference signal is silent"));
    }
    let scale = e.iter().zip(r).map(|(a, b)| a * b).sum::<f64>() / ref_energy;
    let (mut target, mut residual) = (0.0, 0.0);
    for (&a, &b) in e.iter().zip(r) {
        let t = scale * b;
        target += t * t;
        residual += (a - t) * (a - t);
    }
    let db = 10.0 * (target / residual).log10();
    Ok(if db.is_nan() {
        -SI_SDR_CAP_DB
    } else {
        db.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB)
    })
}

pub fn segmental_snr(est: &Waveform, reference: &Waveform) -> Result<f64> {
    segmental_snr_with(est, reference, 512, 256)
}

/// Mean of per-frame SNRs clamped to [-10, 35] dB over non-silent reference frames.
pub fn segmental_snr_with(
    est: &Waveform,
    reference: &Waveform,
    frame: usize,
    hop: usize,
) -> Result<f64> {
    check_pair(est, reference)?;
    if frame == 0 || hop == 0 {
        return Err(Error::invalid("frame and hop must be positive"));
    }
    let (e, r) = (est.samples(), reference.samples());
    let len = r.len();
    let starts: Vec<usize> = if len <= frame {
        vec![0]
    } else {
        (0..=(len - frame) / hop).map(|m| m * hop).collect()
    };
    let mut sum = 0.0;
    let mut count = 0usize;
    for start in starts {
        let end = (start + frame).min(len);
        let signal: f64 = r[start..end].iter().map(|v| v * v).sum();
        if signal / ((end - start).max(1) as f64) < SEG_SNR_SILENCE {
            continue;
        }
        let noise: f64 = r[start..end]
            .iter()
            .zip(&e[start..end])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let db = 10.0 * (signal / noise).log10();
        sum += db.clamp(SEG_SNR_MIN_DB, SEG_SNR_MAX_DB);
        count += 1;
    }
    if count == 0 {
        return Err(Error::invalid("every reference frame is silent"));
    }
    Ok(sum / count as f64)
}

/// RMS over all time-frequency bins of the dB difference of STFT magnitudes.
pub fn log_spectral_distance(est: &Waveform, reference: &Waveform) -> Result<f64> {
    check_pair(est, reference)?;
    let a = magnitude(&stft(est)?);
    let b = magnitude(&stft(reference)?);
    let n = a.data().len() as f64;
    let sq: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = 20.0 * (x.max(LSD_MAG_FLOOR).log10() - y.max(LSD_MAG_FLOOR).log10());
            d * d
        })
        .sum();
    Ok((sq / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    SiSdr,
    SegSnr,
    Lsd,
}

impl Metric {
    pub fn id(&self) -> &'static str {
        match self {
            Metric::SiSdr => "si-sdr",
            Metric::SegSnr => "seg-snr",
            Metric::Lsd => "lsd",
        }
    }

    pub fn evaluate(&self, est: &Waveform, reference: &Waveform) -> Result<f64> {
        match self {
            Metric::SiSdr => si_sdr(est, reference),
            Metric::SegSnr => segmental_snr(est, reference),
            Metric::Lsd => log_spectral_distance(est, reference),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "si-sdr" | "sisdr" => Ok(Metric::SiSdr),
            "seg-snr" | "segsnr" => Ok(Metric::SegSnr),
            "lsd" => Ok(Metric::Lsd),
            other => Err(Error::invalid(format!(
                "unknown metric {other:?}; expected si-sdr, seg-snr or lsd"
            ))),
        }
    }
}
