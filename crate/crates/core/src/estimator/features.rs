use ndarray::{Array1, Array2};

use crate::dsp::MagnitudeSpectrogram;
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-bin mean and standard deviation of log(1 + magnitude) features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStats {
    mean: Array1<f64>,
    std: Array1<f64>,
}

impl FeatureStats {
    pub fn new(mean: Array1<f64>, std: Array1<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(Error::invalid("mean and std lengths differ"));
        }
        if mean.iter().chain(std.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("feature stats must be finite"));
        }
        Ok(Self {
            mean,
            std: std.mapv(|s| s.max(STD_FLOOR)),
        })
    }

    /// Welford accumulation over every frame of every spectrogram.
    pub fn from_spectrograms<'a>(
        specs: impl IntoIterator<Item = &'a MagnitudeSpectrogram>,
    ) -> Result<Self> {
        let mut mean: Option<Array1<f64>> = None;
        let mut m2: Array1<f64> = Array1::zeros(0);
        let mut count = 0usize;
        for spec in specs {
            let mean = mean.get_or_insert_with(|| {
                m2 = Array1::zeros(spec.bins());
                Array1::zeros(spec.bins())
            });
            if spec.bins() != mean.len() {
                return Err(Error::invalid("spectrograms disagree on bin count"));
            }
            for row in spec.data().rows() {
                count += 1;
                for ((m, s), &x) in mean.iter_mut().zip(m2.iter_mut()).zip(row.iter()) {
                    let v = x.ln_1p();
                    let delta = v - *m;
                    *m += delta / count as f64;
                    *s += delta * (v - *m);
                }
            }
        }
        let mean = match mean {
            Some(m) if count > 0 => m,
            _ => return Err(Error::invalid("no frames to compute feature stats from")),
        };
        let std = m2.mapv(|s| (s / count as f64).sqrt());
        Self::new(mean, std)
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn std(&self) -> &Array1<f64> {
        &self.std
    }

    pub fn bins(&self) -> usize {
        self.mean.len()
    }
}

/// Stacks standardised log-magnitude frames t-c/2 ..= t+c/2 (edges replicated)
/// into one row per frame of width `bins * context`.
pub fn featurize(
    noisy_mag: &MagnitudeSpectrogram,
    stats: &FeatureStats,
    context: usize,
) -> Result<Array2<f64>> {
    let (frames, bins) = noisy_mag.dim();
    if bins != stats.bins() {
        return Err(Error::invalid(format!(
            "spectrogram has {bins} bins, stats cover {}",
            stats.bins()
        )));
    }
    if context.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "context must be odd, got {context}"
        )));
    }
    let mut norm = noisy_mag.data().mapv(f64::ln_1p);
    for mut row in norm.rows_mut() {
        row -= &stats.mean;
        row /= &stats.std;
    }
    let half = (context / 2) as isize;
    let mut out = Array2::zeros((frames, bins * context));
    for t in 0..frames {
        let mut row = out.row_mut(t);
        for slot in 0..context {
            let src = (t as isize + slot as isize - half).clamp(0, frames as isize - 1) as usize;
            row.slice_mut(ndarray::s![slot * bins..(slot + 1) * bins])
                .assign(&norm.row(src));
        }
    }
    Ok(out)
}
