use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;

use super::{ComplexSpectrogram, MagnitudeSpectrogram, Radix2Fft, Waveform};
use crate::error::{Error, Result};
use crate::SAMPLE_RATE;

/// Frame geometry. The default is 512-sample frames with a 256-sample hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    frame_len: usize,
    hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 512,
            hop: 256,
        }
    }
}

impl StftConfig {
    pub fn new(frame_len: usize, hop: usize) -> Result<Self> {
        if frame_len < 2 || !frame_len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "frame length must be a power of two >= 2, got {frame_len}"
            )));
        }
        if hop == 0 || hop > frame_len {
            return Err(Error::invalid(format!(
                "hop must be in 1..={frame_len}, got {hop}"
            )));
        }
        Ok(Self { frame_len, hop })
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    /// One-sided bin count, frame_len/2 + 1.
    pub fn bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Reflect padding applied at each end before framing.
    pub fn edge_pad(&self) -> usize {
        self.frame_len / 2
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn frame_count(&self, len: usize) -> usize {
        let padded = self.padded_len(len);
        (padded - self.frame_len) / self.hop + 1
    }

    /// Reflect-padded length rounded up so the last frame ends exactly at the
    /// buffer end; the rounding tail is zero-filled.
    fn padded_len(&self, len: usize) -> usize {
        let total = len + 2 * self.edge_pad();
        let over = (total - self.frame_len) % self.hop;
        if over == 0 {
            total
        } else {
            total + self.hop - over
        }
    }
}

/// Periodic Hamming window, w[k] = 0.54 - 0.46 cos(2πk/n).
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "window length must be at least 2, got {n}"
        )));
    }
    Ok((0..n)
        .map(|k| 0.54 - 0.46 * (2.0 * PI * k as f64 / n as f64).cos())
        .collect())
}

/// Index into a length-`len` signal under reflection (edge sample not repeated).
fn reflect(mut i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let last = len as isize - 1;
    loop {
        if i < 0 {
            i = -i;
        } else if i > last {
            i = 2 * last - i;
        } else {
            return i as usize;
        }
    }
}

fn padded_signal(samples: &[f64], config: &StftConfig) -> Vec<f64> {
    let pad = config.edge_pad() as isize;
    let len = samples.len();
    let reflected = len + 2 * config.edge_pad();
    let mut out = Vec::with_capacity(config.padded_len(len));
    out.extend((0..reflected as isize).map(|p| samples[reflect(p - pad, len)]));
    out.resize(config.padded_len(len), 0.0);
    out
}

/// STFT with the default 512/256 geometry.
pub fn stft(w: &Waveform) -> Result<ComplexSpectrogram> {
    stft_with(w, &StftConfig::default())
}

pub fn stft_with(w: &Waveform, config: &StftConfig) -> Result<ComplexSpectrogram> {
    if w.is_empty() {
        return Err(Error::invalid("cannot analyse an empty waveform"));
    }
    if w.sample_rate() != SAMPLE_RATE {
        return Err(Error::invalid(format!(
            "expected {SAMPLE_RATE} Hz audio, got {} Hz",
            w.sample_rate()
        )));
    }
    let n = config.frame_len;
    let window = hamming_window(n)?;
    let plan = Radix2Fft::new(n)?;
    let padded = padded_signal(w.samples(), config);
    let frames = config.frame_count(w.len());
    let bins = config.bins();

    let mut data = Array2::zeros((frames, bins));
    let mut buf = vec![Complex64::default(); n];
    for (m, mut row) in data.rows_mut().into_iter().enumerate() {
        let start = m * config.hop;
        for ((b, &x), &win) in buf.iter_mut().zip(&padded[start..start + n]).zip(&window) {
            *b = Complex64::new(x * win, 0.0);
        }
        plan.forward(&mut buf)?;
        for (dst, src) in row.iter_mut().zip(&buf[..bins]) {
            *dst = *src;
        }
    }
    ComplexSpectrogram::new(data, *config, w.len())
}

/// Weighted overlap-add inverse: each frame is inverse transformed from its
/// Hermitian extension, multiplied by the synthesis window, overlap-added and
/// divided per sample by the accumulated squared window.
pub fn istft(s: &ComplexSpectrogram) -> Result<Waveform> {
    let config = s.config();
    let n = config.frame_len;
    let bins = config.bins();
    let window = hamming_window(n)?;
    let plan = Radix2Fft::new(n)?;
    let frames = s.frames();
    let total = if frames == 0 {
        0
    } else {
        (frames - 1) * config.hop + n
    };
    let mut out = vec![0.0; total];
    let mut norm = vec![0.0; total];

    let mut buf = vec![Complex64::default(); n];
    for (m, row) in s.data().rows().into_iter().enumerate() {
        buf[..bins]
            .iter_mut()
            .zip(row.iter())
            .for_each(|(b, v)| *b = *v);
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        for k in 1..n / 2 {
            buf[n - k] = buf[k].conj();
        }
        plan.inverse(&mut buf)?;
        let start = m * config.hop;
        for (k, &win) in window.iter().enumerate() {
            out[start + k] += buf[k].re * win;
            norm[start + k] += win * win;
        }
    }

    let pad = config.edge_pad();
    let len = s.signal_len();
    if pad + len > total {
        return Err(Error::Internal(format!(
            "spectrogram with {frames} frames cannot cover {len} samples"
        )));
    }
    let mut samples = Vec::with_capacity(len);
    for i in pad..pad + len {
        if norm[i] < 1e-12 {
            return Err(Error::Internal(format!(
                "zero accumulated window energy at sample {}",
                i - pad
            )));
        }
        samples.push(out[i] / norm[i]);
    }
    Waveform::new(samples, SAMPLE_RATE)
}

pub fn magnitude(s: &ComplexSpectrogram) -> MagnitudeSpectrogram {
    MagnitudeSpectrogram::new(s.data().mapv(|c| c.norm()))
        .expect("modulus of finite complex values is finite and nonnegative")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, SAMPLE_RATE).unwrap()
    }

    fn tone(freq: f64, len: usize) -> Waveform {
        wave(
            (0..len)
                .map(|t| (2.0 * PI * freq * t as f64 / SAMPLE_RATE as f64).sin())
                .collect(),
        )
    }

    fn noise(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        wave((0..len).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    fn interior_rel_rms(a: &[f64], b: &[f64]) -> f64 {
        let range = 512..a.len() - 512;
        let err: f64 = range.clone().map(|i| (a[i] - b[i]).powi(2)).sum();
        let refp: f64 = range.map(|i| b[i].powi(2)).sum();
        (err / refp).sqrt()
    }

    #[test]
    fn hamming_values() {
        let w = hamming_window(512).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-15);
        assert!((w[256] - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|&v| v > 0.08 - 1e-15 && v <= 1.0));
        let w4 = hamming_window(4).unwrap();
        assert!((w4[1] - 0.54).abs() < 1e-15);
        assert!(hamming_window(1).is_err());
        assert!(hamming_window(0).is_err());
    }

    #[test]
    fn frame_count_follows_padding_rule() {
        let c = StftConfig::default();
        // 16000 + 512 = 16512, rounded to 16640 -> (16640-512)/256 + 1
        assert_eq!(c.frame_count(16000), 64);
        assert_eq!(c.frame_count(256), 2);
        assert_eq!(c.frame_count(1), 2);
        assert_eq!(c.frame_count(32000), 126);
    }

    #[test]
    fn zeros_give_zero_spectrogram() {
        let s = stft(&wave(vec![0.0; 16000])).unwrap();
        assert_eq!(s.dim(), (64, 257));
        assert!(s.data().iter().all(|c| c.norm() == 0.0));
        let back = istft(&s).unwrap();
        assert_eq!(back.len(), 16000);
        assert!(back.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn tone_peaks_at_expected_bin() {
        let s = stft(&tone(1000.0, 16000)).unwrap();
        let mag = magnitude(&s);
        for row in mag.data().rows().into_iter().skip(2).take(58) {
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            assert_eq!(peak, 32);
        }
    }

    #[test]
    fn window_frame_concentrates_at_dc() {
        // a constant signal makes every interior frame equal to the window itself
        let s = stft(&wave(vec![1.0; 2048])).unwrap();
        let mag = magnitude(&s);
        let row = mag.data().row(3);
        let dc = row[0];
        assert!(row.iter().skip(1).all(|&v| v < dc));
        let sum: f64 = hamming_window(512).unwrap().iter().sum();
        assert!((dc - sum).abs() < 1e-9);
    }

    #[test]
    fn round_trip_noise_and_tone() {
        for w in [noise(16000, 1), tone(1000.0, 16000), noise(4097, 2)] {
            let back = istft(&stft(&w).unwrap()).unwrap();
            assert_eq!(back.len(), w.len());
            assert!(interior_rel_rms(back.samples(), w.samples()) < 1e-6);
            // edges are reconstructed too thanks to the reflect padding
            let max_err = back
                .samples()
                .iter()
                .zip(w.samples())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(max_err < 1e-9);
        }
    }

    #[test]
    fn short_signals_round_trip() {
        for len in [1usize, 2, 3, 100, 255, 256, 257, 511, 513] {
            let w = noise(len, len as u64);
            let back = istft(&stft(&w).unwrap()).unwrap();
            for (a, b) in back.samples().iter().zip(w.samples()) {
                assert!((a - b).abs() < 1e-9, "len {len}");
            }
        }
    }

    #[test]
    fn rejects_empty_and_wrong_rate() {
        assert!(matches!(
            stft(&wave(vec![])),
            Err(Error::InvalidArgument(_))
        ));
        let w = Waveform::new(vec![0.0; 100], 44_100).unwrap();
        assert!(stft(&w).is_err());
        assert!(Waveform::new(vec![f64::NAN], SAMPLE_RATE).is_err());
    }

    #[test]
    fn magnitude_is_modulus() {
        let data = Array2::from_shape_vec(
            (1, 3),
            vec![
                Complex64::new(3.0, 4.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(1.0, 1.0),
            ],
        )
        .unwrap();
        let s = ComplexSpectrogram::new(data, StftConfig::new(4, 2).unwrap(), 4).unwrap();
        let m = magnitude(&s);
        assert_eq!(m.data()[[0, 0]], 5.0);
        assert_eq!(m.data()[[0, 1]], 0.0);
        assert!((m.data()[[0, 2]] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn other_geometries_round_trip() {
        let w = noise(3000, 9);
        let c = StftConfig::new(256, 64).unwrap();
        let s = stft_with(&w, &c).unwrap();
        assert_eq!(s.bins(), 129);
        let back = istft(&s).unwrap();
        for (a, b) in back.samples().iter().zip(w.samples()) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(StftConfig::new(500, 250).is_err());
        assert!(StftConfig::new(512, 0).is_err());
    }
}
