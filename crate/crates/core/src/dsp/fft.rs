//! Iterative radix-2 Cooley-Tukey FFT with a precomputed twiddle table.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A planned transform of one power-of-two size.
#[derive(Debug, Clone)]
pub struct Radix2Fft {
    len: usize,
    /// e^{-2πik/n} for k in 0..n/2
    twiddles: Vec<Complex64>,
    bitrev: Vec<usize>,
}

impl Radix2Fft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::invalid(format!(
                "FFT length must be a power of two, got {len}"
            )));
        }
        let bits = len.trailing_zeros();
        let bitrev = (0..len)
            .map(|i| {
                if bits == 0 {
                    0
                } else {
                    i.reverse_bits() >> (usize::BITS - bits)
                }
            })
            .collect();
        let twiddles = (0..len / 2)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / len as f64))
            .collect();
        Ok(Self {
            len,
            twiddles,
            bitrev,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Unnormalised forward transform, in place.
    pub fn forward(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf)?;
        self.transform(buf, false);
        Ok(())
    }

    /// Inverse transform with 1/n normalisation, in place.
    pub fn inverse(&self, buf: &mut [Complex64]) -> Result<()> {
        self.check(buf)?;
        self.transform(buf, true);
        let scale = 1.0 / self.len as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
        Ok(())
    }

    fn check(&self, buf: &[Complex64]) -> Result<()> {
        if buf.len() != self.len {
            return Err(Error::invalid(format!(
                "buffer length {} does not match planned FFT length {}",
                buf.len(),
                self.len
            )));
        }
        Ok(())
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let n = self.len;
        for i in 0..n {
            let j = self.bitrev[i];
            if i < j {
                buf.swap(i, j);
            }
        }
        let mut size = 2;
        while size <= n {
            let half = size / 2;
            let stride = n / size;
            for start in (0..n).step_by(size) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = buf[start + k];
                    let b = buf[start + k + half] * w;
                    buf[start + k] = a + b;
                    buf[start + k + half] = a - b;
                }
            }
            size *= 2;
        }
    }
}

/// Forward DFT of a power-of-two length sequence.
pub fn fft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Radix2Fft::new(x.len())?;
    let mut out = x.to_vec();
    plan.forward(&mut out)?;
    Ok(out)
}

/// Inverse DFT (1/n normalised) of a power-of-two length sequence.
pub fn ifft(x: &[Complex64]) -> Result<Vec<Complex64>> {
    let plan = Radix2Fft::new(x.len())?;
    let mut out = x.to_vec();
    plan.inverse(&mut out)?;
    Ok(out)
}
