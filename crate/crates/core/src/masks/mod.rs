//! Oracle masks, threshold/scale fusion, and mask application.
//!
//! The ideal ratio mask is `(X²/(X²+N²))^β`. The target binary mask marks a
//! bin when the clean magnitude strictly exceeds the temporal mean magnitude
//! of its frequency. Fusion keeps the ratio mask where the binary-mask
//! probability strictly exceeds `delta` and scales it by `gamma` elsewhere.

mod dump;

pub use dump::{mask_to_csv, read_mask_dump, write_mask_dump, MASK_DUMP_MAGIC, MASK_DUMP_VERSION};

use ndarray::{Array2, Zip};

use crate::dsp::{istft, stft, ComplexSpectrogram, MagnitudeSpectrogram, Waveform};
use crate::error::{Error, Result};

/// Bins with X²+N² below this are treated as silent.
pub const IRM_ENERGY_FLOOR: f64 = 1e-12;

/// Exponent commonly used for the ratio mask.
pub const DEFAULT_IRM_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    Soft,
    Binary,
}

/// A real-valued gain per time-frequency bin.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    data: Array2<f64>,
    kind: MaskKind,
}

impl Mask {
    pub fn new(data: Array2<f64>, kind: MaskKind) -> Result<Self> {
        match kind {
            MaskKind::Soft => {
                if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::invalid(format!(
                        "soft mask value {v} outside [0, 1]"
                    )));
                }
            }
            MaskKind::Binary => {
                if let Some(v) = data.iter().find(|v| **v != 0.0 && **v != 1.0) {
                    return Err(Error::invalid(format!(
                        "binary mask value {v} is neither 0 nor 1"
                    )));
                }
            }
        }
        Ok(Self { data, kind })
    }

    pub fn ones(frames: usize, bins: usize) -> Self {
        Self {
            data: Array2::ones((frames, bins)),
            kind: MaskKind::Binary,
        }
    }

    pub fn zeros(frames: usize, bins: usize) -> Self {
        Self {
            data: Array2::zeros((frames, bins)),
            kind: MaskKind::Binary,
        }
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    pub fn kind(&self) -> MaskKind {
        self.kind
    }

    pub fn dim(&self) -> (usize, usize) {
        self.data.dim()
    }
}

/// Threshold `delta` on the binary-mask probability and attenuation `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    delta: f64,
    gamma: f64,
}

impl FusionParams {
    pub fn new(delta: f64, gamma: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!(
                "gamma must lie in [0, 1], got {gamma}"
            )));
        }
        Ok(Self { delta, gamma })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

fn check_dims(what: &str, a: (usize, usize), b: (usize, usize)) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!(
            "{what}: dimension mismatch {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }
    Ok(())
}

pub fn compute_irm(
    clean: &MagnitudeSpectrogram,
    noise: &MagnitudeSpectrogram,
    beta: f64,
) -> Result<Mask> {
    check_dims("compute_irm", clean.dim(), noise.dim())?;
    if !beta.is_finite() || beta <= 0.0 {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let data = Zip::from(clean.data())
        .and(noise.data())
        .map_collect(|&x, &n| {
            let speech = x * x;
            let total = speech + n * n;
            if total < IRM_ENERGY_FLOOR {
                0.0
            } else {
                (speech / total).powf(beta).clamp(0.0, 1.0)
            }
        });
    Mask::new(data, MaskKind::Soft)
}

pub fn compute_tbm(clean: &MagnitudeSpectrogram) -> Result<Mask> {
    let (frames, bins) = clean.dim();
    if frames == 0 {
        return Err(Error::invalid(
            "target binary mask needs at least one frame",
        ));
    }
    let mut data = Array2::zeros((frames, bins));
    for (col, mut out) in clean.data().columns().into_iter().zip(data.columns_mut()) {
        // mean taken relative to the column minimum, so a constant column
        // yields exactly its own value and no bin passes the strict test
        let floor = col.fold(f64::INFINITY, |m, &x| m.min(x));
        let threshold = floor + col.iter().map(|&x| x - floor).sum::<f64>() / frames as f64;
        for (o, &x) in out.iter_mut().zip(col.iter()) {
            *o = if x > threshold { 1.0 } else { 0.0 };
        }
    }
    Mask::new(data, MaskKind::Binary)
}

/// Hard-thresholds a probability grid: 1 where `p > threshold`, else 0.
pub fn binarize(probs: &Mask, threshold: f64) -> Mask {
    Mask {
        data: probs.data.mapv(|p| if p > threshold { 1.0 } else { 0.0 }),
        kind: MaskKind::Binary,
    }
}

pub fn fuse_masks(irm_est: &Mask, tbm_est: &Mask, p: FusionParams) -> Result<Mask> {
    fuse_unchecked(irm_est, tbm_est, p.delta, p.gamma)
}

/// Fusion without the open-interval restriction on `delta`, so the sweep can
/// evaluate the `delta = 0` and `delta = 1` table rows.
pub(crate) fn fuse_unchecked(
    irm_est: &Mask,
    tbm_est: &Mask,
    delta: f64,
    gamma: f64,
) -> Result<Mask> {
    check_dims("fuse_masks", irm_est.dim(), tbm_est.dim())?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!(
            "gamma must lie in [0, 1], got {gamma}"
        )));
    }
    let data = Zip::from(&irm_est.data)
        .and(&tbm_est.data)
        .map_collect(|&irm, &tbm| if tbm > delta { irm } else { gamma * irm });
    Mask::new(data, MaskKind::Soft)
}

pub fn apply_mask(mask: &Mask, noisy: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    check_dims("apply_mask", mask.dim(), noisy.dim())?;
    let data = Zip::from(noisy.data())
        .and(&mask.data)
        .map_collect(|&c, &g| c * g);
    Ok(noisy.with_data(data))
}

/// Anything that can produce a mask for a noisy spectrogram.
pub trait MaskSource {
    fn mask_for(&self, noisy: &ComplexSpectrogram) -> Result<Mask>;
}

impl MaskSource for Mask {
    fn mask_for(&self, _noisy: &ComplexSpectrogram) -> Result<Mask> {
        Ok(self.clone())
    }
}

impl<F> MaskSource for F
where
    F: Fn(&ComplexSpectrogram) -> Result<Mask>,
{
    fn mask_for(&self, noisy: &ComplexSpectrogram) -> Result<Mask> {
        self(noisy)
    }
}

/// Analyse, mask, resynthesise. Output has the input's length.
pub fn enhance(noisy: &Waveform, mask_source: &impl MaskSource) -> Result<Waveform> {
    let spec = stft(noisy)?;
    let mask = mask_source.mask_for(&spec)?;
    enhance_spectrogram(&spec, &mask)
}

/// [`enhance`] for callers that already hold the noisy spectrogram.
pub fn enhance_spectrogram(noisy: &ComplexSpectrogram, mask: &Mask) -> Result<Waveform> {
    istft(&apply_mask(mask, noisy)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn mag(data: Array2<f64>) -> MagnitudeSpectrogram {
        MagnitudeSpectrogram::new(data).unwrap()
    }

    fn soft(data: Array2<f64>) -> Mask {
        Mask::new(data, MaskKind::Soft).unwrap()
    }

    #[test]
    fn irm_examples() {
        let x = mag(array![[1.0, 2.0, 3f64.sqrt(), 0.0]]);
        let n = mag(array![[0.0, 2.0, 1.0, 0.0]]);
        let irm = compute_irm(&x, &n, DEFAULT_IRM_BETA).unwrap();
        assert_eq!(irm.data()[[0, 0]], 1.0);
        assert!((irm.data()[[0, 1]] - 0.5f64.sqrt()).abs() < 1e-12);
        assert!((irm.data()[[0, 2]] - 0.75f64.sqrt()).abs() < 1e-12);
        assert_eq!(irm.data()[[0, 3]], 0.0);
        assert_eq!(irm.kind(), MaskKind::Soft);
    }

    #[test]
    fn irm_errors() {
        let a = mag(Array2::ones((2, 3)));
        let b = mag(Array2::ones((3, 2)));
        assert!(matches!(
            compute_irm(&a, &b, 0.5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(compute_irm(&a, &a, 0.0).is_err());
        assert!(compute_irm(&a, &a, -1.0).is_err());
    }

    #[test]
    fn tbm_examples() {
        let constant = mag(Array2::from_elem((4, 3), 2.5));
        assert!(compute_tbm(&constant)
            .unwrap()
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let column = mag(array![[0.0], [0.0], [4.0]]);
        assert_eq!(
            compute_tbm(&column).unwrap().data(),
            &array![[0.0], [0.0], [1.0]]
        );
        let zero = mag(Array2::zeros((5, 257)));
        assert!(compute_tbm(&zero).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(compute_tbm(&mag(Array2::zeros((0, 257)))).is_err());
    }

    #[test]
    fn fusion_examples() {
        let irm = soft(array![[0.8, 0.8]]);
        let tbm = soft(array![[0.3, 0.7]]);
        let fused = fuse_masks(&irm, &tbm, FusionParams::new(0.5, 0.5).unwrap()).unwrap();
        assert!((fused.data()[[0, 0]] - 0.4).abs() < 1e-15);
        assert_eq!(fused.data()[[0, 1]], 0.8);
        // tie takes the attenuated branch
        let tie = fuse_masks(
            &irm,
            &soft(array![[0.5, 0.5]]),
            FusionParams::new(0.5, 0.0).unwrap(),
        )
        .unwrap();
        assert_eq!(tie.data(), &array![[0.0, 0.0]]);
        assert!(fuse_masks(
            &irm,
            &soft(array![[0.5]]),
            FusionParams::new(0.5, 0.5).unwrap()
        )
        .is_err());
    }

    #[test]
    fn fusion_params_bounds() {
        assert!(FusionParams::new(0.0, 0.5).is_err());
        assert!(FusionParams::new(1.0, 0.5).is_err());
        assert!(FusionParams::new(0.5, -0.1).is_err());
        assert!(FusionParams::new(0.5, 1.1).is_err());
        assert!(FusionParams::new(f64::NAN, 0.5).is_err());
        assert!(FusionParams::new(1e-9, 1.0).is_ok());
    }

    #[test]
    fn mask_validation() {
        assert!(Mask::new(array![[1.2]], MaskKind::Soft).is_err());
        assert!(Mask::new(array![[0.5]], MaskKind::Binary).is_err());
        assert!(Mask::new(array![[f64::NAN]], MaskKind::Soft).is_err());
    }

    #[test]
    fn apply_mask_examples() {
        use crate::dsp::StftConfig;
        use num_complex::Complex64;
        let cfg = StftConfig::new(4, 2).unwrap();
        let spec = ComplexSpectrogram::new(
            array![[
                Complex64::new(2.0, 2.0),
                Complex64::new(1.0, -3.0),
                Complex64::new(0.5, 0.0)
            ]],
            cfg,
            4,
        )
        .unwrap();
        let out = apply_mask(&Mask::ones(1, 3), &spec).unwrap();
        assert_eq!(out, spec);
        let out = apply_mask(&Mask::zeros(1, 3), &spec).unwrap();
        assert!(out.data().iter().all(|c| c.norm() == 0.0));
        let half = soft(array![[0.5, 1.0, 1.0]]);
        assert_eq!(
            apply_mask(&half, &spec).unwrap().data()[[0, 0]],
            Complex64::new(1.0, 1.0)
        );
        assert!(apply_mask(&Mask::ones(2, 3), &spec).is_err());
    }

    fn grid(rows: usize, cols: usize) -> impl Strategy<Value = Array2<f64>> {
        proptest::collection::vec(0.0f64..=1.0, rows * cols)
            .prop_map(move |v| Array2::from_shape_vec((rows, cols), v).unwrap())
    }

    proptest! {
        #[test]
        fn irm_is_bounded_and_monotone(
            x in proptest::collection::vec(0.0f64..10.0, 16),
            n in proptest::collection::vec(0.0f64..10.0, 16),
            bump in 0.0f64..5.0,
            beta in 0.1f64..3.0,
        ) {
            let xs = mag(Array2::from_shape_vec((4, 4), x.clone()).unwrap());
            let ns = mag(Array2::from_shape_vec((4, 4), n).unwrap());
            let louder = mag(xs.data().mapv(|v| v + bump));
            let a = compute_irm(&xs, &ns, beta).unwrap();
            let b = compute_irm(&louder, &ns, beta).unwrap();
            for (lo, hi) in a.data().iter().zip(b.data()) {
                prop_assert!((0.0..=1.0).contains(lo));
                prop_assert!(*lo <= *hi);
            }
        }

        #[test]
        fn tbm_constant_column_is_all_zero(level in 0.0f64..5.0, frames in 1usize..40) {
            let tbm = compute_tbm(&mag(Array2::from_elem((frames, 2), level))).unwrap();
            prop_assert!(tbm.data().iter().all(|&v| v == 0.0));
        }

        #[test]
        fn tbm_marks_exactly_above_mean(data in proptest::collection::vec(0.0f64..5.0, 24)) {
            let x = mag(Array2::from_shape_vec((6, 4), data).unwrap());
            let tbm = compute_tbm(&x).unwrap();
            for f in 0..4 {
                let col = x.data().column(f);
                let mean = col.sum() / 6.0;
                for t in 0..6 {
                    // values within rounding of the mean may fall either way
                    if (col[t] - mean).abs() > 1e-12 {
                        let expect = if col[t] > mean { 1.0 } else { 0.0 };
                        prop_assert_eq!(tbm.data()[[t, f]], expect);
                    }
                }
            }
        }

        #[test]
        fn fusion_structure(irm in grid(3, 5), tbm in grid(3, 5), d1 in 0.01f64..0.99, d2 in 0.01f64..0.99, g in 0.0f64..=1.0) {
            let irm = soft(irm);
            let tbm = soft(tbm);
            let a = fuse_masks(&irm, &tbm, FusionParams::new(d1, g).unwrap()).unwrap();
            let b = fuse_masks(&irm, &tbm, FusionParams::new(d2, g).unwrap()).unwrap();
            let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            for ((&va, &vb), &t) in a.data().iter().zip(b.data()).zip(tbm.data()) {
                if va != vb {
                    prop_assert!(t > lo && t <= hi);
                }
            }
            let zero = fuse_masks(&irm, &tbm, FusionParams::new(d1, 0.0).unwrap()).unwrap();
            let product = irm.data() * binarize(&tbm, d1).data();
            prop_assert_eq!(zero.data(), &product);
        }
    }
}
