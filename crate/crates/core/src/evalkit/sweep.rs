//! Threshold/scale sweep over the fusion rule.
//!
//! For every (delta, gamma) the estimated masks of each utterance are fused,
//! applied, and scored against the clean reference. Cells hold the mean score
//! per SNR condition. Reports render as the scale table (rows gamma, delta
//! fixed), the threshold table (rows delta, gamma fixed), and a flat CSV.

use std::fmt::Write as _;

use super::Metric;
use crate::dsp::{stft, ComplexSpectrogram, Waveform};
use crate::error::{Error, Result};
use crate::masks::{binarize, enhance_spectrogram, fuse_unchecked, Mask};

/// Default table rows 0, 0.1, ..., 1.
pub fn default_levels() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub metric: Metric,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            deltas: default_levels(),
            gammas: default_levels(),
            metric: Metric::SiSdr,
        }
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, list) in [("deltas", &self.deltas), ("gammas", &self.gammas)] {
            if list.is_empty() {
                return Err(Error::invalid(format!("{name} must not be empty")));
            }
            if list.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(format!("{name} must be strictly ascending")));
            }
        }
        Ok(())
    }
}

/// One utterance at one SNR with its estimated masks.
#[derive(Debug, Clone)]
pub struct SweepItem {
    pub snr_db: f64,
    pub noisy: Waveform,
    pub clean: Waveform,
    pub irm_est: Mask,
    pub tbm_est: Mask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub name: String,
    /// Mean score per SNR, aligned with [`SweepReport::snrs`].
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub metric: Metric,
    pub deltas: Vec<f64>,
    pub gammas: Vec<f64>,
    /// Ascending distinct SNRs present in the items.
    pub snrs: Vec<f64>,
    /// Indexed [delta][gamma][snr].
    cells: Vec<f64>,
    /// Noisy input, ratio mask alone, binarized binary mask alone.
    pub baselines: Vec<BaselineRow>,
}

/// Threshold applied to binary-mask probabilities for the binary-only baseline.
pub const TBM_BASELINE_THRESHOLD: f64 = 0.5;

struct Prepared<'a> {
    item: &'a SweepItem,
    spec: ComplexSpectrogram,
    snr_index: usize,
}

pub fn sweep_fusion(items: &[SweepItem], grid: &SweepGrid) -> Result<SweepReport> {
    grid.validate()?;
    if items.is_empty() {
        return Err(Error::invalid("nothing to sweep: no items"));
    }
    let mut snrs: Vec<f64> = items.iter().map(|i| i.snr_db).collect();
    snrs.sort_by(f64::total_cmp);
    snrs.dedup();
    let prepared = items
        .iter()
        .map(|item| {
            let spec = stft(&item.noisy)?;
            if item.irm_est.dim() != spec.dim() || item.tbm_est.dim() != spec.dim() {
                return Err(Error::invalid(format!(
                    "mask dimensions {:?}/{:?} do not match spectrogram {:?}",
                    item.irm_est.dim(),
                    item.tbm_est.dim(),
                    spec.dim()
                )));
            }
            let snr_index = snrs.iter().position(|s| *s == item.snr_db).unwrap();
            Ok(Prepared {
                item,
                spec,
                snr_index,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let per_snr = |score: &dyn Fn(&Prepared) -> Result<f64>| -> Result<Vec<f64>> {
        let mut sums = vec![0.0; snrs.len()];
        let mut counts = vec![0usize; snrs.len()];
        for p in &prepared {
            sums[p.snr_index] += score(p)?;
            counts[p.snr_index] += 1;
        }
        Ok(sums
            .iter()
            .zip(&counts)
            .map(|(s, &c)| s / c as f64)
            .collect())
    };
    let metric = grid.metric;

    let mut cells = Vec::with_capacity(grid.deltas.len() * grid.gammas.len() * snrs.len());
    for &delta in &grid.deltas {
        for &gamma in &grid.gammas {
            cells.extend(per_snr(&|p| {
                let fused = fuse_unchecked(&p.item.irm_est, &p.item.tbm_est, delta, gamma)?;
                metric.evaluate(&enhance_spectrogram(&p.spec, &fused)?, &p.item.clean)
            })?);
        }
    }

    let baselines = vec![
        BaselineRow {
            name: "Noisy".into(),
            values: per_snr(&|p| metric.evaluate(&p.item.noisy, &p.item.clean))?,
        },
        BaselineRow {
            name: "IRM".into(),
            values: per_snr(&|p| {
                metric.evaluate(
                    &enhance_spectrogram(&p.spec, &p.item.irm_est)?,
                    &p.item.clean,
                )
            })?,
        },
        BaselineRow {
            name: "TBM".into(),
            values: per_snr(&|p| {
                let mask = binarize(&p.item.tbm_est, TBM_BASELINE_THRESHOLD);
                metric.evaluate(&enhance_spectrogram(&p.spec, &mask)?, &p.item.clean)
            })?,
        },
    ];

    Ok(SweepReport {
        metric,
        deltas: grid.deltas.clone(),
        gammas: grid.gammas.clone(),
        snrs,
        cells,
        baselines,
    })
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn nearest(list: &[f64], target: f64) -> usize {
    list.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn snr_label(snr: f64) -> String {
    format!("{snr}dB")
}

impl SweepReport {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, delta: usize, gamma: usize, snr: usize) -> f64 {
        let (ng, ns) = (self.gammas.len(), self.snrs.len());
        self.cells[(delta * ng + gamma) * ns + snr]
    }

    /// The SNR columns of one (delta, gamma) row.
    pub fn row(&self, delta: usize, gamma: usize) -> &[f64] {
        let (ng, ns) = (self.gammas.len(), self.snrs.len());
        let start = (delta * ng + gamma) * ns;
        &self.cells[start..start + ns]
    }

    /// Mean over SNR columns.
    pub fn row_average(&self, delta: usize, gamma: usize) -> f64 {
        mean(self.row(delta, gamma).iter().copied())
    }

    /// Mean over every gamma and SNR for one delta.
    pub fn delta_marginal(&self, delta: usize) -> f64 {
        mean((0..self.gammas.len()).flat_map(|g| self.row(delta, g).to_vec()))
    }

    /// Mean over every delta and SNR for one gamma.
    pub fn gamma_marginal(&self, gamma: usize) -> f64 {
        mean((0..self.deltas.len()).flat_map(|d| self.row(d, gamma).to_vec()))
    }

    pub fn baseline(&self, name: &str) -> Option<&BaselineRow> {
        self.baselines.iter().find(|b| b.name == name)
    }

    /// `delta,gamma,snr_db,metric,value`, one line per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,gamma,snr_db,metric,value\n");
        for (d, delta) in self.deltas.iter().enumerate() {
            for (g, gamma) in self.gammas.iter().enumerate() {
                for (s, snr) in self.snrs.iter().enumerate() {
                    writeln!(
                        out,
                        "{delta},{gamma},{snr},{},{:.6}",
                        self.metric,
                        self.cell(d, g, s)
                    )
                    .unwrap();
                }
            }
        }
        out
    }

    fn header(&self, first: &str) -> String {
        let mut line = format!("{first:<8}");
        for snr in &self.snrs {
            write!(line, "{:>10}", snr_label(*snr)).unwrap();
        }
        write!(line, "{:>10}", "AVG").unwrap();
        line
    }

    fn value_line(label: &str, values: &[f64]) -> String {
        let mut line = format!("{label:<8}");
        for v in values {
            write!(line, "{v:>10.3}").unwrap();
        }
        write!(line, "{:>10.3}", mean(values.iter().copied())).unwrap();
        line
    }

    pub fn render_baselines(&self) -> String {
        let mut out = format!("# {} baselines\n{}\n", self.metric, self.header("method"));
        for b in &self.baselines {
            out.push_str(&Self::value_line(&b.name, &b.values));
            out.push('\n');
        }
        out
    }

    /// Rows over gamma with delta fixed to the grid value nearest `delta`.
    pub fn render_gamma_table(&self, delta: f64) -> String {
        let d = nearest(&self.deltas, delta);
        let mut out = format!(
            "# {} for different scale gamma, delta={}\n{}\n",
            self.metric,
            self.deltas[d],
            self.header("gamma")
        );
        for (g, gamma) in self.gammas.iter().enumerate() {
            out.push_str(&Self::value_line(&gamma.to_string(), self.row(d, g)));
            out.push('\n');
        }
        out
    }

    /// Rows over delta with gamma fixed to the grid value nearest `gamma`.
    pub fn render_delta_table(&self, gamma: f64) -> String {
        let g = nearest(&self.gammas, gamma);
        let mut out = format!(
            "# {} for different threshold delta, gamma={}\n{}\n",
            self.metric,
            self.gammas[g],
            self.header("delta")
        );
        for (d, delta) in self.deltas.iter().enumerate() {
            out.push_str(&Self::value_line(&delta.to_string(), self.row(d, g)));
            out.push('\n');
        }
        out
    }

    /// Baselines, the scale table and the threshold table.
    pub fn render_text(&self, table_delta: f64, table_gamma: f64) -> String {
        format!(
            "{}\n{}\n{}",
            self.render_baselines(),
            self.render_gamma_table(table_delta),
            self.render_delta_table(table_gamma)
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::magnitude;
    use crate::evalkit::{synth_corpus, SynthConfig};
    use crate::masks::{compute_irm, MaskKind};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn items() -> Vec<SweepItem> {
        let corpus = synth_corpus(&SynthConfig {
            seed: 3,
            n_train: 0,
            n_dev: 0,
            n_test: 2,
            duration_s: 0.5,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        corpus
            .test
            .iter()
            .map(|m| {
                let clean = magnitude(&stft(&m.clean).unwrap());
                let noise = magnitude(&stft(&m.noise).unwrap());
                let irm = compute_irm(&clean, &noise, 0.5).unwrap();
                // sigmoid-range probabilities, strictly inside (0, 1)
                let tbm = Array2::from_shape_fn(irm.dim(), |_| rng.random_range(0.01..0.99));
                SweepItem {
                    snr_db: m.snr_db,
                    noisy: m.noisy.clone(),
                    clean: m.clean.clone(),
                    irm_est: irm,
                    tbm_est: Mask::new(tbm, MaskKind::Soft).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn identities_hold_exactly() {
        let grid = SweepGrid {
            deltas: vec![0.0, 1e-9, 0.5, 1.0],
            gammas: vec![0.0, 0.5, 1.0],
            metric: Metric::SiSdr,
        };
        let r = sweep_fusion(&items(), &grid).unwrap();
        assert_eq!(r.cell_count(), 4 * 3 * 4);
        let irm = &r.baseline("IRM").unwrap().values;
        for d in 0..4 {
            assert_eq!(r.row(d, 2), &irm[..], "gamma=1 at delta index {d}");
        }
        for g in 0..3 {
            // delta at (or just above) zero never weakens a bin
            assert_eq!(r.row(0, g), &irm[..]);
            assert_eq!(r.row(1, g), &irm[..]);
        }
        // delta = 1 weakens every bin; gamma = 0 then silences the output
        assert!(r
            .row(3, 0)
            .iter()
            .all(|&v| v == -crate::evalkit::SI_SDR_CAP_DB));
        // uniformly scaling by gamma is invisible to a scale-invariant metric
        assert_eq!(r.row(3, 1), &irm[..]);
    }

    #[test]
    fn csv_and_tables() {
        let grid = SweepGrid {
            deltas: vec![0.5, 0.9],
            gammas: vec![0.5, 1.0],
            metric: Metric::SegSnr,
        };
        let r = sweep_fusion(&items(), &grid).unwrap();
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "delta,gamma,snr_db,metric,value");
        assert_eq!(lines.len(), 1 + 2 * 2 * 4);
        assert!(lines[1].starts_with("0.5,0.5,-5,seg-snr,"));
        let text = r.render_text(0.5, 0.5);
        let header = format!(
            "{:<8}{:>10}{:>10}{:>10}{:>10}{:>10}",
            "gamma", "-5dB", "0dB", "5dB", "10dB", "AVG"
        );
        assert!(text.lines().any(|l| l == header), "{text}");
        assert!(text.contains("delta=0.5"));
        assert!(text.contains("Noisy"));
        let avg = r.row_average(0, 1);
        assert!((avg - r.row(0, 1).iter().sum::<f64>() / 4.0).abs() < 1e-12);
        assert!(r.delta_marginal(0).is_finite() && r.gamma_marginal(1).is_finite());
    }

    #[test]
    fn invalid_grids() {
        let it = items();
        let bad = |deltas: Vec<f64>, gammas: Vec<f64>| {
            sweep_fusion(
                &it,
                &SweepGrid {
                    deltas,
                    gammas,
                    metric: Metric::SiSdr,
                },
            )
        };
        assert!(bad(vec![], vec![0.5]).is_err());
        assert!(bad(vec![0.5], vec![]).is_err());
        assert!(bad(vec![0.5, 0.2], vec![0.5]).is_err());
        assert!(bad(vec![1.5], vec![0.5]).is_err());
        assert!(sweep_fusion(&[], &SweepGrid::default()).is_err());
    }
}
