//! Model checkpoint: "MFNN", u32 version, config block (u32 input_bins,
//! u32 context, u32 hidden1, u32 hidden2, u64 seed), every layer's weights
//! (row-major) then bias as little-endian f64, then u32 bin count followed by
//! the feature means and standard deviations as f64.

use ndarray::Array1;

use super::{EstimatorConfig, EstimatorParams, FeatureStats, TrainedModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MFNN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_checkpoint(model: &TrainedModel) -> Vec<u8> {
    let cfg = model.params.config();
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for v in [cfg.input_bins, cfg.context, cfg.hidden1, cfg.hidden2] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend_from_slice(&cfg.seed.to_le_bytes());
    for v in model.params.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(model.stats.bins() as u32).to_le_bytes());
    for v in model.stats.mean().iter().chain(model.stats.std().iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let slice = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::format(self.pos, format!("truncated while reading {what}")))?;
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let start = self.pos;
        let raw = self.take(n * 8, what)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(
                start + 8 * i,
                format!("non-finite value in {what}"),
            ));
        }
        Ok(values)
    }
}

pub fn read_checkpoint(bytes: &[u8]) -> Result<TrainedModel> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4, "magic")? != CHECKPOINT_MAGIC {
        return Err(Error::format(0, "missing MFNN magic"));
    }
    let version = r.u32("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let config_at = r.pos;
    let config = EstimatorConfig {
        input_bins: r.u32("input_bins")? as usize,
        context: r.u32("context")? as usize,
        hidden1: r.u32("hidden1")? as usize,
        hidden2: r.u32("hidden2")? as usize,
        seed: r.u64("seed")?,
    };
    config
        .validate()
        .map_err(|e| Error::format(config_at, e.to_string()))?;
    let values = r.f64s(config.param_count(), "layer weights")?;
    let bins_at = r.pos;
    let bins = r.u32("stats bin count")? as usize;
    if bins != config.input_bins {
        return Err(Error::format(
            bins_at,
            format!("stats cover {bins} bins, network has {}", config.input_bins),
        ));
    }
    let mean = r.f64s(bins, "feature means")?;
    let std = r.f64s(bins, "feature deviations")?;
    if r.pos != bytes.len() {
        return Err(Error::format(r.pos, "trailing bytes after checkpoint"));
    }
    let stats = FeatureStats::new(Array1::from(mean), Array1::from(std))
        .map_err(|e| Error::format(bins_at, e.to_string()))?;
    Ok(TrainedModel {
        params: EstimatorParams::from_values(config, values),
        stats,
    })
}
