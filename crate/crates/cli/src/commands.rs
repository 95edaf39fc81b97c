//! The subcommands, callable in-process. Each validates its paths before doing
//! any work and writes outputs atomically.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use maskfusion::dsp::{magnitude, stft, Waveform};
use maskfusion::estimator::{predict_masks, read_checkpoint, train, write_checkpoint, TrainLog};
use maskfusion::evalkit::{
    fit_noise, log_spectral_distance, mix_at_snr, segmental_snr, si_sdr, sweep_fusion,
    synth_corpus, SweepItem, SweepReport,
};
use maskfusion::masks::{
    compute_irm, compute_tbm, enhance_spectrogram, fuse_masks, write_mask_dump, Mask,
    DEFAULT_IRM_BETA,
};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::corpus_io::{read_corpus, write_corpus, MANIFEST_NAME};
use crate::error::{CliError, CliResult};
use crate::fsio;
use crate::wav::{read_wav, write_wav};

/// Writes the configured synthetic corpus under `out_dir`; returns the number
/// of mixtures written.
pub fn cmd_synth(cfg: &Config, out_dir: &Path) -> CliResult<usize> {
    if out_dir.is_file() {
        return Err(CliError::usage(format!(
            "{} is a file, expected a directory",
            out_dir.display()
        )));
    }
    let synth = cfg.synth_config();
    let corpus = synth_corpus(&synth).map_err(|e| CliError::usage(e.to_string()))?;
    fsio::create_dir(out_dir)?;
    write_corpus(out_dir, &corpus)?;
    Ok(corpus.all().count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMask {
    Irm,
    Tbm,
    Fuse,
}

impl FromStr for OracleMask {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "irm" => Ok(OracleMask::Irm),
            "tbm" => Ok(OracleMask::Tbm),
            "fuse" => Ok(OracleMask::Fuse),
            other => Err(format!("unknown mask {other:?}; expected irm, tbm or fuse")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quality {
    pub si_sdr: f64,
    pub seg_snr: f64,
    pub lsd: f64,
}

impl Quality {
    pub fn measure(est: &Waveform, reference: &Waveform) -> CliResult<Self> {
        Ok(Self {
            si_sdr: si_sdr(est, reference)?,
            seg_snr: segmental_snr(est, reference)?,
            lsd: log_spectral_distance(est, reference)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub before: Quality,
    pub after: Quality,
    pub enhanced: Waveform,
    pub mask: Mask,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (b, a) = (&self.before, &self.after);
        write!(
            f,
            "si-sdr {:.3} -> {:.3} dB, seg-snr {:.3} -> {:.3} dB, lsd {:.3} -> {:.3} dB",
            b.si_sdr, a.si_sdr, b.seg_snr, a.seg_snr, b.lsd, a.lsd
        )
    }
}

pub struct OracleArgs<'a> {
    pub clean: &'a Path,
    pub noise: &'a Path,
    pub snr_db: f64,
    pub mask: OracleMask,
    pub out: &'a Path,
    pub dump: Option<&'a Path>,
}

/// Mixes clean and noise, enhances with an oracle mask, and scores both sides.
/// Noise of a different length is cropped or looped using the configured seed.
pub fn cmd_oracle(cfg: &Config, args: &OracleArgs) -> CliResult<OracleReport> {
    fsio::require_file(args.clean)?;
    fsio::require_file(args.noise)?;
    fsio::require_output_dir(args.out)?;
    if let Some(d) = args.dump {
        fsio::require_output_dir(d)?;
    }
    if !args.snr_db.is_finite() {
        return Err(CliError::usage("--snr must be finite"));
    }
    let fusion = match args.mask {
        OracleMask::Fuse => Some(cfg.fusion()?),
        _ => None,
    };

    let clean = read_wav(args.clean)?;
    let noise = read_wav(args.noise)?;
    let noise = if noise.len() == clean.len() {
        noise
    } else {
        fit_noise(
            &noise,
            clean.len(),
            &mut ChaCha8Rng::seed_from_u64(cfg.seed),
        )?
    };
    let (noisy, scaled) = mix_at_snr(&clean, &noise, args.snr_db)?;
    let spec = stft(&noisy)?;
    let clean_mag = magnitude(&stft(&clean)?);
    let irm = || compute_irm(&clean_mag, &magnitude(&stft(&scaled)?), DEFAULT_IRM_BETA);
    let mask = match args.mask {
        OracleMask::Irm => irm()?,
        OracleMask::Tbm => compute_tbm(&clean_mag)?,
        OracleMask::Fuse => fuse_masks(&irm()?, &compute_tbm(&clean_mag)?, fusion.unwrap())?,
    };
    let enhanced = enhance_spectrogram(&spec, &mask)?;
    let report = OracleReport {
        before: Quality::measure(&noisy, &clean)?,
        after: Quality::measure(&enhanced, &clean)?,
        enhanced,
        mask,
    };
    write_wav(args.out, &report.enhanced)?;
    if let Some(d) = args.dump {
        fsio::write_atomic(d, &write_mask_dump(&report.mask))?;
    }
    Ok(report)
}

/// Default log path: the checkpoint path with `.log` appended.
pub fn default_log_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".log");
    PathBuf::from(s)
}

pub fn cmd_train(
    cfg: &Config,
    corpus_dir: &Path,
    checkpoint: &Path,
    log: &Path,
) -> CliResult<TrainLog> {
    fsio::require_file(&corpus_dir.join(MANIFEST_NAME))?;
    fsio::require_output_dir(checkpoint)?;
    fsio::require_output_dir(log)?;
    let net = cfg.estimator_config()?;
    let t = cfg.train_config()?;
    let corpus = read_corpus(corpus_dir)?;
    let outcome = train(&corpus.train, &corpus.dev, &net, &t)?;
    fsio::write_atomic(checkpoint, &write_checkpoint(&outcome.model))?;
    fsio::write_atomic(log, outcome.log.to_text().as_bytes())?;
    Ok(outcome.log)
}

/// Optional mask dump destinations for `enhance`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaskDumps<'a> {
    pub irm: Option<&'a Path>,
    pub tbm: Option<&'a Path>,
    pub fused: Option<&'a Path>,
}

/// Predicts both masks, fuses them and writes the enhanced waveform.
pub fn cmd_enhance(
    cfg: &Config,
    noisy_path: &Path,
    checkpoint: &Path,
    out: &Path,
    dumps: MaskDumps,
) -> CliResult<Waveform> {
    fsio::require_file(noisy_path)?;
    fsio::require_file(checkpoint)?;
    fsio::require_output_dir(out)?;
    for d in [dumps.irm, dumps.tbm, dumps.fused].into_iter().flatten() {
        fsio::require_output_dir(d)?;
    }
    let fusion = cfg.fusion()?;
    let model = load_model(checkpoint)?;
    let noisy = read_wav(noisy_path)?;
    let (irm, tbm) = predict_masks(&model.params, &noisy, &model.stats)?;
    let fused = fuse_masks(&irm, &tbm, fusion)?;
    let enhanced = enhance_spectrogram(&stft(&noisy)?, &fused)?;
    write_wav(out, &enhanced)?;
    for (path, mask) in [(dumps.irm, &irm), (dumps.tbm, &tbm), (dumps.fused, &fused)] {
        if let Some(p) = path {
            fsio::write_atomic(p, &write_mask_dump(mask))?;
        }
    }
    Ok(enhanced)
}

fn load_model(checkpoint: &Path) -> CliResult<maskfusion::estimator::TrainedModel> {
    let bytes = fsio::read_bytes(checkpoint)?;
    read_checkpoint(&bytes).map_err(|e| CliError::from(e).in_file(checkpoint))
}

/// Where the sweep's masks come from.
#[derive(Debug, Clone, Copy)]
pub enum MaskOrigin<'a> {
    /// Oracle ratio mask with the oracle binary mask as 0/1 probabilities.
    Oracle,
    Checkpoint(&'a Path),
}

/// Sweeps the fusion grid over the test split; writes the CSV and the text tables.
pub fn cmd_sweep(
    cfg: &Config,
    corpus_dir: &Path,
    origin: MaskOrigin,
    csv_out: &Path,
    table_out: &Path,
) -> CliResult<SweepReport> {
    fsio::require_file(&corpus_dir.join(MANIFEST_NAME))?;
    if let MaskOrigin::Checkpoint(p) = origin {
        fsio::require_file(p)?;
    }
    fsio::require_output_dir(csv_out)?;
    fsio::require_output_dir(table_out)?;
    let grid = cfg.sweep_grid()?;
    let model = match origin {
        MaskOrigin::Checkpoint(p) => Some(load_model(p)?),
        MaskOrigin::Oracle => None,
    };
    let corpus = read_corpus(corpus_dir)?;
    if corpus.test.is_empty() {
        return Err(CliError::Data(format!(
            "{}: the test split is empty",
            corpus_dir.display()
        )));
    }
    let items = corpus
        .test
        .iter()
        .map(|m| {
            let (irm_est, tbm_est) = match &model {
                Some(model) => predict_masks(&model.params, &m.noisy, &model.stats)?,
                None => {
                    let clean = magnitude(&stft(&m.clean)?);
                    let noise = magnitude(&stft(&m.noise)?);
                    (
                        compute_irm(&clean, &noise, DEFAULT_IRM_BETA)?,
                        compute_tbm(&clean)?,
                    )
                }
            };
            Ok(SweepItem {
                snr_db: m.snr_db,
                noisy: m.noisy.clone(),
                clean: m.clean.clone(),
                irm_est,
                tbm_est,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let report = sweep_fusion(&items, &grid)?;
    fsio::write_atomic(csv_out, report.to_csv().as_bytes())?;
    fsio::write_atomic(
        table_out,
        report
            .render_text(cfg.table_delta, cfg.table_gamma)
            .as_bytes(),
    )?;
    Ok(report)
}
