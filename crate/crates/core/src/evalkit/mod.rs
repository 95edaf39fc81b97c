//! Synthetic corpus, SNR mixing, metrics and the fusion sweep.

mod manifest;
mod metrics;
mod mix;
mod sweep;
mod synth;

pub use manifest::{ManifestKind, ManifestRecord, MANIFEST_HEADER};
pub use metrics::{
    log_spectral_distance, segmental_snr, segmental_snr_with, si_sdr, Metric, LSD_MAG_FLOOR,
    SEG_SNR_MAX_DB, SEG_SNR_MIN_DB, SEG_SNR_SILENCE, SI_SDR_CAP_DB,
};
pub use mix::{fit_noise, mix_at_snr, noise_gain, snr_db, MixSpec};
pub use sweep::{
    default_levels, sweep_fusion, BaselineRow, SweepGrid, SweepItem, SweepReport,
    TBM_BASELINE_THRESHOLD,
};
pub use synth::{
    synth_corpus, synth_noise, synth_speech, Corpus, Mixture, NoiseKind, Split, SynthConfig,
};
