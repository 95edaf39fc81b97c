//! On-disk corpus layout.
//!
//! ```text
//! <root>/manifest.csv
//! <root>/<split>/<id>_clean.wav
//! <root>/<split>/<id>_snr<snr>_noise_<kind>.wav
//! <root>/<split>/<id>_snr<snr>_noisy.wav
//! ```
//!
//! Every mixture contributes a clean, a noise and a noisy record. Test
//! utterances appear once per SNR and share their clean file.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use maskfusion::dsp::Waveform;
use maskfusion::evalkit::{Corpus, ManifestKind, ManifestRecord, Mixture, NoiseKind, Split};

use crate::error::{CliError, CliResult};
use crate::fsio;
use crate::wav::{read_wav, write_wav};

pub const MANIFEST_NAME: &str = "manifest.csv";

fn stem(m: &Mixture) -> String {
    format!("{}/{}_snr{}", m.split.id(), m.id, m.snr_db)
}

fn records(m: &Mixture) -> [ManifestRecord; 3] {
    let rec = |kind, path: String, seed| ManifestRecord {
        id: m.id.clone(),
        kind,
        path,
        snr_db: m.snr_db,
        seed,
    };
    [
        rec(
            ManifestKind::Clean,
            format!("{}/{}_clean.wav", m.split.id(), m.id),
            m.clean_seed,
        ),
        rec(
            ManifestKind::Noise,
            format!("{}_noise_{}.wav", stem(m), m.noise_kind.id()),
            m.noise_seed,
        ),
        rec(
            ManifestKind::Noisy,
            format!("{}_noisy.wav", stem(m)),
            m.noise_seed,
        ),
    ]
}

/// Writes every WAV and the manifest; returns the manifest records.
pub fn write_corpus(root: &Path, corpus: &Corpus) -> CliResult<Vec<ManifestRecord>> {
    for split in Split::ALL {
        fsio::create_dir(&root.join(split.id()))?;
    }
    let mut written = BTreeSet::new();
    let mut manifest = Vec::new();
    for m in corpus.all() {
        let recs = records(m);
        for (rec, wave) in recs.iter().zip([&m.clean, &m.noise, &m.noisy]) {
            if written.insert(rec.path.clone()) {
                write_wav(&root.join(&rec.path), wave)?;
            }
        }
        manifest.extend(recs);
    }
    fsio::write_atomic(
        &root.join(MANIFEST_NAME),
        ManifestRecord::render(&manifest).as_bytes(),
    )?;
    Ok(manifest)
}

fn data_err(msg: String) -> CliError {
    CliError::Data(msg)
}

fn split_of(rec: &ManifestRecord) -> CliResult<Split> {
    let dir = rec.path.split('/').next().unwrap_or_default();
    dir.parse().map_err(|_| {
        data_err(format!(
            "{}: {} is not under train/, dev/ or test/",
            MANIFEST_NAME, rec.path
        ))
    })
}

fn noise_kind_of(rec: &ManifestRecord) -> CliResult<NoiseKind> {
    rec.path
        .strip_suffix(".wav")
        .and_then(|p| p.rsplit('_').next())
        .and_then(|k| k.parse().ok())
        .ok_or_else(|| {
            data_err(format!(
                "{}: cannot tell the noise kind of {}",
                MANIFEST_NAME, rec.path
            ))
        })
}

/// Loads a corpus written by [`write_corpus`].
pub fn read_corpus(root: &Path) -> CliResult<Corpus> {
    let manifest_path = root.join(MANIFEST_NAME);
    let text = fsio::read_text(&manifest_path)?;
    let manifest =
        ManifestRecord::parse_all(&text).map_err(|e| CliError::from(e).in_file(&manifest_path))?;

    // group by mixture, keeping manifest order
    let mut order: Vec<(String, u64)> = Vec::new();
    let mut groups: HashMap<(String, u64), [Option<&ManifestRecord>; 3]> = HashMap::new();
    for rec in &manifest {
        let key = (rec.id.clone(), rec.snr_db.to_bits());
        let slot = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            [None; 3]
        });
        let i = ManifestKind::ALL
            .iter()
            .position(|k| *k == rec.kind)
            .unwrap();
        if slot[i].replace(rec).is_some() {
            return Err(data_err(format!(
                "{MANIFEST_NAME}: duplicate {} record for {} at {} dB",
                rec.kind, rec.id, rec.snr_db
            )));
        }
    }

    let mut cache: HashMap<String, Waveform> = HashMap::new();
    let mut load = |rec: &ManifestRecord| -> CliResult<Waveform> {
        if let Some(w) = cache.get(rec.path.as_str()) {
            return Ok(w.clone());
        }
        let w = read_wav(&root.join(&rec.path))?;
        cache.insert(rec.path.clone(), w.clone());
        Ok(w)
    };
    let mut corpus = Corpus {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
    };
    for key in &order {
        let [clean, noise, noisy] = groups[key];
        let (Some(clean), Some(noise), Some(noisy)) = (clean, noise, noisy) else {
            return Err(data_err(format!(
                "{MANIFEST_NAME}: mixture {} at {} dB lacks a clean, noise or noisy record",
                key.0,
                f64::from_bits(key.1)
            )));
        };
        let split = split_of(clean)?;
        let m = Mixture {
            id: clean.id.clone(),
            split,
            clean: load(clean)?,
            noise: load(noise)?,
            noisy: load(noisy)?,
            noise_kind: noise_kind_of(noise)?,
            snr_db: clean.snr_db,
            clean_seed: clean.seed,
            noise_seed: noise.seed,
        };
        if m.clean.len() != m.noise.len() || m.clean.len() != m.noisy.len() {
            return Err(data_err(format!(
                "mixture {} at {} dB has mismatched lengths",
                m.id, m.snr_db
            )));
        }
        match split {
            Split::Train => corpus.train.push(m),
            Split::Dev => corpus.dev.push(m),
            Split::Test => corpus.test.push(m),
        }
    }
    Ok(corpus)
}
