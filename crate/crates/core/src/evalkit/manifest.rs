//! Line-delimited corpus manifest: `id,kind,path,snr_db,seed`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const MANIFEST_HEADER: &str = "id,kind,path,snr_db,seed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifestKind {
    Clean,
    Noise,
    Noisy,
}

impl ManifestKind {
    pub const ALL: [ManifestKind; 3] = [
        ManifestKind::Clean,
        ManifestKind::Noise,
        ManifestKind::Noisy,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ManifestKind::Clean => "clean",
            ManifestKind::Noise => "noise",
            ManifestKind::Noisy => "noisy",
        }
    }
}

impl fmt::Display for ManifestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ManifestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| Error::invalid(format!("unknown manifest kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub id: String,
    pub kind: ManifestKind,
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub snr_db: f64,
    pub seed: u64,
}

impl ManifestRecord {
    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.id, self.kind, self.path, self.snr_db, self.seed
        )
    }

    /// Parses one record; `line_no` is 1-based and only used in messages.
    pub fn parse(line: &str, line_no: usize) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if fields.len() != 5 {
            return Err(Error::invalid(format!(
                "manifest line {line_no}: expected 5 fields, found {}",
                fields.len()
            )));
        }
        let bad = |what: &str, v: &str| {
            Error::invalid(format!("manifest line {line_no}: bad {what} {v:?}"))
        };
        if fields[0].is_empty() {
            return Err(bad("id", fields[0]));
        }
        if fields[2].is_empty()
            || fields[2].starts_with('/')
            || fields[2].split('/').any(|p| p == "..")
        {
            return Err(bad("path", fields[2]));
        }
        let snr_db: f64 = fields[3].parse().map_err(|_| bad("snr_db", fields[3]))?;
        if !snr_db.is_finite() {
            return Err(bad("snr_db", fields[3]));
        }
        Ok(Self {
            id: fields[0].to_string(),
            kind: fields[1].parse().map_err(|_| bad("kind", fields[1]))?,
            path: fields[2].to_string(),
            snr_db,
            seed: fields[4].parse().map_err(|_| bad("seed", fields[4]))?,
        })
    }

    /// Renders a whole manifest, header first.
    pub fn render(records: &[ManifestRecord]) -> String {
        let mut out = format!("{MANIFEST_HEADER}\n");
        for r in records {
            out.push_str(&r.to_line());
            out.push('\n');
        }
        out
    }

    /// Parses a whole manifest; the header line is required.
    pub fn parse_all(text: &str) -> Result<Vec<ManifestRecord>> {
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim_end_matches('\r') == MANIFEST_HEADER => {}
            _ => {
                return Err(Error::invalid(format!(
                    "manifest must start with {MANIFEST_HEADER:?}"
                )))
            }
        }
        lines
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| Self::parse(l, i + 2))
            .collect()
    }
}
