//! Binary mask dump: "MFMK", u32 version, u32 frames, u32 bins, u8 kind
//! (0 soft, 1 binary), then frames·bins little-endian f32, frame-major.

use std::fmt::Write as _;

use ndarray::Array2;

use super::{Mask, MaskKind};
use crate::error::{Error, Result};

pub const MASK_DUMP_MAGIC: &[u8; 4] = b"MFMK";
pub const MASK_DUMP_VERSION: u32 = 1;

const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 1;

pub fn write_mask_dump(mask: &Mask) -> Vec<u8> {
    let (frames, bins) = mask.dim();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * frames * bins);
    out.extend_from_slice(MASK_DUMP_MAGIC);
    out.extend_from_slice(&MASK_DUMP_VERSION.to_le_bytes());
    out.extend_from_slice(&(frames as u32).to_le_bytes());
    out.extend_from_slice(&(bins as u32).to_le_bytes());
    out.push(match mask.kind() {
        MaskKind::Soft => 0,
        MaskKind::Binary => 1,
    });
    for &v in mask.data().iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(offset, "truncated header"))
}

pub fn read_mask_dump(bytes: &[u8]) -> Result<Mask> {
    if bytes.len() < 4 || &bytes[..4] != MASK_DUMP_MAGIC {
        return Err(Error::format(0, "missing MFMK magic"));
    }
    let version = read_u32(bytes, 4)?;
    if version != MASK_DUMP_VERSION {
        return Err(Error::format(
            4,
            format!("unsupported mask dump version {version}"),
        ));
    }
    let frames = read_u32(bytes, 8)? as usize;
    let bins = read_u32(bytes, 12)? as usize;
    let kind = match bytes.get(16) {
        Some(0) => MaskKind::Soft,
        Some(1) => MaskKind::Binary,
        Some(k) => return Err(Error::format(16, format!("unknown mask kind {k}"))),
        None => return Err(Error::format(16, "truncated header")),
    };
    let expected = frames
        .checked_mul(bins)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::format(8, "mask dimensions overflow"))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::format(
            HEADER_LEN + payload.len().min(expected),
            format!("expected {expected} payload bytes, found {}", payload.len()),
        ));
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let data = Array2::from_shape_vec((frames, bins), values)
        .map_err(|e| Error::format(HEADER_LEN, e.to_string()))?;
    Mask::new(data, kind).map_err(|e| Error::format(HEADER_LEN, e.to_string()))
}

/// One frame per line, comma separated, six decimals.
pub fn mask_to_csv(mask: &Mask) -> String {
    let mut out = String::new();
    for row in mask.data().rows() {
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            write!(out, "{v:.6}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn header_layout() {
        let m = Mask::new(array![[0.0, 1.0, 1.0]], MaskKind::Binary).unwrap();
        let bytes = write_mask_dump(&m);
        assert_eq!(&bytes[..4], b"MFMK");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[1, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(bytes[16], 1);
        assert_eq!(&bytes[21..25], &1.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 17 + 12);
        assert_eq!(read_mask_dump(&bytes).unwrap(), m);
    }

    #[test]
    fn soft_round_trip_at_f32_precision() {
        let m = Mask::new(array![[0.1, 0.25], [0.7, 0.999]], MaskKind::Soft).unwrap();
        let back = read_mask_dump(&write_mask_dump(&m)).unwrap();
        assert_eq!(back.kind(), MaskKind::Soft);
        for (a, b) in back.data().iter().zip(m.data()) {
            assert!((a - b).abs() < 1e-7);
        }
    }

    #[test]
    fn corrupt_inputs_report_offsets() {
        let m = Mask::new(array![[0.5]], MaskKind::Soft).unwrap();
        let good = write_mask_dump(&m);
        assert!(matches!(
            read_mask_dump(b"XXXX"),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad_kind = good.clone();
        bad_kind[16] = 9;
        assert!(matches!(
            read_mask_dump(&bad_kind),
            Err(Error::Format { offset: 16, .. })
        ));
        assert!(matches!(
            read_mask_dump(&good[..good.len() - 1]),
            Err(Error::Format { offset: 20, .. })
        ));
        let mut bad_version = good;
        bad_version[4] = 2;
        assert!(matches!(
            read_mask_dump(&bad_version),
            Err(Error::Format { offset: 4, .. })
        ));
    }

    #[test]
    fn csv_rows() {
        let m = Mask::new(array![[0.5, 1.0], [0.0, 0.1234567]], MaskKind::Soft).unwrap();
        assert_eq!(mask_to_csv(&m), "0.500000,1.000000\n0.000000,0.123457\n");
    }
}
