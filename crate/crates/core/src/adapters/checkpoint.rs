//! Binary GPart checkpoint: the seed that regenerates the partition plus `θ`.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "GPRT"
//!      4     4  version u32 = 1
//!      8     1  mode u8 (0 = isometric, 1 = non-isometric)
//!      9     7  zero padding
//!     16     8  seed u64
//!     24     8  dim u64 (d)
//!     32     8  total u64 (N)
//!     40  8*d   theta, f64 each
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::partition::PartitionMap;
use crate::weightspace::ModelManifest;

use super::{GPartAdapter, GPartMode};

pub const MAGIC: &[u8; 4] = b"GPRT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;

pub fn encode_checkpoint(adapter: &GPartAdapter) -> Vec<u8> {
    let pm = adapter.partition();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * pm.dim());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(adapter.mode().code());
    out.extend_from_slice(&[0u8; 7]);
    out.extend_from_slice(&pm.seed().to_le_bytes());
    out.extend_from_slice(&(pm.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(pm.total() as u64).to_le_bytes());
    for t in adapter.theta().iter() {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

fn truncated(len: usize, needed: usize) -> Error {
    Error::Format {
        offset: len,
        msg: format!("file truncated: {len} bytes, need at least {needed}"),
    }
}

fn read_u64(bytes: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"))
}

/// Parses a checkpoint and regenerates its partition.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<GPartAdapter> {
    let len = bytes.len();
    if len < 4 {
        return Err(truncated(len, HEADER_LEN));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: format!("bad magic {:?}", &bytes[..4]),
        });
    }
    if len < 8 {
        return Err(truncated(len, HEADER_LEN));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4-byte slice"));
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    if len < HEADER_LEN {
        return Err(truncated(len, HEADER_LEN));
    }
    let mode = GPartMode::from_code(bytes[8]).ok_or_else(|| Error::Format {
        offset: 8,
        msg: format!("unknown mode byte {}", bytes[8]),
    })?;
    if let Some(pos) = bytes[9..16].iter().position(|&b| b != 0) {
        return Err(Error::Format {
            offset: 9 + pos,
            msg: "nonzero padding".into(),
        });
    }
    let seed = read_u64(bytes, 16);
    let dim = read_u64(bytes, 24);
    let total = read_u64(bytes, 32);
    if dim == 0 || dim > total {
        return Err(Error::Format {
            offset: 24,
            msg: format!("dim {dim} must satisfy 1 <= dim <= total {total}"),
        });
    }
    let expected = usize::try_from(dim)
        .ok()
        .and_then(|d| d.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::Format {
            offset: 24,
            msg: format!("dim {dim} too large"),
        })?;
    if len < expected {
        return Err(truncated(len, expected));
    }
    if len > expected {
        return Err(Error::Format {
            offset: expected,
            msg: format!("{} trailing bytes", len - expected),
        });
    }
    let total = usize::try_from(total).map_err(|_| Error::Format {
        offset: 32,
        msg: format!("total {total} does not fit in memory"),
    })?;
    let theta: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let pm = PartitionMap::build(seed, total, dim as usize)?;
    GPartAdapter::with_theta(pm, theta.into(), mode)
}

pub fn save_checkpoint(adapter: &GPartAdapter, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(adapter)).map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint and checks its `N` against `manifest`.
pub fn load_checkpoint(path: impl AsRef<Path>, manifest: &ModelManifest) -> Result<GPartAdapter> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let adapter = decode_checkpoint(&bytes)?;
    if adapter.partition().total() != manifest.total() {
        return Err(Error::Compatibility(format!(
            "checkpoint covers N={} weights but the manifest has N={}",
            adapter.partition().total(),
            manifest.total()
        )));
    }
    Ok(adapter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adapters::Adapter;
    use crate::weightspace::build_manifest;

    fn example() -> GPartAdapter {
        let pm = PartitionMap::build(7, 100, 3).unwrap();
        GPartAdapter::with_theta(pm, vec![0.5, -1.25, 2.0].into(), GPartMode::Isometric).unwrap()
    }

    #[test]
    fn example_file_layout() {
        let bytes = encode_checkpoint(&example());
        assert_eq!(bytes.len(), 64);
        let mut expected = Vec::new();
        expected.extend_from_slice(b"GPRT");
        expected.extend_from_slice(&[1, 0, 0, 0]);
        expected.extend_from_slice(&[0; 8]);
        expected.extend_from_slice(&[7, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[3, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[100, 0, 0, 0, 0, 0, 0, 0]);
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xE0, 0x3F]); // 0.5
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0xF4, 0xBF]); // -1.25
        expected.extend_from_slice(&[0, 0, 0, 0, 0, 0, 0x00, 0x40]); // 2.0
        assert_eq!(bytes, expected);
    }

    #[test]
    fn roundtrip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.gprt");
        let a = example();
        save_checkpoint(&a, &path).unwrap();
        let manifest = build_manifest(&[(10, 10)]).unwrap();
        let b = load_checkpoint(&path, &manifest).unwrap();
        assert_eq!(a, b);
        let w0: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        assert_eq!(a.merge(&w0).unwrap(), b.merge(&w0).unwrap());
    }

    #[test]
    fn manifest_mismatch_is_compatibility_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.gprt");
        save_checkpoint(&example(), &path).unwrap();
        let manifest = build_manifest(&[(9, 10)]).unwrap();
        assert!(matches!(
            load_checkpoint(&path, &manifest),
            Err(Error::Compatibility(_))
        ));
    }

    #[test]
    fn malformed_inputs_report_offsets() {
        let good = encode_checkpoint(&example());
        let offset = |bytes: &[u8]| match decode_checkpoint(bytes) {
            Err(Error::Format { offset, .. }) => offset,
            other => panic!("expected format error, got {other:?}"),
        };

        assert_eq!(offset(&good[..63]), 63);
        assert_eq!(offset(&good[..20]), 20);
        assert_eq!(offset(&[]), 0);

        let mut bad = good.clone();
        bad[1] = b'X';
        assert_eq!(offset(&bad), 0);

        let mut bad = good.clone();
        bad[4] = 2;
        assert_eq!(offset(&bad), 4);

        let mut bad = good.clone();
        bad[8] = 9;
        assert_eq!(offset(&bad), 8);

        let mut bad = good.clone();
        bad[12] = 1;
        assert_eq!(offset(&bad), 12);

        let mut bad = good.clone();
        bad[24] = 0;
        assert_eq!(offset(&bad), 24);

        let mut bad = good.clone();
        bad.push(0);
        assert_eq!(offset(&bad), 64);
    }
}
