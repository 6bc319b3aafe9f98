//! Weight payload: raw little-endian f32 blobs plus a text manifest
//! carrying ids, shapes, byte offsets, and a checksum of the blob file.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::NdiffError;

pub const PAYLOAD_VERSION: &str = "v1";
pub const PAYLOAD_BIN: &str = "weights.bin";
pub const PAYLOAD_MANIFEST: &str = "weights.manifest";

#[derive(Clone, Debug, PartialEq)]
pub struct PayloadEntry {
    pub id: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

fn shape_str(shape: &[usize]) -> String {
    shape
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x")
}

fn parse_shape(s: &str) -> Option<Vec<usize>> {
    s.split('x').map(|d| d.parse().ok()).collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{:02x}", b)).collect()
}

/// Write `weights.bin` and `weights.manifest` under `dir`.
pub fn save_payload(dir: &Path, entries: &[PayloadEntry]) -> Result<(), NdiffError> {
    fs::create_dir_all(dir)?;
    let mut bin = Vec::new();
    let mut lines = format!("ndiff-payload {}\n", PAYLOAD_VERSION);
    for e in entries {
        debug_assert!(!e.id.contains(char::is_whitespace));
        let numel: usize = e.shape.iter().product();
        assert_eq!(numel, e.data.len(), "payload entry {} shape mismatch", e.id);
        let offset = bin.len();
        for v in &e.data {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        lines.push_str(&format!(
            "tensor {} {} {} {}\n",
            e.id,
            shape_str(&e.shape),
            offset,
            e.data.len() * 4
        ));
    }
    let digest = hex(&Sha256::digest(&bin));
    lines.push_str(&format!("sha256 {}\n", digest));

    fs::File::create(dir.join(PAYLOAD_BIN))?.write_all(&bin)?;
    fs::File::create(dir.join(PAYLOAD_MANIFEST))?.write_all(lines.as_bytes())?;
    Ok(())
}

/// Read a payload back, verifying the checksum and every entry's bounds.
pub fn load_payload(dir: &Path) -> Result<Vec<PayloadEntry>, NdiffError> {
    let manifest = fs::read_to_string(dir.join(PAYLOAD_MANIFEST))?;
    let bin = fs::read(dir.join(PAYLOAD_BIN))?;

    let mut lines = manifest.lines();
    let header = lines
        .next()
        .ok_or_else(|| NdiffError::CorruptPayload("empty manifest".into()))?;
    match header.strip_prefix("ndiff-payload ") {
        Some(v) if v == PAYLOAD_VERSION => {}
        Some(v) => {
            return Err(NdiffError::PayloadVersion {
                found: v.to_string(),
                expected: PAYLOAD_VERSION.to_string(),
            })
        }
        None => {
            return Err(NdiffError::CorruptPayload(format!(
                "bad header line: {:?}",
                header
            )))
        }
    }

    let mut entries = Vec::new();
    let mut saw_checksum = false;
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["tensor", id, shape, offset, bytes] => {
                if saw_checksum {
                    return Err(NdiffError::CorruptPayload(
                        "tensor entry after checksum line".into(),
                    ));
                }
                let shape = parse_shape(shape).ok_or_else(|| {
                    NdiffError::CorruptPayload(format!("bad shape for {}: {:?}", id, shape))
                })?;
                let offset: usize = offset.parse().map_err(|_| {
                    NdiffError::CorruptPayload(format!("bad offset for {}", id))
                })?;
                let bytes: usize = bytes.parse().map_err(|_| {
                    NdiffError::CorruptPayload(format!("bad byte count for {}", id))
                })?;
                let numel: usize = shape.iter().product();
                if bytes != numel * 4 {
                    return Err(NdiffError::CorruptPayload(format!(
                        "{}: {} bytes for shape {}",
                        id,
                        bytes,
                        shape_str(&shape)
                    )));
                }
                if offset + bytes > bin.len() {
                    return Err(NdiffError::CorruptPayload(format!(
                        "{}: entry [{}, {}) exceeds payload of {} bytes",
                        id,
                        offset,
                        offset + bytes,
                        bin.len()
                    )));
                }
                let data: Vec<f32> = bin[offset..offset + bytes]
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect();
                entries.push(PayloadEntry {
                    id: id.to_string(),
                    shape,
                    data,
                });
            }
            ["sha256", digest] => {
                let actual = hex(&Sha256::digest(&bin));
                if actual != *digest {
                    return Err(NdiffError::CorruptPayload(format!(
                        "checksum mismatch: manifest {} payload {}",
                        digest, actual
                    )));
                }
                saw_checksum = true;
            }
            _ => {
                return Err(NdiffError::CorruptPayload(format!(
                    "unrecognized manifest line: {:?}",
                    line
                )))
            }
        }
    }
    if !saw_checksum {
        return Err(NdiffError::CorruptPayload("missing checksum line".into()));
    }
    Ok(entries)
}
