//! Binary container formats.
//!
//! All three containers share one discipline: a 4-byte magic, a `u32le`
//! header length, a UTF-8 JSON header, then raw payload bytes in the order
//! the header declares. Payload arrays are C-order with the last axis
//! fastest.
//!
//! * `PVL1` — paired volumes and anomaly maps ([`pvl`])
//! * `CKP1` — named model parameters ([`ckpt`])
//! * `TOK1` — encoded latent token grids ([`tok`])

pub mod ckpt;
pub mod pvl;
pub mod tok;

use crate::error::{CoreError, Result};
use std::io::{Read, Write};

pub(crate) fn write_container(
    w: &mut impl Write,
    magic: &[u8; 4],
    header_json: &[u8],
    path: &str,
) -> Result<()> {
    w.write_all(magic).map_err(|e| CoreError::io(path, e))?;
    let len = u32::try_from(header_json.len())
        .map_err(|_| CoreError::format(path, "header length exceeds u32"))?;
    w.write_all(&len.to_le_bytes())
        .map_err(|e| CoreError::io(path, e))?;
    w.write_all(header_json).map_err(|e| CoreError::io(path, e))
}

pub(crate) fn read_header(r: &mut impl Read, magic: &[u8; 4], path: &str) -> Result<Vec<u8>> {
    let mut got = [0u8; 4];
    r.read_exact(&mut got)
        .map_err(|_| CoreError::format(path, "file too short for magic bytes"))?;
    if &got != magic {
        return Err(CoreError::format(
            path,
            format!(
                "bad magic: expected {:?}, found {:?}",
                String::from_utf8_lossy(magic),
                String::from_utf8_lossy(&got)
            ),
        ));
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes)
        .map_err(|_| CoreError::format(path, "file too short for header length"))?;
    let len = u32::from_le_bytes(len_bytes) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header)
        .map_err(|_| CoreError::format(path, "header truncated (header length field)"))?;
    Ok(header)
}

pub(crate) fn read_f32_payload(r: &mut impl Read, count: usize, path: &str, field: &str) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; count * 4];
    r.read_exact(&mut bytes).map_err(|_| {
        CoreError::format(
            path,
            format!("payload for {field} shorter than header-declared shape"),
        )
    })?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn write_f32_payload(w: &mut impl Write, values: &[f32], path: &str) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&bytes).map_err(|e| CoreError::io(path, e))
}

pub(crate) fn expect_eof(r: &mut impl Read, path: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe) {
        Ok(0) => Ok(()),
        Ok(_) => Err(CoreError::format(
            path,
            "payload longer than header-declared shape",
        )),
        Err(e) => Err(CoreError::io(path, e)),
    }
}
