//! `TOK1` encoded-latent container: JSON header with grid shape and
//! vocabulary size, payload u16le token indices in raster order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{expect_eof, read_header, write_container};
use crate::anomaly::TokenSequence;
use crate::error::{CoreError, Result};

pub const MAGIC: &[u8; 4] = b"TOK1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TokHeader {
    pub version: u32,
    pub grid_shape: [usize; 3],
    pub vocab: usize,
    pub id: String,
}

pub fn save(seq: &TokenSequence, vocab: usize, id: &str, path: &Path) -> Result<()> {
    let path_str = path.display().to_string();
    if vocab > u16::MAX as usize + 1 {
        return Err(CoreError::Contract(format!(
            "vocabulary {vocab} exceeds u16 token storage"
        )));
    }
    let header = TokHeader {
        version: VERSION,
        grid_shape: [seq.grid_shape.0, seq.grid_shape.1, seq.grid_shape.2],
        vocab,
        id: id.to_string(),
    };
    let file = File::create(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut w = BufWriter::new(file);
    let header_json = serde_json::to_vec(&header)?;
    write_container(&mut w, MAGIC, &header_json, &path_str)?;
    let mut bytes = Vec::with_capacity(seq.tokens.len() * 2);
    for &t in &seq.tokens {
        bytes.extend_from_slice(&(t as u16).to_le_bytes());
    }
    w.write_all(&bytes).map_err(|e| CoreError::io(&path_str, e))?;
    w.flush().map_err(|e| CoreError::io(&path_str, e))
}

pub fn load(path: &Path) -> Result<(TokenSequence, usize, String)> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut r = BufReader::new(file);
    let header_bytes = read_header(&mut r, MAGIC, &path_str)?;
    let header: TokHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| CoreError::format(&path_str, format!("header json: {e}")))?;
    if header.version != VERSION {
        return Err(CoreError::format(
            &path_str,
            format!("unsupported version: {} (expected {VERSION})", header.version),
        ));
    }
    let [d, h, w] = header.grid_shape;
    let len = d * h * w;
    let mut bytes = vec![0u8; len * 2];
    r.read_exact(&mut bytes).map_err(|_| {
        CoreError::format(&path_str, "payload shorter than grid_shape declares")
    })?;
    expect_eof(&mut r, &path_str)?;
    let tokens: Vec<usize> = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]) as usize)
        .collect();
    if let Some(&bad) = tokens.iter().find(|&&t| t >= header.vocab) {
        return Err(CoreError::format(
            &path_str,
            format!("token {bad} out of range for vocab {}", header.vocab),
        ));
    }
    let seq = TokenSequence::new(tokens, (d, h, w))?;
    Ok((seq, header.vocab, header.id))
}
