//! `PVL1` volume container.
//!
//! Layout: magic `PVL1`, u32le header length, JSON header
//! `{version, shape, channels, dtypes, spacing_mm, id, seed}`, then raw
//! channel payloads in declared order (`f32le` or `u8`), C-order with the
//! last axis fastest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{expect_eof, read_f32_payload, read_header, write_container, write_f32_payload};
use crate::error::{CoreError, Result};
use crate::phantoms::PairedVolume;
use crate::{MaskVolume, Volume};

pub const MAGIC: &[u8; 4] = b"PVL1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PvlHeader {
    pub version: u32,
    pub shape: [usize; 3],
    pub channels: Vec<String>,
    pub dtypes: Vec<String>,
    pub spacing_mm: [f32; 3],
    pub id: String,
    pub seed: u64,
}

fn total(shape: [usize; 3]) -> usize {
    shape[0] * shape[1] * shape[2]
}

fn check_header(h: &PvlHeader, path: &str) -> Result<()> {
    if h.version != VERSION {
        return Err(CoreError::format(
            path,
            format!("unsupported version: {} (expected {VERSION})", h.version),
        ));
    }
    if h.channels.len() != h.dtypes.len() {
        return Err(CoreError::format(
            path,
            format!(
                "channels/dtypes length mismatch: {} vs {}",
                h.channels.len(),
                h.dtypes.len()
            ),
        ));
    }
    if h.shape.iter().any(|&d| d == 0) {
        return Err(CoreError::format(path, "shape has a zero axis"));
    }
    Ok(())
}

fn write_pvl(
    path: &Path,
    header: &PvlHeader,
    f32_channels: &[&Volume],
    u8_channels: &[&MaskVolume],
) -> Result<()> {
    let path_str = path.display().to_string();
    let file = File::create(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut w = BufWriter::new(file);
    let header_json = serde_json::to_vec(header)?;
    write_container(&mut w, MAGIC, &header_json, &path_str)?;
    for ch in f32_channels {
        let slice = ch.as_slice().expect("volume is standard layout");
        write_f32_payload(&mut w, slice, &path_str)?;
    }
    for ch in u8_channels {
        let slice = ch.as_slice().expect("mask is standard layout");
        w.write_all(slice).map_err(|e| CoreError::io(&path_str, e))?;
    }
    w.flush().map_err(|e| CoreError::io(&path_str, e))
}

/// Write a paired volume as channels `["pet","ct","mask"]`.
pub fn write_volume(v: &PairedVolume, path: &Path) -> Result<()> {
    let (d, h, w) = v.pet.dim();
    let header = PvlHeader {
        version: VERSION,
        shape: [d, h, w],
        channels: vec!["pet".into(), "ct".into(), "mask".into()],
        dtypes: vec!["f32le".into(), "f32le".into(), "u8".into()],
        spacing_mm: v.spacing_mm,
        id: v.id.clone(),
        seed: v.seed,
    };
    write_pvl(path, &header, &[&v.pet, &v.ct], &[&v.mask])
}

/// Read a paired volume written by [`write_volume`].
pub fn read_volume(path: &Path) -> Result<PairedVolume> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut r = BufReader::new(file);
    let header_bytes = read_header(&mut r, MAGIC, &path_str)?;
    let header: PvlHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| CoreError::format(&path_str, format!("header json: {e}")))?;
    check_header(&header, &path_str)?;
    let expected = ["pet", "ct", "mask"];
    if header.channels != expected {
        return Err(CoreError::format(
            &path_str,
            format!("channels: expected {expected:?}, found {:?}", header.channels),
        ));
    }
    let expected_dt = ["f32le", "f32le", "u8"];
    if header.dtypes != expected_dt {
        return Err(CoreError::format(
            &path_str,
            format!("dtypes: expected {expected_dt:?}, found {:?}", header.dtypes),
        ));
    }
    let n = total(header.shape);
    let shape = (header.shape[0], header.shape[1], header.shape[2]);
    let pet = read_f32_payload(&mut r, n, &path_str, "pet")?;
    let ct = read_f32_payload(&mut r, n, &path_str, "ct")?;
    let mut mask = vec![0u8; n];
    r.read_exact(&mut mask).map_err(|_| {
        CoreError::format(&path_str, "payload for mask shorter than header-declared shape")
    })?;
    expect_eof(&mut r, &path_str)?;
    Ok(PairedVolume {
        pet: Array3::from_shape_vec(shape, pet).expect("shape matches payload"),
        ct: Array3::from_shape_vec(shape, ct).expect("shape matches payload"),
        mask: Array3::from_shape_vec(shape, mask).expect("shape matches payload"),
        id: header.id,
        seed: header.seed,
        spacing_mm: header.spacing_mm,
    })
}

/// Write a single-channel map (channel name e.g. "anomaly").
pub fn write_map(map: &Volume, channel: &str, id: &str, seed: u64, path: &Path) -> Result<()> {
    let (d, h, w) = map.dim();
    let header = PvlHeader {
        version: VERSION,
        shape: [d, h, w],
        channels: vec![channel.to_string()],
        dtypes: vec!["f32le".into()],
        spacing_mm: [1.0, 1.0, 1.0],
        id: id.to_string(),
        seed,
    };
    write_pvl(path, &header, &[map], &[])
}

/// Read a single-channel map, returning the channel name as well.
pub fn read_map(path: &Path) -> Result<(Volume, String, String)> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut r = BufReader::new(file);
    let header_bytes = read_header(&mut r, MAGIC, &path_str)?;
    let header: PvlHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| CoreError::format(&path_str, format!("header json: {e}")))?;
    check_header(&header, &path_str)?;
    if header.channels.len() != 1 || header.dtypes[0] != "f32le" {
        return Err(CoreError::format(
            &path_str,
            format!("expected a single f32le channel, found {:?}", header.channels),
        ));
    }
    let n = total(header.shape);
    let shape = (header.shape[0], header.shape[1], header.shape[2]);
    let data = read_f32_payload(&mut r, n, &path_str, &header.channels[0])?;
    expect_eof(&mut r, &path_str)?;
    Ok((
        Array3::from_shape_vec(shape, data).expect("shape matches payload"),
        header.channels[0].clone(),
        header.id,
    ))
}
