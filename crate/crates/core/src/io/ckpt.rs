//! `CKP1` parameter checkpoint container.
//!
//! JSON header lists named parameter shapes in payload order plus an
//! optional model-specific `meta` object; payloads are concatenated f32le.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ndarray::ArrayD;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{expect_eof, read_f32_payload, read_header, write_container, write_f32_payload};
use crate::error::{CoreError, Result};

pub const MAGIC: &[u8; 4] = b"CKP1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CkptHeader {
    pub version: u32,
    pub params: Vec<ParamEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<Value>,
}

/// Ordered named parameters of one model.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    pub entries: Vec<(String, ArrayD<f32>)>,
}

impl ParamSet {
    pub fn push(&mut self, name: impl Into<String>, value: ArrayD<f32>) {
        self.entries.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<&ArrayD<f32>> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn save(params: &ParamSet, meta: Option<Value>, path: &Path) -> Result<()> {
    let path_str = path.display().to_string();
    let header = CkptHeader {
        version: VERSION,
        params: params
            .entries
            .iter()
            .map(|(name, v)| ParamEntry {
                name: name.clone(),
                shape: v.shape().to_vec(),
            })
            .collect(),
        meta,
    };
    let file = File::create(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut w = BufWriter::new(file);
    let header_json = serde_json::to_vec(&header)?;
    write_container(&mut w, MAGIC, &header_json, &path_str)?;
    for (_, v) in &params.entries {
        let owned;
        let slice = match v.as_slice() {
            Some(s) => s,
            None => {
                owned = v.iter().copied().collect::<Vec<f32>>();
                &owned
            }
        };
        write_f32_payload(&mut w, slice, &path_str)?;
    }
    w.flush().map_err(|e| CoreError::io(&path_str, e))
}

pub fn load(path: &Path) -> Result<(ParamSet, Option<Value>)> {
    let path_str = path.display().to_string();
    let file = File::open(path).map_err(|e| CoreError::io(&path_str, e))?;
    let mut r = BufReader::new(file);
    let header_bytes = read_header(&mut r, MAGIC, &path_str)?;
    let header: CkptHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| CoreError::format(&path_str, format!("header json: {e}")))?;
    if header.version != VERSION {
        return Err(CoreError::format(
            &path_str,
            format!("unsupported version: {} (expected {VERSION})", header.version),
        ));
    }
    let mut set = ParamSet::default();
    for entry in &header.params {
        let count: usize = entry.shape.iter().product();
        let data = read_f32_payload(&mut r, count, &path_str, &entry.name)?;
        let arr = ArrayD::from_shape_vec(entry.shape.clone(), data)
            .map_err(|_| CoreError::format(&path_str, format!("shape for {}", entry.name)))?;
        set.push(entry.name.clone(), arr);
    }
    expect_eof(&mut r, &path_str)?;
    Ok((set, header.meta))
}
