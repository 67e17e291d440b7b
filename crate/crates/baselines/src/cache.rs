//! Feature matrices on disk: `<name>.f32` holds the rows back to back as
//! little-endian `f32`; `<name>.json` describes shape, origin, selected
//! columns and the normalization fitted on training rows.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{BaselineError, Result};
use crate::normalize::MinMax;
use crate::Provenance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub provenance: Provenance,
    pub rows: usize,
    pub cols: usize,
    pub labels: Vec<usize>,
    pub selected: Option<Vec<usize>>,
    pub normalization: Option<MinMax>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f32"), stem.with_extension("json"))
}

pub fn write_features(stem: &Path, meta: &CacheMeta, rows: &[Vec<f64>]) -> Result<()> {
    if rows.len() != meta.rows || rows.iter().any(|r| r.len() != meta.cols) {
        return Err(BaselineError::Shape(format!("rows do not match {}x{}", meta.rows, meta.cols)));
    }
    let (data, side) = paths(stem);
    let mut bytes = Vec::with_capacity(4 * meta.rows * meta.cols);
    for v in rows.iter().flatten() {
        bytes.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(&data, bytes).map_err(|e| BaselineError::io(&data, e))?;
    let json = serde_json::to_vec_pretty(meta).expect("metadata serializes");
    fs::write(&side, json).map_err(|e| BaselineError::io(&side, e))
}

pub fn read_features(stem: &Path) -> Result<(CacheMeta, Vec<Vec<f64>>)> {
    let (data, side) = paths(stem);
    let json = fs::read(&side).map_err(|e| BaselineError::io(&side, e))?;
    let meta: CacheMeta =
        serde_json::from_slice(&json).map_err(|e| BaselineError::Cache { path: side.clone(), msg: e.to_string() })?;
    let bytes = fs::read(&data).map_err(|e| BaselineError::io(&data, e))?;
    if bytes.len() != 4 * meta.rows * meta.cols {
        return Err(BaselineError::Cache {
            path: data,
            msg: format!("{} bytes for {}x{} floats", bytes.len(), meta.rows, meta.cols),
        });
    }
    let values: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    let rows = if meta.cols == 0 { vec![Vec::new(); meta.rows] } else { values.chunks(meta.cols).map(<[f64]>::to_vec).collect() };
    Ok((meta, rows))
}
