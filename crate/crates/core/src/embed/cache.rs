//! CSV embedding cache with a JSON sidecar (`<file>.meta.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{EmbedConfig, EmbeddingVector, Normalization};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheMeta {
    pub seed: u64,
    pub dim: usize,
    pub weights: super::Weights,
    pub normalization: Normalization,
}

impl CacheMeta {
    pub fn new(cfg: &EmbedConfig, dim: usize, normalization: Normalization) -> Self {
        Self { seed: cfg.seed, dim, weights: cfg.weights, normalization }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("row {row}: {message}")]
    Format { row: usize, message: String },
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes `sample_id,v0,...` rows; 17 significant digits make the text
/// round-trip bit-exactly.
pub fn write_cache(path: &Path, vectors: &[EmbeddingVector], meta: &CacheMeta) -> Result<(), CacheError> {
    let width = vectors.first().map_or(meta.dim, |v| v.values.len());
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["sample_id".to_string()];
    header.extend((0..width).map(|i| format!("v{i}")));
    w.write_record(&header)?;
    for v in vectors {
        let mut rec = Vec::with_capacity(width + 1);
        rec.push(v.source_id.clone());
        rec.extend(v.values.iter().map(|x| format!("{x:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    std::fs::write(sidecar(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<(Vec<EmbeddingVector>, CacheMeta), CacheError> {
    let meta: CacheMeta = serde_json::from_str(&std::fs::read_to_string(sidecar(path))?)?;
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len().saturating_sub(1);
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let values = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CacheError::Format { row, message: e.to_string() })?;
        if values.len() != width {
            return Err(CacheError::Format { row, message: format!("expected {width} values, found {}", values.len()) });
        }
        out.push(EmbeddingVector { values, source_id: rec[0].to_string(), warning: None });
    }
    Ok((out, meta))
}
