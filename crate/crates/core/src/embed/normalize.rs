use serde::{Deserialize, Serialize};

/// Normalization mode as chosen on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    #[default]
    None,
    Vector,
    Index,
}

impl Normalization {
    /// Fits the strategy on training rows (only `Index` learns anything).
    pub fn fit(self, train: &[Vec<f64>]) -> NormalizationStrategy {
        match self {
            Normalization::None => NormalizationStrategy::None,
            Normalization::Vector => NormalizationStrategy::Vector,
            Normalization::Index => NormalizationStrategy::Index(IndexScaler::fit(train)),
        }
    }
}

/// Per-coordinate min-max scaler fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl IndexScaler {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let mut min = vec![f64::INFINITY; width];
        let mut max = vec![f64::NEG_INFINITY; width];
        for r in rows {
            for (j, &x) in r.iter().enumerate() {
                min[j] = min[j].min(x);
                max[j] = max[j].max(x);
            }
        }
        Self { min, max }
    }

    pub fn width(&self) -> usize {
        self.min.len()
    }

    fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &x)| {
                let range = self.max[j] - self.min[j];
                if range > 0.0 {
                    ((x - self.min[j]) / range).clamp(0.0, 1.0)
                } else {
                    0.0
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NormalizationStrategy {
    #[default]
    None,
    Vector,
    Index(IndexScaler),
}

impl NormalizationStrategy {
    pub fn mode(&self) -> Normalization {
        match self {
            NormalizationStrategy::None => Normalization::None,
            NormalizationStrategy::Vector => Normalization::Vector,
            NormalizationStrategy::Index(_) => Normalization::Index,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NormalizeError {
    #[error("index scaler fitted on width {fitted} applied to width {got}")]
    ScalerMismatch { fitted: usize, got: usize },
}

fn vector_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let denom = if max > 0.0 { max } else { row.iter().fold(0.0_f64, |m, x| m.max(x.abs())) };
    if denom == 0.0 {
        row.to_vec()
    } else {
        row.iter().map(|x| x / denom).collect()
    }
}

pub fn normalize(rows: &[Vec<f64>], strategy: &NormalizationStrategy) -> Result<Vec<Vec<f64>>, NormalizeError> {
    match strategy {
        NormalizationStrategy::None => Ok(rows.to_vec()),
        NormalizationStrategy::Vector => Ok(rows.iter().map(|r| vector_row(r)).collect()),
        NormalizationStrategy::Index(s) => rows
            .iter()
            .map(|r| {
                if r.len() != s.width() {
                    Err(NormalizeError::ScalerMismatch { fitted: s.width(), got: r.len() })
                } else {
                    Ok(s.apply(r))
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_divides_by_max() {
        let out = normalize(&[vec![2.0, 4.0, 8.0]], &NormalizationStrategy::Vector).unwrap();
        assert_eq!(out, vec![vec![0.25, 0.5, 1.0]]);
    }

    #[test]
    fn zero_row_unchanged() {
        let out = normalize(&[vec![0.0; 4]], &NormalizationStrategy::Vector).unwrap();
        assert_eq!(out, vec![vec![0.0; 4]]);
    }

    #[test]
    fn non_positive_row_uses_max_abs() {
        let out = normalize(&[vec![-2.0, -4.0, 0.0]], &NormalizationStrategy::Vector).unwrap();
        assert_eq!(out, vec![vec![-0.5, -1.0, 0.0]]);
    }

    #[test]
    fn index_fits_and_clamps() {
        let s = Normalization::Index.fit(&[vec![3.0], vec![7.0]]);
        assert_eq!(normalize(&[vec![5.0], vec![9.0], vec![1.0]], &s).unwrap(), vec![vec![0.5], vec![1.0], vec![0.0]]);
    }

    #[test]
    fn index_width_mismatch() {
        let s = Normalization::Index.fit(&[vec![1.0, 2.0]]);
        assert_eq!(normalize(&[vec![1.0]], &s), Err(NormalizeError::ScalerMismatch { fitted: 2, got: 1 }));
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = Normalization::Index.fit(&[vec![4.0], vec![4.0]]);
        assert_eq!(normalize(&[vec![4.0], vec![10.0]], &s).unwrap(), vec![vec![0.0], vec![0.0]]);
    }
}
