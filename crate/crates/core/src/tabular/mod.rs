//! Decision-tree backend: CART over embedding rows, GA coordinate selection,
//! and the serialized model.

mod ga;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::{normalize, Normalization, NormalizationStrategy, NormalizeError};
use crate::folds::stratified_folds;
use crate::labels::ClassLabel;

pub use ga::{ga_select, ga_select_logged, write_ga_log, FeatureSubset, GaConfig, GenerationStats};
pub use tree::{predict_tree, train_tree, DecisionTree, TreeNode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TabularError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("row width {got} does not match {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels and {ids} ids")]
    LengthMismatch { rows: usize, labels: usize, ids: usize },
    #[error("row label is not in the label space")]
    UnknownLabel,
    #[error("feature index {index} out of range for width {width}")]
    FeatureOutOfRange { index: usize, width: usize },
    #[error("invalid GA config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Normalize(#[from] NormalizeError),
}

/// Rows with labels and stable ids; ids order the stratified folds so that
/// results do not depend on row order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledVectors {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<ClassLabel>,
    pub ids: Vec<String>,
    pub label_space: Vec<ClassLabel>,
}

impl LabeledVectors {
    /// Ids default to the zero-padded row index; label space is sorted.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<ClassLabel>) -> Result<Self, TabularError> {
        let ids = (0..rows.len()).map(|i| format!("{i:08}")).collect();
        Self::with_ids(rows, labels, ids)
    }

    pub fn with_ids(rows: Vec<Vec<f64>>, labels: Vec<ClassLabel>, ids: Vec<String>) -> Result<Self, TabularError> {
        let mut space = labels.clone();
        space.sort();
        space.dedup();
        Self::with_label_space(rows, labels, ids, space)
    }

    pub fn with_label_space(
        rows: Vec<Vec<f64>>,
        labels: Vec<ClassLabel>,
        ids: Vec<String>,
        label_space: Vec<ClassLabel>,
    ) -> Result<Self, TabularError> {
        if rows.len() != labels.len() || rows.len() != ids.len() {
            return Err(TabularError::LengthMismatch { rows: rows.len(), labels: labels.len(), ids: ids.len() });
        }
        if let Some(w) = rows.first().map(Vec::len) {
            if let Some(r) = rows.iter().find(|r| r.len() != w) {
                return Err(TabularError::WidthMismatch { expected: w, got: r.len() });
            }
        }
        if labels.iter().any(|l| !label_space.contains(l)) {
            return Err(TabularError::UnknownLabel);
        }
        Ok(Self { rows, labels, ids, label_space })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// The given rows, keeping the label space.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            label_space: self.label_space.clone(),
        }
    }

    /// Keeps only the given coordinates, in the given order.
    pub fn restrict(&self, features: &[usize]) -> Result<Self, TabularError> {
        let width = self.width();
        if let Some(&index) = features.iter().find(|&&f| f >= width) {
            return Err(TabularError::FeatureOutOfRange { index, width });
        }
        Ok(Self { rows: self.rows.iter().map(|r| project(r, features)).collect(), ..self.clone() })
    }
}

fn project(row: &[f64], features: &[usize]) -> Vec<f64> {
    features.iter().map(|&f| row[f]).collect()
}

/// Mean accuracy of a tree over an inner stratified `min(5, n)`-fold split of
/// `data` restricted to `features`. A single row scores by resubstitution.
pub fn fitness(features: &[usize], data: &LabeledVectors, seed: u64) -> Result<f64, TabularError> {
    if data.is_empty() {
        return Err(TabularError::EmptyDataset);
    }
    let sub = data.restrict(features)?;
    let n = sub.len();
    if n < 2 {
        let t = train_tree(&sub)?;
        return Ok(if t.predict(&sub.rows[0])? == &sub.labels[0] { 1.0 } else { 0.0 });
    }
    let keys: Vec<(&ClassLabel, &str)> = sub.labels.iter().zip(&sub.ids).map(|(l, i)| (l, i.as_str())).collect();
    let folds = stratified_folds(&keys, n.min(5), seed);
    let mut in_fold = vec![0; n];
    for (k, f) in folds.iter().enumerate() {
        for &i in f {
            in_fold[i] = k;
        }
    }
    let mut total = 0.0;
    for (k, fold) in folds.iter().enumerate() {
        let train: Vec<usize> = (0..n).filter(|&i| in_fold[i] != k).collect();
        let tree = train_tree(&sub.select_rows(&train))?;
        let mut hits = 0;
        for &i in fold {
            if tree.predict(&sub.rows[i])? == &sub.labels[i] {
                hits += 1;
            }
        }
        total += hits as f64 / fold.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

/// Everything needed to classify a raw embedding row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularModel {
    pub tree: DecisionTree,
    pub feature_subset: Option<FeatureSubset>,
    pub label_space: Vec<ClassLabel>,
    pub normalization: NormalizationStrategy,
    pub seed: u64,
}

/// Training options for [`fit_model`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TabularOptions {
    pub normalization: Normalization,
    pub ga: Option<GaConfig>,
}

impl TabularModel {
    /// Normalizes with the fitted strategy, projects onto the subset, predicts.
    pub fn predict(&self, raw: &[f64]) -> Result<ClassLabel, TabularError> {
        self.explain(raw).map(|(l, _)| l)
    }

    /// Prediction plus the class counts of the reached leaf.
    pub fn explain(&self, raw: &[f64]) -> Result<(ClassLabel, Vec<usize>), TabularError> {
        let row = normalize(&[raw.to_vec()], &self.normalization)?.remove(0);
        let row = match &self.feature_subset {
            Some(s) => {
                if let Some(&index) = s.indices.iter().find(|&&f| f >= row.len()) {
                    return Err(TabularError::FeatureOutOfRange { index, width: row.len() });
                }
                project(&row, &s.indices)
            }
            None => row,
        };
        let (label, counts) = self.tree.leaf(&row)?;
        Ok((label.clone(), counts.to_vec()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }
}

/// Fits normalization, optional GA selection and the tree on `train` only.
/// Returns the model and the GA log (empty without GA).
pub fn fit_model(train: &LabeledVectors, opts: &TabularOptions, seed: u64) -> Result<(TabularModel, Vec<GenerationStats>), TabularError> {
    if train.is_empty() {
        return Err(TabularError::EmptyDataset);
    }
    let strategy = opts.normalization.fit(&train.rows);
    let normed = LabeledVectors { rows: normalize(&train.rows, &strategy)?, ..train.clone() };
    let (subset, log) = match &opts.ga {
        Some(cfg) => {
            let (s, log) = ga_select_logged(&normed, cfg)?;
            (Some(s), log)
        }
        None => (None, Vec::new()),
    };
    let data = match &subset {
        Some(s) => normed.restrict(&s.indices)?,
        None => normed,
    };
    let tree = train_tree(&data)?;
    let model = TabularModel { tree, feature_subset: subset, label_space: train.label_space.clone(), normalization: strategy, seed };
    Ok((model, log))
}
