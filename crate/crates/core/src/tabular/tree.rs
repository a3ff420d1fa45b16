use serde::{Deserialize, Serialize};

use super::{LabeledVectors, TabularError};
use crate::labels::ClassLabel;

/// Gini-score comparisons treat differences below this as ties.
const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { label: ClassLabel, class_counts: Vec<usize> },
}

/// CART classifier; node 0 is the root, children are numbered in preorder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub width: usize,
    pub label_space: Vec<ClassLabel>,
    pub nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> Result<&ClassLabel, TabularError> {
        self.leaf(row).map(|(label, _)| label)
    }

    /// Label and training class counts of the leaf `row` falls into.
    pub fn leaf(&self, row: &[f64]) -> Result<(&ClassLabel, &[usize]), TabularError> {
        if row.len() != self.width {
            return Err(TabularError::WidthMismatch { expected: self.width, got: row.len() });
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { label, class_counts } => return Ok((label, class_counts)),
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &DecisionTree, at: usize) -> usize {
            match &t.nodes[at] {
                TreeNode::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }
}

pub fn train_tree(data: &LabeledVectors) -> Result<DecisionTree, TabularError> {
    if data.is_empty() || data.label_space.is_empty() {
        return Err(TabularError::EmptyDataset);
    }
    let y: Vec<usize> = data
        .labels
        .iter()
        .map(|l| data.label_space.iter().position(|s| s == l).ok_or(TabularError::UnknownLabel))
        .collect::<Result<_, _>>()?;
    let mut b = Builder { rows: &data.rows, y: &y, k: data.label_space.len(), space: &data.label_space, nodes: Vec::new() };
    let all: Vec<usize> = (0..data.len()).collect();
    b.grow(all);
    Ok(DecisionTree { width: data.width(), label_space: data.label_space.clone(), nodes: b.nodes })
}

pub fn predict_tree<'a>(tree: &'a DecisionTree, row: &[f64]) -> Result<&'a ClassLabel, TabularError> {
    tree.predict(row)
}

struct Builder<'a> {
    rows: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    space: &'a [ClassLabel],
    nodes: Vec<TreeNode>,
}

/// `n * gini` of a node with the given class counts.
fn weighted_gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    n as f64 - sq / n as f64
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a / 2.0 + b / 2.0;
    if m >= b || !m.is_finite() {
        a
    } else {
        m
    }
}

impl Builder<'_> {
    fn grow(&mut self, samples: Vec<usize>) -> usize {
        let mut counts = vec![0; self.k];
        for &i in &samples {
            counts[self.y[i]] += 1;
        }
        let at = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let split = if pure || samples.len() < 2 { None } else { self.best_split(&samples, &counts) };
        match split {
            None => {
                // earliest label in label_space wins ties
                let mut best = 0;
                for (j, &c) in counts.iter().enumerate() {
                    if c > counts[best] {
                        best = j;
                    }
                }
                self.nodes.push(TreeNode::Leaf { label: self.space[best].clone(), class_counts: counts });
            }
            Some((feature, threshold)) => {
                self.nodes.push(TreeNode::Split { feature, threshold, left: 0, right: 0 });
                let (l, r): (Vec<usize>, Vec<usize>) = samples.into_iter().partition(|&i| self.rows[i][feature] <= threshold);
                let left = self.grow(l);
                let right = self.grow(r);
                self.nodes[at] = TreeNode::Split { feature, threshold, left, right };
            }
        }
        at
    }

    fn best_split(&self, samples: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = samples.len();
        let width = self.rows[samples[0]].len();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = samples.to_vec();
        let mut left = vec![0; self.k];
        let mut right = vec![0; self.k];
        for f in 0..width {
            order.sort_by(|&a, &b| self.rows[a][f].total_cmp(&self.rows[b][f]));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            for pos in 0..n - 1 {
                let c = self.y[order[pos]];
                left[c] += 1;
                right[c] -= 1;
                let (a, b) = (self.rows[order[pos]][f], self.rows[order[pos + 1]][f]);
                if a >= b {
                    continue;
                }
                let score = weighted_gini(&left, pos + 1) + weighted_gini(&right, n - pos - 1);
                // scanning features and thresholds in ascending order, so only
                // a strict improvement may displace the incumbent
                if best.map_or(true, |(s, _, _)| score < s - TIE_EPS) {
                    best = Some((score, f, midpoint(a, b)));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}
