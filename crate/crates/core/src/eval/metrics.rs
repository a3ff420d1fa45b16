use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::labels::BinaryLabel;

/// Binary confusion counts (positive = `Incorrect`) plus the three error
/// tallies: compile error, timeout, runtime error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub ce: u64,
    pub to: u64,
    pub re: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64, ce: u64, to: u64, re: u64) -> Self {
        Self { tp, tn, fp, fn_, ce, to, re }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn errors(&self) -> u64 {
        self.ce + self.to + self.re
    }

    pub fn record(&mut self, predicted: BinaryLabel, truth: BinaryLabel) {
        use BinaryLabel::*;
        match (predicted, truth) {
            (Incorrect, Incorrect) => self.tp += 1,
            (Correct, Correct) => self.tn += 1,
            (Incorrect, Correct) => self.fp += 1,
            (Correct, Incorrect) => self.fn_ += 1,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.tn += o.tn;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ce += o.ce;
        self.to += o.to;
        self.re += o.re;
    }
}

pub fn confusion(preds: &[BinaryLabel], truth: &[BinaryLabel], errors: (u64, u64, u64)) -> Result<ConfusionCounts, EvalError> {
    if preds.len() != truth.len() {
        return Err(EvalError::LengthMismatch { predictions: preds.len(), truth: truth.len() });
    }
    let mut c = ConfusionCounts { ce: errors.0, to: errors.1, re: errors.2, ..Default::default() };
    for (&p, &t) in preds.iter().zip(truth) {
        c.record(p, t);
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpecificityFormula {
    /// TN / (TN + FP)
    #[default]
    Standard,
    /// 1 - TN / (TN + FP), as printed in the metric table.
    PaperLiteral,
}

/// Metric values; `None` (JSON `null`) marks a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    pub coverage: Option<f64>,
    pub conclusiveness: Option<f64>,
    pub specificity: Option<f64>,
    pub overall_accuracy: Option<f64>,
    pub specificity_formula: SpecificityFormula,
    pub counts: ConfusionCounts,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn metrics(c: &ConfusionCounts) -> MetricsReport {
    metrics_with(c, SpecificityFormula::Standard)
}

pub fn metrics_with(c: &ConfusionCounts, formula: SpecificityFormula) -> MetricsReport {
    let recall = ratio(c.tp, c.tp + c.fn_);
    let precision = ratio(c.tp, c.tp + c.fp);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        _ => None,
    };
    let all = c.total() + c.errors();
    let tnr = ratio(c.tn, c.tn + c.fp);
    MetricsReport {
        recall,
        precision,
        f1,
        accuracy: ratio(c.tp + c.tn, c.total()),
        coverage: ratio(c.ce, all).map(|x| 1.0 - x),
        conclusiveness: ratio(c.errors(), all).map(|x| 1.0 - x),
        specificity: match formula {
            SpecificityFormula::Standard => tnr,
            SpecificityFormula::PaperLiteral => tnr.map(|x| 1.0 - x),
        },
        overall_accuracy: ratio(c.tp + c.tn, all),
        specificity_formula: formula,
        counts: *c,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use BinaryLabel::*;

    #[test]
    fn all_right_and_all_inverted() {
        let truth = [Incorrect, Incorrect, Incorrect, Correct, Correct];
        assert_eq!(confusion(&truth, &truth, (0, 0, 0)).unwrap(), ConfusionCounts::new(3, 2, 0, 0, 0, 0, 0));
        let inv: Vec<_> = truth.iter().map(|&t| if t == Correct { Incorrect } else { Correct }).collect();
        assert_eq!(confusion(&inv, &truth, (1, 2, 3)).unwrap(), ConfusionCounts::new(0, 0, 2, 3, 1, 2, 3));
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&[Correct], &[], (0, 0, 0)), Err(EvalError::LengthMismatch { .. })));
    }

    #[test]
    fn zero_counts_are_all_undefined() {
        let m = metrics(&ConfusionCounts::default());
        assert_eq!(
            [m.recall, m.precision, m.f1, m.accuracy, m.coverage, m.conclusiveness, m.specificity, m.overall_accuracy],
            [None; 8]
        );
        let json = serde_json::to_value(m).unwrap();
        assert!(json["recall"].is_null());
    }

    #[test]
    fn literal_specificity_is_the_complement() {
        let c = ConfusionCounts::new(1, 3, 1, 0, 0, 0, 0);
        assert_eq!(metrics(&c).specificity, Some(0.75));
        assert_eq!(metrics_with(&c, SpecificityFormula::PaperLiteral).specificity, Some(0.25));
    }

    #[test]
    fn f1_undefined_when_no_true_positives() {
        let c = ConfusionCounts::new(0, 1, 1, 1, 0, 0, 0);
        let m = metrics(&c);
        assert_eq!((m.precision, m.recall), (Some(0.0), Some(0.0)));
        assert_eq!(m.f1, None);
    }
}
