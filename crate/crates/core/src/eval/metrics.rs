//! Confusion counts, macro-averaged classification metrics and RMSE.

use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub const MMSE_RANGE: (f64, f64) = (0.0, 30.0);

/// AD is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn from_labels(pred: &[Label], gold: &[Label]) -> Result<Self> {
        if pred.len() != gold.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} predictions vs {} labels",
                pred.len(),
                gold.len()
            )));
        }
        let mut cm = ConfusionMatrix::default();
        for (p, g) in pred.iter().zip(gold) {
            match (p, g) {
                (Label::AD, Label::AD) => cm.tp += 1,
                (Label::AD, Label::Control) => cm.fp += 1,
                (Label::Control, Label::AD) => cm.fn_ += 1,
                (Label::Control, Label::Control) => cm.tn += 1,
            }
        }
        Ok(cm)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub ad: ClassMetrics,
    pub non_ad: ClassMetrics,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// Quantities whose denominator was zero and were reported as 0.
    pub undefined: Vec<String>,
}

fn ratio(num: usize, den: usize, name: &str, undefined: &mut Vec<String>) -> f64 {
    if den == 0 {
        undefined.push(name.to_string());
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(
    tp: usize,
    fp: usize,
    fn_: usize,
    class: &str,
    undefined: &mut Vec<String>,
) -> ClassMetrics {
    let precision = ratio(tp, tp + fp, &format!("{class}.precision"), undefined);
    let recall = ratio(tp, tp + fn_, &format!("{class}.recall"), undefined);
    let f1 = if precision + recall == 0.0 {
        undefined.push(format!("{class}.f1"));
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> ClassificationReport {
    let mut undefined = Vec::new();
    let ad = class_metrics(cm.tp, cm.fp, cm.fn_, "ad", &mut undefined);
    let non_ad = class_metrics(cm.tn, cm.fn_, cm.fp, "non_ad", &mut undefined);
    let accuracy = ratio(cm.tp + cm.tn, cm.total(), "accuracy", &mut undefined);
    ClassificationReport {
        confusion: *cm,
        accuracy,
        ad,
        non_ad,
        macro_precision: 0.5 * (ad.precision + non_ad.precision),
        macro_recall: 0.5 * (ad.recall + non_ad.recall),
        macro_f1: 0.5 * (ad.f1 + non_ad.f1),
        undefined,
    }
}

pub fn rmse(preds: &[f64], golds: &[f64]) -> Result<f64> {
    if preds.len() != golds.len() || preds.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} targets",
            preds.len(),
            golds.len()
        )));
    }
    let sse: f64 = preds
        .iter()
        .zip(golds)
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok((sse / preds.len() as f64).sqrt())
}

pub fn clamp_mmse(v: f64) -> f64 {
    v.clamp(MMSE_RANGE.0, MMSE_RANGE.1)
}
