//! Side-by-side comparison of run metrics against published reference
//! scores (`report --compare table2`).

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::experiment::MetricsFile;
use super::search::Task;
use crate::dataset::Variant;

/// Informational target band for classification metrics.
pub const TARGET_BAND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReferenceRow {
    pub dataset: &'static str,
    pub model: &'static str,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub rmse: Option<f64>,
}

const fn row(
    dataset: &'static str,
    model: &'static str,
    v: [f64; 4],
    rmse: Option<f64>,
) -> ReferenceRow {
    ReferenceRow {
        dataset,
        model,
        accuracy: v[0],
        precision: v[1],
        recall: v[2],
        f1: v[3],
        rmse,
    }
}

/// Average 10-fold CV scores, macro-averaged over Non-AD / AD.
pub const REFERENCE_SCORES: [ReferenceRow; 22] = [
    row("PAR", "GBDT", [0.82, 0.84, 0.82, 0.81], Some(5.93)),
    row("PAR", "SVM", [0.86, 0.90, 0.83, 0.86], Some(6.57)),
    row("PAR", "DistilBERT", [0.87, 0.90, 0.87, 0.87], Some(4.49)),
    row("PAR", "DistilRoBERTa", [0.84, 0.86, 0.85, 0.82], Some(5.12)),
    row("PAR", "BERT(base)", [0.84, 0.86, 0.85, 0.82], Some(5.12)),
    row("PAR", "RoBERTa(base)", [0.75, 0.79, 0.72, 0.74], Some(7.11)),
    row("PAR", "BERT(large)", [0.77, 0.80, 0.77, 0.76], Some(6.64)),
    row(
        "PAR",
        "RoBERTa(large)",
        [0.77, 0.81, 0.73, 0.76],
        Some(7.13),
    ),
    row("PAR+INV", "GBDT", [0.79, 0.80, 0.82, 0.79], Some(5.60)),
    row("PAR+INV", "SVM", [0.88, 0.92, 0.87, 0.87], Some(6.74)),
    row(
        "PAR+INV",
        "DistilBERT",
        [0.87, 0.89, 0.89, 0.88],
        Some(4.85),
    ),
    row(
        "PAR+INV",
        "DistilRoBERTa",
        [0.80, 0.87, 0.79, 0.78],
        Some(7.11),
    ),
    row(
        "PAR+INV",
        "BERT(base)",
        [0.75, 0.76, 0.78, 0.74],
        Some(7.13),
    ),
    row(
        "PAR+INV",
        "RoBERTa(base)",
        [0.72, 0.71, 0.71, 0.69],
        Some(5.45),
    ),
    row(
        "PAR+INV",
        "BERT(large)",
        [0.75, 0.78, 0.73, 0.74],
        Some(7.13),
    ),
    row(
        "PAR+INV",
        "RoBERTa(large)",
        [0.81, 0.88, 0.76, 0.79],
        Some(6.64),
    ),
    row("PAR_SPLT", "SVM+CRF", [0.88, 0.88, 0.88, 0.87], None),
    row("PAR_SPLT", "GBDT+CRF", [0.80, 0.84, 0.74, 0.78], None),
    row("PAR_SPLT+T", "SVM+CRF", [0.89, 0.87, 0.90, 0.88], None),
    row("PAR_SPLT+T", "GBDT+CRF", [0.82, 0.84, 0.79, 0.81], None),
    row("PAR_SPLT+T+D", "SVM+CRF", [0.86, 0.85, 0.87, 0.86], None),
    row("PAR_SPLT+T+D", "GBDT+CRF", [0.83, 0.86, 0.79, 0.81], None),
];

pub fn dataset_label(v: Variant) -> &'static str {
    match v {
        Variant::Par => "PAR",
        Variant::ParInv => "PAR+INV",
        Variant::ParTime => "PAR_TIME",
        Variant::ParSplt => "PAR_SPLT",
        Variant::ParSpltT => "PAR_SPLT+T",
        Variant::ParSpltTD => "PAR_SPLT+T+D",
    }
}

/// Reference row name for a run's model: the learner for text models, the
/// embedding checkpoint for linear heads.
pub fn model_label(m: &MetricsFile) -> String {
    use super::pipelines::ModelKind as K;
    match m.model {
        K::Svm => "SVM".into(),
        K::Gbdt => "GBDT".into(),
        K::SvmCrf => "SVM+CRF".into(),
        K::GbdtCrf => "GBDT+CRF".into(),
        K::EmbedLogistic | K::EmbedLasso => {
            checkpoint_label(m.embedding_model.as_deref().unwrap_or(""))
        }
    }
}

pub fn checkpoint_label(name: &str) -> String {
    let n = name.to_ascii_lowercase();
    let large = n.contains("large");
    let label = if n.contains("distilroberta") {
        "DistilRoBERTa"
    } else if n.contains("distilbert") {
        "DistilBERT"
    } else if n.contains("roberta") {
        if large {
            "RoBERTa(large)"
        } else {
            "RoBERTa(base)"
        }
    } else if n.contains("bert") {
        if large {
            "BERT(large)"
        } else {
            "BERT(base)"
        }
    } else {
        return name.to_string();
    };
    label.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonLine {
    pub dataset: String,
    pub model: String,
    pub metric: &'static str,
    pub ours: Option<f64>,
    pub reference: Option<f64>,
    pub delta: Option<f64>,
    /// `|delta| <= TARGET_BAND`; only judged for classification metrics.
    pub within_target: Option<bool>,
}

/// Merges classification and regression runs per (dataset, model) and lines
/// them up against the reference rows.
pub fn compare_reference(runs: &[MetricsFile]) -> Vec<ComparisonLine> {
    let mut merged: BTreeMap<(String, String), [Option<f64>; 5]> = BTreeMap::new();
    for m in runs {
        let key = (dataset_label(m.variant).to_string(), model_label(m));
        let slot = merged.entry(key).or_insert([None; 5]);
        let s = &m.mean;
        match m.task {
            Task::Classify => {
                slot[0] = s.accuracy;
                slot[1] = s.precision;
                slot[2] = s.recall;
                slot[3] = s.f1;
            }
            Task::Regress => slot[4] = s.rmse,
        }
    }
    let mut out = Vec::new();
    for ((dataset, model), ours) in merged {
        let reference = REFERENCE_SCORES
            .iter()
            .find(|r| r.dataset == dataset && r.model == model);
        let refs = reference.map(|r| {
            [
                Some(r.accuracy),
                Some(r.precision),
                Some(r.recall),
                Some(r.f1),
                r.rmse,
            ]
        });
        for (i, metric) in ["accuracy", "precision", "recall", "f1", "rmse"]
            .into_iter()
            .enumerate()
        {
            let o = ours[i];
            let r = refs.and_then(|v| v[i]);
            if o.is_none() && r.is_none() {
                continue;
            }
            let delta = o.zip(r).map(|(a, b)| a - b);
            out.push(ComparisonLine {
                dataset: dataset.clone(),
                model: model.clone(),
                metric,
                ours: o,
                reference: r,
                delta,
                within_target: if metric == "rmse" {
                    None
                } else {
                    delta.map(|d| d.abs() <= TARGET_BAND + 1e-12)
                },
            });
        }
    }
    out
}

fn cell(v: Option<f64>, prec: usize) -> String {
    v.map_or("-".into(), |x| format!("{x:.prec$}"))
}

pub fn render_comparison(lines: &[ComparisonLine]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<14} {:<16} {:<10} {:>8} {:>8} {:>8}  {}",
        "dataset", "model", "metric", "ours", "ref", "delta", "target(+-0.05)"
    );
    for l in lines {
        let flag = match l.within_target {
            Some(true) => "ok",
            Some(false) => "off",
            None => "",
        };
        let _ = writeln!(
            s,
            "{:<14} {:<16} {:<10} {:>8} {:>8} {:>8}  {}",
            l.dataset,
            l.model,
            l.metric,
            cell(l.ours, 3),
            cell(l.reference, 2),
            l.delta.map_or("-".into(), |d| format!("{d:+.3}")),
            flag
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_names() {
        assert_eq!(checkpoint_label("distilbert-base-uncased"), "DistilBERT");
        assert_eq!(checkpoint_label("distilroberta-base"), "DistilRoBERTa");
        assert_eq!(checkpoint_label("roberta-large"), "RoBERTa(large)");
        assert_eq!(checkpoint_label("bert-base-uncased"), "BERT(base)");
        assert_eq!(checkpoint_label("my-model"), "my-model");
    }

    #[test]
    fn every_reference_dataset_maps_to_a_variant() {
        for r in REFERENCE_SCORES {
            assert!(Variant::ALL.iter().any(|&v| dataset_label(v) == r.dataset));
        }
    }
}
