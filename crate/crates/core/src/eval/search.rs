//! Cross-validation and grid search over any [`Pipeline`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::Fold;
use super::grid::Config;
use super::metrics::{classification_metrics, rmse, ConfusionMatrix};
use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Regress,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scoring {
    Accuracy,
    MacroF1,
    NegRmse,
}

impl Scoring {
    pub fn default_for(task: Task) -> Scoring {
        match task {
            Task::Classify => Scoring::Accuracy,
            Task::Regress => Scoring::NegRmse,
        }
    }
}

/// A trainable model over a fixed set of evaluation units. Classification
/// predictions are 0/1 (1 = AD); regression predictions are MMSE values
/// already clamped to the valid range.
pub trait Pipeline: Sync {
    type Model: Send + Sync;

    fn task(&self) -> Task;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Gold values, aligned with units: 0/1 labels or MMSE.
    fn targets(&self) -> &[f64];
    /// Called once before a batch of fits on the given training sets, so
    /// shared per-training-set work can be done up front.
    fn prepare(&self, _configs: &[Config], _train_sets: &[&[usize]]) {}
    fn fit(&self, config: &Config, train: &[usize]) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, rows: &[usize]) -> Result<Vec<f64>>;
}

fn to_labels(v: &[f64]) -> Vec<Label> {
    v.iter().map(|&x| Label::from_bool(x >= 0.5)).collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub rmse: Option<f64>,
}

impl Scores {
    pub fn compute(
        task: Task,
        preds: &[f64],
        golds: &[f64],
    ) -> Result<(Scores, Option<ConfusionMatrix>, Vec<String>)> {
        match task {
            Task::Classify => {
                let cm = ConfusionMatrix::from_labels(&to_labels(preds), &to_labels(golds))?;
                let r = classification_metrics(&cm);
                Ok((
                    Scores {
                        accuracy: Some(r.accuracy),
                        precision: Some(r.macro_precision),
                        recall: Some(r.macro_recall),
                        f1: Some(r.macro_f1),
                        rmse: None,
                    },
                    Some(cm),
                    r.undefined,
                ))
            }
            Task::Regress => Ok((
                Scores {
                    rmse: Some(rmse(preds, golds)?),
                    ..Scores::default()
                },
                None,
                Vec::new(),
            )),
        }
    }

    pub fn get(&self, scoring: Scoring) -> Option<f64> {
        match scoring {
            Scoring::Accuracy => self.accuracy,
            Scoring::MacroF1 => self.f1,
            Scoring::NegRmse => self.rmse.map(|r| -r),
        }
    }

    fn mean(all: &[&Scores]) -> Scores {
        let avg = |f: fn(&Scores) -> Option<f64>| -> Option<f64> {
            let v: Option<Vec<f64>> = all.iter().map(|s| f(s)).collect();
            v.filter(|v| !v.is_empty())
                .map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        Scores {
            accuracy: avg(|s| s.accuracy),
            precision: avg(|s| s.precision),
            recall: avg(|s| s.recall),
            f1: avg(|s| s.f1),
            rmse: avg(|s| s.rmse),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_valid: usize,
    pub scores: Scores,
    pub confusion: Option<ConfusionMatrix>,
    pub undefined: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub task: Task,
    pub folds: Vec<FoldResult>,
    pub mean: Scores,
    /// `(unit index, prediction)` for every validation row, in unit order.
    pub out_of_fold: Vec<(usize, f64)>,
}

pub fn cross_validate<P: Pipeline>(
    pipeline: &P,
    config: &Config,
    folds: &[Fold],
) -> Result<CvReport> {
    let golds = pipeline.targets();
    let sets: Vec<&[usize]> = folds.iter().map(|f| f.train.as_slice()).collect();
    pipeline.prepare(std::slice::from_ref(config), &sets);
    let per_fold: Vec<Result<(FoldResult, Vec<(usize, f64)>)>> = folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            let model = pipeline.fit(config, &f.train)?;
            let preds = pipeline.predict(&model, &f.valid)?;
            let g: Vec<f64> = f.valid.iter().map(|&r| golds[r]).collect();
            let (scores, confusion, undefined) = Scores::compute(pipeline.task(), &preds, &g)?;
            Ok((
                FoldResult {
                    fold: i,
                    n_train: f.train.len(),
                    n_valid: f.valid.len(),
                    scores,
                    confusion,
                    undefined,
                },
                f.valid.iter().copied().zip(preds).collect(),
            ))
        })
        .collect();
    let mut results = Vec::with_capacity(folds.len());
    let mut oof = Vec::new();
    for r in per_fold {
        let (fr, p) = r?;
        results.push(fr);
        oof.extend(p);
    }
    oof.sort_by_key(|(i, _)| *i);
    let mean = Scores::mean(&results.iter().map(|r| &r.scores).collect::<Vec<_>>());
    Ok(CvReport {
        task: pipeline.task(),
        folds: results,
        mean,
        out_of_fold: oof,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOutcome {
    pub index: usize,
    pub config: Config,
    pub mean_score: Option<f64>,
    pub fold_scores: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug)]
pub struct GridResult<M> {
    pub scoring: Scoring,
    /// Best first; failures last; equal scores keep config order.
    pub ranked: Vec<ConfigOutcome>,
    pub best_index: usize,
    pub best_config: Config,
    /// Best configuration refit on every row covered by the folds.
    pub best_model: M,
}

fn evaluate_config<P: Pipeline>(
    pipeline: &P,
    config: &Config,
    folds: &[Fold],
    scoring: Scoring,
) -> Result<Vec<f64>> {
    let golds = pipeline.targets();
    folds
        .iter()
        .map(|f| {
            let model = pipeline.fit(config, &f.train)?;
            let preds = pipeline.predict(&model, &f.valid)?;
            let g: Vec<f64> = f.valid.iter().map(|&r| golds[r]).collect();
            let (s, _, _) = Scores::compute(pipeline.task(), &preds, &g)?;
            s.get(scoring).filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Internal(format!("{scoring:?} unavailable for {:?}", pipeline.task()))
            })
        })
        .collect()
}

/// Scores every configuration on every fold, picks the best mean (earliest
/// config on ties) and refits it. Configurations that fail are recorded and
/// skipped; the search fails only if all of them do.
pub fn grid_search<P: Pipeline>(
    pipeline: &P,
    configs: &[Config],
    folds: &[Fold],
    scoring: Scoring,
) -> Result<GridResult<P::Model>> {
    if configs.is_empty() {
        return Err(Error::Config("empty search space".into()));
    }
    let mut all: Vec<usize> = folds
        .iter()
        .flat_map(|f| f.train.iter().chain(&f.valid).copied())
        .collect();
    all.sort_unstable();
    all.dedup();
    let sets: Vec<&[usize]> = folds.iter().map(|f| f.train.as_slice()).collect();
    pipeline.prepare(configs, &sets);

    let outcomes: Vec<ConfigOutcome> = configs
        .par_iter()
        .enumerate()
        .map(
            |(index, config)| match evaluate_config(pipeline, config, folds, scoring) {
                Ok(fold_scores) => ConfigOutcome {
                    index,
                    config: config.clone(),
                    mean_score: Some(
                        fold_scores.iter().sum::<f64>() / fold_scores.len().max(1) as f64,
                    ),
                    fold_scores,
                    error: None,
                },
                Err(e) => ConfigOutcome {
                    index,
                    config: config.clone(),
                    mean_score: None,
                    fold_scores: Vec::new(),
                    error: Some(e.to_string()),
                },
            },
        )
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for o in &outcomes {
        if let Some(s) = o.mean_score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((o.index, s));
            }
        }
    }
    let Some((best_index, _)) = best else {
        let first = outcomes[0].error.clone().unwrap_or_default();
        return Err(Error::Data(format!(
            "every configuration failed; first error: {first}"
        )));
    };
    for o in outcomes.iter().filter(|o| o.error.is_some()) {
        log::warn!(
            "config {} failed: {}",
            o.config,
            o.error.as_deref().unwrap_or("")
        );
    }

    let best_config = configs[best_index].clone();
    let best_model = pipeline.fit(&best_config, &all)?;

    let mut ranked = outcomes;
    ranked.sort_by(|a, b| match (a.mean_score, b.mean_score) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.index.cmp(&b.index)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.index.cmp(&b.index),
    });
    Ok(GridResult {
        scoring,
        ranked,
        best_index,
        best_config,
        best_model,
    })
}
