//! Gradient-boosted regression trees.
//!
//! Every stage fits a tree to the first and second derivatives of the loss at
//! the current raw predictions. Splits are exact and greedy over the sorted
//! distinct values of each feature, scored by the Newton gain
//! `G_L^2/H_L + G_R^2/H_R - G^2/H` (for squared loss this is the reduction in
//! squared error). Leaves take the Newton step `-G/H`, and the raw prediction
//! moves by `learning_rate * leaf`.
//!
//! Sparse inputs are handled column-wise: rows without an entry for a feature
//! are treated as a single group at value `0`.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::{Row, SparseMatrix};

const MIN_GAIN: f64 = 1e-12;
const MIN_HESS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Logistic,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_estimators: 100,
            max_depth: 3,
            learning_rate: 0.1,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn predict(&self, row: &Row<'_>) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row.get(*feature) <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn add_gains(&self, acc: &mut BTreeMap<usize, f64>) {
        if let Node::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            *acc.entry(*feature).or_default() += gain;
            left.add_gains(acc);
            right.add_gains(acc);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub base_score: f64,
    pub trees: Vec<Node>,
    pub loss: Loss,
    pub params: GbdtParams,
    pub n_features: usize,
}

#[derive(Debug, Clone)]
pub struct GbdtFit {
    pub model: GbdtModel,
    /// Mean training loss before any tree and after each stage.
    pub loss_trace: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn mean_loss(loss: Loss, raw: &[f64], y: &[f64]) -> f64 {
    let total: f64 = raw
        .iter()
        .zip(y)
        .map(|(&f, &t)| match loss {
            Loss::Squared => 0.5 * (f - t) * (f - t),
            // log(1 + e^f) - t f
            Loss::Logistic => f.max(0.0) + (-f.abs()).exp().ln_1p() - t * f,
        })
        .sum();
    total / y.len() as f64
}

/// Per-feature nonzero entries sorted by value.
struct Columns {
    entries: Vec<Vec<(usize, f64)>>,
}

impl Columns {
    fn new(x: &SparseMatrix) -> Self {
        let mut entries = vec![Vec::new(); x.cols];
        for i in 0..x.rows {
            let r = x.row(i);
            for (&c, &v) in r.indices.iter().zip(r.values) {
                if v != 0.0 {
                    entries[c].push((i, v));
                }
            }
        }
        for col in &mut entries {
            col.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        }
        Columns { entries }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

struct Builder<'a> {
    cols: &'a Columns,
    x: &'a SparseMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    max_depth: usize,
    min_leaf: usize,
}

fn score(g: f64, h: f64) -> f64 {
    g * g / h.max(MIN_HESS)
}

impl<'a> Builder<'a> {
    fn best_split(&self, rows: &[usize], in_node: &[bool]) -> Option<Candidate> {
        let n = rows.len();
        let g_total: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let parent = score(g_total, h_total);
        let min_leaf = self.min_leaf.max(1);

        let per_feature: Vec<Option<Candidate>> = (0..self.cols.entries.len())
            .into_par_iter()
            .map(|f| {
                let col: Vec<(f64, f64, f64)> = self.cols.entries[f]
                    .iter()
                    .filter(|(i, _)| in_node[*i])
                    .map(|&(i, v)| (v, self.grad[i], self.hess[i]))
                    .collect();
                let zeros = n - col.len();
                let (gz, hz) = col
                    .iter()
                    .fold((g_total, h_total), |(g, h), e| (g - e.1, h - e.2));

                // groups of equal value in ascending order: (value, g, h, count)
                let mut groups: Vec<(f64, f64, f64, usize)> = Vec::new();
                let mut zero_done = zeros == 0;
                for &(v, g, h) in &col {
                    if !zero_done && v > 0.0 {
                        groups.push((0.0, gz, hz, zeros));
                        zero_done = true;
                    }
                    match groups.last_mut() {
                        Some(last) if last.0 == v => {
                            last.1 += g;
                            last.2 += h;
                            last.3 += 1;
                        }
                        _ => groups.push((v, g, h, 1)),
                    }
                }
                if !zero_done {
                    groups.push((0.0, gz, hz, zeros));
                }

                let mut best: Option<Candidate> = None;
                let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0usize);
                for w in groups.windows(2) {
                    gl += w[0].1;
                    hl += w[0].2;
                    nl += w[0].3;
                    let nr = n - nl;
                    if nl < min_leaf || nr < min_leaf {
                        continue;
                    }
                    let gain = score(gl, hl) + score(g_total - gl, h_total - hl) - parent;
                    if gain > MIN_GAIN && best.is_none_or(|b| gain > b.gain) {
                        best = Some(Candidate {
                            feature: f,
                            threshold: 0.5 * (w[0].0 + w[1].0),
                            gain,
                        });
                    }
                }
                best
            })
            .collect();

        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if a.gain >= c.gain => Some(a),
                _ => Some(c),
            })
    }

    fn leaf(&self, rows: &[usize]) -> Node {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        Node::Leaf {
            value: -g / h.max(MIN_HESS),
        }
    }

    fn build(&self, rows: Vec<usize>, depth: usize, in_node: &mut Vec<bool>) -> Node {
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf.max(1) {
            return self.leaf(&rows);
        }
        for &i in &rows {
            in_node[i] = true;
        }
        let split = self.best_split(&rows, in_node);
        for &i in &rows {
            in_node[i] = false;
        }
        let Some(c) = split else {
            return self.leaf(&rows);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.row(i).get(c.feature) <= c.threshold);
        Node::Split {
            feature: c.feature,
            threshold: c.threshold,
            gain: c.gain,
            left: Box::new(self.build(left, depth + 1, in_node)),
            right: Box::new(self.build(right, depth + 1, in_node)),
        }
    }
}

/// Trains a model and records the training loss after each stage.
pub fn fit_gbdt(x: &SparseMatrix, y: &[f64], loss: Loss, params: &GbdtParams) -> Result<GbdtFit> {
    if x.rows != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.rows,
            y.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidParams("no training rows".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    x.check_finite("features")?;
    if !(params.learning_rate > 0.0) || !(params.subsample > 0.0 && params.subsample <= 1.0) {
        return Err(Error::InvalidParams(
            "learning_rate > 0 and subsample in (0, 1] required".into(),
        ));
    }

    let base_score = match loss {
        Loss::Squared => y.iter().sum::<f64>() / y.len() as f64,
        Loss::Logistic => {
            if y.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidParams(
                    "logistic targets must be 0 or 1".into(),
                ));
            }
            let pos = y.iter().sum::<f64>();
            if pos == 0.0 || pos == y.len() as f64 {
                return Err(Error::SingleClass);
            }
            let p = pos / y.len() as f64;
            (p / (1.0 - p)).ln()
        }
    };

    let cols = Columns::new(x);
    let n = y.len();
    let mut raw = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.n_estimators);
    let mut loss_trace = vec![mean_loss(loss, &raw, y)];
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut in_node = vec![false; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    for _ in 0..params.n_estimators {
        for i in 0..n {
            match loss {
                Loss::Squared => {
                    grad[i] = raw[i] - y[i];
                    hess[i] = 1.0;
                }
                Loss::Logistic => {
                    let p = sigmoid(raw[i]);
                    grad[i] = p - y[i];
                    hess[i] = p * (1.0 - p);
                }
            }
        }
        let rows: Vec<usize> = if params.subsample < 1.0 {
            let take = ((n as f64 * params.subsample).round() as usize).clamp(1, n);
            let mut all: Vec<usize> = (0..n).collect();
            all.shuffle(&mut rng);
            all.truncate(take);
            all.sort_unstable();
            all
        } else {
            (0..n).collect()
        };
        let builder = Builder {
            cols: &cols,
            x,
            grad: &grad,
            hess: &hess,
            max_depth: params.max_depth,
            min_leaf: params.min_samples_leaf,
        };
        let tree = builder.build(rows, 0, &mut in_node);
        for (i, r) in raw.iter_mut().enumerate() {
            *r += params.learning_rate * tree.predict(&x.row(i));
        }
        trees.push(tree);
        loss_trace.push(mean_loss(loss, &raw, y));
    }

    Ok(GbdtFit {
        model: GbdtModel {
            base_score,
            trees,
            loss,
            params: *params,
            n_features: x.cols,
        },
        loss_trace,
    })
}

pub fn train_gbdt(
    x: &SparseMatrix,
    y: &[f64],
    loss: Loss,
    params: &GbdtParams,
) -> Result<GbdtModel> {
    fit_gbdt(x, y, loss, params).map(|f| f.model)
}

impl GbdtModel {
    pub fn predict_raw(&self, x: &SparseMatrix) -> Vec<f64> {
        (0..x.rows)
            .map(|i| {
                let row = x.row(i);
                self.base_score
                    + self
                        .trees
                        .iter()
                        .map(|t| self.params.learning_rate * t.predict(&row))
                        .sum::<f64>()
            })
            .collect()
    }

    /// Probabilities for logistic loss, raw values for squared loss.
    pub fn predict(&self, x: &SparseMatrix) -> Vec<f64> {
        let raw = self.predict_raw(x);
        match self.loss {
            Loss::Logistic => raw.into_iter().map(sigmoid).collect(),
            Loss::Squared => raw,
        }
    }

    /// Total split gain per feature.
    pub fn feature_importance(&self) -> BTreeMap<usize, f64> {
        let mut acc = BTreeMap::new();
        for t in &self.trees {
            t.add_gains(&mut acc);
        }
        acc
    }

    /// The `k` features with the largest total gain; ties go to the lower index.
    pub fn top_features(&self, k: usize) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.feature_importance().into_iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v.truncate(k);
        v
    }
}

pub fn predict_gbdt(model: &GbdtModel, x: &SparseMatrix) -> Vec<f64> {
    model.predict(x)
}

pub fn feature_importance(model: &GbdtModel) -> BTreeMap<usize, f64> {
    model.feature_importance()
}
