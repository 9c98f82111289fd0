//! Two-label linear-chain CRF over real-valued observation vectors.
//!
//! The score of a label path `y` for observations `x_1..x_L` is
//! `sum_t w[y_t] . x_t + sum_{t>1} T[y_{t-1}][y_t]`. Training minimizes
//! `-sum log P(y | x) + c2 |theta|_2^2 + c1 |theta|_1` by proximal gradient
//! descent with a backtracking step size; `theta` is the state weights
//! followed by the transition matrix, all penalized.
//!
//! Decoding breaks ties toward `Control` (non-AD), and a transcript is
//! labelled with the last state of its Viterbi path.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

pub const LABELS: [Label; 2] = [Label::Control, Label::AD];
pub const LABEL_NAMES: [&str; 2] = ["NonAD", "AD"];

fn label_index(l: Label) -> usize {
    match l {
        Label::Control => 0,
        Label::AD => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSequence {
    pub transcript_id: String,
    pub steps: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrfParams {
    pub c1: f64,
    pub c2: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

impl Default for CrfParams {
    fn default() -> Self {
        CrfParams {
            c1: 0.0,
            c2: 0.01,
            max_iter: 1000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrfModel {
    pub labels: [String; 2],
    pub feature_names: Vec<String>,
    /// `state_weights[label][feature]`
    pub state_weights: [Vec<f64>; 2],
    /// `transition_weights[from][to]`
    pub transition_weights: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub log_partition: f64,
    /// `per_step[t][label]`, label order Control then AD.
    pub per_step: Vec<[f64; 2]>,
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((a - m).exp() + (b - m).exp()).ln()
    }
}

impl CrfModel {
    pub fn zeros(feature_names: Vec<String>) -> Self {
        let f = feature_names.len();
        CrfModel {
            labels: LABEL_NAMES.map(String::from),
            feature_names,
            state_weights: [vec![0.0; f], vec![0.0; f]],
            transition_weights: [[0.0; 2]; 2],
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Flattened parameters: state weights (label-major) then transitions.
    pub fn theta(&self) -> Vec<f64> {
        let mut v = self.state_weights[0].clone();
        v.extend_from_slice(&self.state_weights[1]);
        v.extend(self.transition_weights.iter().flatten());
        v
    }

    pub fn from_theta(feature_names: Vec<String>, theta: &[f64]) -> Self {
        let f = feature_names.len();
        assert_eq!(theta.len(), 2 * f + 4);
        CrfModel {
            labels: LABEL_NAMES.map(String::from),
            feature_names,
            state_weights: [theta[..f].to_vec(), theta[f..2 * f].to_vec()],
            transition_weights: [
                [theta[2 * f], theta[2 * f + 1]],
                [theta[2 * f + 2], theta[2 * f + 3]],
            ],
        }
    }

    fn state_scores(&self, seq: &FeatureSequence) -> Vec<[f64; 2]> {
        seq.steps
            .iter()
            .map(|x| {
                [0, 1].map(|y| {
                    self.state_weights[y]
                        .iter()
                        .zip(x)
                        .map(|(w, v)| w * v)
                        .sum()
                })
            })
            .collect()
    }

    fn check(&self, seq: &FeatureSequence) -> Result<()> {
        if seq.steps.is_empty() {
            return Err(Error::EmptySequence(0));
        }
        if let Some(bad) = seq.steps.iter().find(|s| s.len() != self.n_features()) {
            return Err(Error::DimensionMismatch(format!(
                "step has {} features, model expects {}",
                bad.len(),
                self.n_features()
            )));
        }
        Ok(())
    }

    /// Unnormalized log score of a path.
    pub fn path_score(&self, seq: &FeatureSequence, path: &[Label]) -> f64 {
        let s = self.state_scores(seq);
        let mut total = 0.0;
        for (t, &l) in path.iter().enumerate() {
            let y = label_index(l);
            total += s[t][y];
            if t > 0 {
                total += self.transition_weights[label_index(path[t - 1])][y];
            }
        }
        total
    }

    pub fn forward_backward(&self, seq: &FeatureSequence) -> Result<Marginals> {
        self.check(seq)?;
        let s = self.state_scores(seq);
        let fb = forward_backward_scores(&s, &self.transition_weights);
        Ok(Marginals {
            log_partition: fb.log_z,
            per_step: fb.unary,
        })
    }

    pub fn viterbi_decode(&self, seq: &FeatureSequence) -> Result<Vec<Label>> {
        self.check(seq)?;
        let s = self.state_scores(seq);
        let l = s.len();
        let mut delta = s[0];
        let mut back = vec![[0usize; 2]; l];
        for t in 1..l {
            let mut next = [0.0; 2];
            for y in 0..2 {
                let (mut arg, mut best) = (0, delta[0] + self.transition_weights[0][y]);
                let alt = delta[1] + self.transition_weights[1][y];
                if alt > best {
                    best = alt;
                    arg = 1;
                }
                next[y] = best + s[t][y];
                back[t][y] = arg;
            }
            delta = next;
        }
        let mut y = if delta[1] > delta[0] { 1 } else { 0 };
        let mut path = vec![LABELS[y]; l];
        for t in (1..l).rev() {
            y = back[t][y];
            path[t - 1] = LABELS[y];
        }
        Ok(path)
    }

    /// Label of the final position of the Viterbi path.
    pub fn transcript_prediction(&self, seq: &FeatureSequence) -> Result<Label> {
        Ok(*self.viterbi_decode(seq)?.last().unwrap())
    }

    /// Marginal probability of AD at the last step.
    pub fn final_ad_probability(&self, seq: &FeatureSequence) -> Result<f64> {
        Ok(self.forward_backward(seq)?.per_step.last().unwrap()[1])
    }
}

struct ForwardBackward {
    log_z: f64,
    unary: Vec<[f64; 2]>,
    /// `pair[t][a][b]` for the edge between `t-1` and `t` (index 0 unused).
    pair: Vec<[[f64; 2]; 2]>,
}

fn forward_backward_scores(s: &[[f64; 2]], trans: &[[f64; 2]; 2]) -> ForwardBackward {
    let l = s.len();
    let mut alpha = vec![[0.0; 2]; l];
    let mut beta = vec![[0.0; 2]; l];
    alpha[0] = s[0];
    for t in 1..l {
        for y in 0..2 {
            alpha[t][y] =
                s[t][y] + lse2(alpha[t - 1][0] + trans[0][y], alpha[t - 1][1] + trans[1][y]);
        }
    }
    for t in (0..l - 1).rev() {
        for a in 0..2 {
            beta[t][a] = lse2(
                trans[a][0] + s[t + 1][0] + beta[t + 1][0],
                trans[a][1] + s[t + 1][1] + beta[t + 1][1],
            );
        }
    }
    let log_z = lse2(alpha[l - 1][0], alpha[l - 1][1]);
    let unary = (0..l)
        .map(|t| [0, 1].map(|y| (alpha[t][y] + beta[t][y] - log_z).exp()))
        .collect();
    let mut pair = vec![[[0.0; 2]; 2]; l];
    for t in 1..l {
        for a in 0..2 {
            for b in 0..2 {
                pair[t][a][b] =
                    (alpha[t - 1][a] + trans[a][b] + s[t][b] + beta[t][b] - log_z).exp();
            }
        }
    }
    ForwardBackward { log_z, unary, pair }
}

pub fn forward_backward(model: &CrfModel, seq: &FeatureSequence) -> Result<Marginals> {
    model.forward_backward(seq)
}

pub fn viterbi_decode(model: &CrfModel, seq: &FeatureSequence) -> Result<Vec<Label>> {
    model.viterbi_decode(seq)
}

pub fn transcript_prediction(model: &CrfModel, seq: &FeatureSequence) -> Result<Label> {
    model.transcript_prediction(seq)
}

fn validate(sequences: &[FeatureSequence], labels: &[Vec<Label>]) -> Result<usize> {
    if sequences.is_empty() {
        return Err(Error::InvalidParams("no training sequences".into()));
    }
    if sequences.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} sequences vs {} label sequences",
            sequences.len(),
            labels.len()
        )));
    }
    let dim = sequences
        .iter()
        .flat_map(|s| s.steps.first())
        .map(Vec::len)
        .next()
        .unwrap_or(0);
    for (i, (seq, ys)) in sequences.iter().zip(labels).enumerate() {
        if seq.steps.is_empty() {
            return Err(Error::EmptySequence(i));
        }
        if seq.steps.len() != ys.len() {
            return Err(Error::DimensionMismatch(format!(
                "sequence {i}: {} steps vs {} labels",
                seq.steps.len(),
                ys.len()
            )));
        }
        if seq.steps.iter().any(|s| s.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "sequence {i}: ragged feature vectors"
            )));
        }
        if seq.steps.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sequence {i}")));
        }
    }
    Ok(dim)
}

/// `-sum log P(y|x) + c2 |theta|^2` and its gradient.
pub fn smooth_objective(
    theta: &[f64],
    dim: usize,
    sequences: &[FeatureSequence],
    labels: &[Vec<Label>],
    c2: f64,
) -> (f64, Vec<f64>) {
    let state = [&theta[..dim], &theta[dim..2 * dim]];
    let trans = [
        [theta[2 * dim], theta[2 * dim + 1]],
        [theta[2 * dim + 2], theta[2 * dim + 3]],
    ];

    let parts: Vec<(f64, Vec<f64>)> = sequences
        .par_iter()
        .zip(labels)
        .map(|(seq, ys)| {
            let s: Vec<[f64; 2]> = seq
                .steps
                .iter()
                .map(|x| [0, 1].map(|y| state[y].iter().zip(x).map(|(w, v)| w * v).sum()))
                .collect();
            let fb = forward_backward_scores(&s, &trans);
            let mut g = vec![0.0; theta.len()];
            let mut gold = 0.0;
            for (t, x) in seq.steps.iter().enumerate() {
                let y = label_index(ys[t]);
                gold += s[t][y];
                for lab in 0..2 {
                    let coef = fb.unary[t][lab] - if lab == y { 1.0 } else { 0.0 };
                    for (k, v) in x.iter().enumerate() {
                        g[lab * dim + k] += coef * v;
                    }
                }
                if t > 0 {
                    let a = label_index(ys[t - 1]);
                    gold += trans[a][y];
                    g[2 * dim + 2 * a + y] -= 1.0;
                    for p in 0..2 {
                        for q in 0..2 {
                            g[2 * dim + 2 * p + q] += fb.pair[t][p][q];
                        }
                    }
                }
            }
            (fb.log_z - gold, g)
        })
        .collect();

    let mut value = c2 * theta.iter().map(|w| w * w).sum::<f64>();
    let mut grad: Vec<f64> = theta.iter().map(|w| 2.0 * c2 * w).collect();
    for (v, g) in parts {
        value += v;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    (value, grad)
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct CrfFit {
    pub model: CrfModel,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub fn crf_fit(
    sequences: &[FeatureSequence],
    labels: &[Vec<Label>],
    feature_names: Vec<String>,
    params: &CrfParams,
) -> Result<CrfFit> {
    if !(params.c1 >= 0.0 && params.c2 >= 0.0) {
        return Err(Error::InvalidParams(format!(
            "c1 = {}, c2 = {}",
            params.c1, params.c2
        )));
    }
    let dim = validate(sequences, labels)?;
    if feature_names.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} feature names for {} features",
            feature_names.len(),
            dim
        )));
    }

    let l1 = |th: &[f64]| params.c1 * th.iter().map(|w| w.abs()).sum::<f64>();
    let mut theta = vec![0.0; 2 * dim + 4];
    let (mut f, mut g) = smooth_objective(&theta, dim, sequences, labels, params.c2);
    let mut total = f + l1(&theta);
    // extrapolated point and its smooth value / gradient
    let (mut y, mut fy, mut gy) = (theta.clone(), f, g.clone());
    let mut momentum = 1.0f64;
    let mut eta = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < params.max_iter {
        iterations += 1;
        let (cand, fc, gc) = loop {
            let cand: Vec<f64> = y
                .iter()
                .zip(&gy)
                .map(|(w, d)| soft_threshold(w - eta * d, eta * params.c1))
                .collect();
            let (fc, gc) = smooth_objective(&cand, dim, sequences, labels, params.c2);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((c, w), d) in cand.iter().zip(&y).zip(&gy) {
                lin += d * (c - w);
                sq += (c - w) * (c - w);
            }
            if fc <= fy + lin + sq / (2.0 * eta) + 1e-12 * fy.abs() || eta < 1e-16 {
                break (cand, fc, gc);
            }
            eta *= 0.5;
        };
        let new_total = fc + l1(&cand);
        if new_total > total && momentum > 1.0 {
            // momentum overshot: restart from the last accepted point
            momentum = 1.0;
            (y, fy, gy) = (theta.clone(), f, g.clone());
            continue;
        }
        let change = (total - new_total).abs();
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let old_total = total;
        y = cand
            .iter()
            .zip(&theta)
            .map(|(c, w)| c + beta * (c - w))
            .collect();
        theta = cand;
        f = fc;
        g = gc;
        total = new_total;
        momentum = next_momentum;
        if change <= params.tol * old_total.abs().max(1.0) {
            converged = true;
            break;
        }
        if beta == 0.0 {
            (fy, gy) = (f, g.clone());
        } else {
            (fy, gy) = smooth_objective(&y, dim, sequences, labels, params.c2);
        }
        eta = (eta * 2.0).min(1e6);
    }

    Ok(CrfFit {
        model: CrfModel::from_theta(feature_names, &theta),
        objective: total,
        iterations,
        converged,
    })
}

pub fn crf_train(
    sequences: &[FeatureSequence],
    labels: &[Vec<Label>],
    feature_names: Vec<String>,
    params: &CrfParams,
) -> Result<CrfModel> {
    crf_fit(sequences, labels, feature_names, params).map(|f| f.model)
}
