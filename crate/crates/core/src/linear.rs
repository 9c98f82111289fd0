//! Linear heads over precomputed embedding matrices.
//!
//! Embeddings arrive as a CSV (`id,e0,...,e{H-1}`) with a JSON sidecar of the
//! same stem holding `{model_name, pooling, layer, H}`. Both heads standardize
//! features with train statistics before fitting.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Log grid searched for `l2_lambda` and `l1_alpha`.
pub const REGULARIZATION_GRID: [f64; 6] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_name: String,
    pub pooling: String,
    pub layer: i64,
    #[serde(rename = "H")]
    pub h: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub ids: Vec<String>,
    pub h: usize,
    pub values: Vec<Vec<f64>>,
    pub provenance: Option<Provenance>,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl EmbeddingMatrix {
    pub fn new(
        ids: Vec<String>,
        values: Vec<Vec<f64>>,
        provenance: Option<Provenance>,
    ) -> Result<Self> {
        let h = values.first().map_or(0, Vec::len);
        if ids.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                values.len()
            )));
        }
        let m = EmbeddingMatrix {
            ids,
            h,
            values,
            provenance,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        for (id, row) in self.ids.iter().zip(&self.values) {
            if row.len() != self.h {
                return Err(Error::DimensionMismatch(format!(
                    "row {id} has {} values, expected {}",
                    row.len(),
                    self.h
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("embedding row {id}")));
            }
        }
        let mut seen = BTreeSet::new();
        for id in &self.ids {
            if !seen.insert(id) {
                return Err(Error::Data(format!("duplicate embedding id {id}")));
            }
        }
        if let Some(p) = &self.provenance {
            if p.h != self.h {
                return Err(Error::DimensionMismatch(format!(
                    "sidecar H = {} but rows have {}",
                    p.h, self.h
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Rows reordered to `dataset_ids`. Ids on either side without a partner
    /// are errors naming every offender.
    pub fn align(&self, dataset_ids: &[String]) -> Result<EmbeddingMatrix> {
        let wanted: BTreeSet<&String> = dataset_ids.iter().collect();
        let unknown: Vec<String> = self
            .ids
            .iter()
            .filter(|i| !wanted.contains(i))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(Error::UnknownId(unknown));
        }
        let pos: HashMap<&String, usize> =
            self.ids.iter().enumerate().map(|(i, id)| (id, i)).collect();
        let missing: Vec<String> = dataset_ids
            .iter()
            .filter(|i| !pos.contains_key(i))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingId(missing));
        }
        Ok(EmbeddingMatrix {
            ids: dataset_ids.to_vec(),
            h: self.h,
            values: dataset_ids
                .iter()
                .map(|id| self.values[pos[id]].clone())
                .collect(),
            provenance: self.provenance.clone(),
        })
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["id".to_string()];
        header.extend((0..self.h).map(|j| format!("e{j}")));
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(&self.values) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
    }
}

pub fn parse_embeddings_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    if header.get(0) != Some("id") {
        return Err(Error::Data("embedding header must start with `id`".into()));
    }
    let h = header.len() - 1;
    for (j, name) in header.iter().skip(1).enumerate() {
        if name != format!("e{j}") {
            return Err(Error::Data(format!(
                "embedding column {} is `{name}`, expected `e{j}`",
                j + 1
            )));
        }
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").to_string();
        if rec.len() != h + 1 {
            return Err(Error::DimensionMismatch(format!(
                "row {id} has {} values, header declares {h}",
                rec.len().saturating_sub(1)
            )));
        }
        let row = rec
            .iter()
            .skip(1)
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Data(format!("row {id}: `{v}` is not a number")))
            })
            .collect::<Result<Vec<f64>>>()?;
        ids.push(id);
        values.push(row);
    }
    Ok((ids, values, h))
}

/// Reads the CSV and, when present, its sidecar.
pub fn load_embeddings(path: &Path) -> Result<EmbeddingMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (ids, values, h) = parse_embeddings_csv(&text)?;
    let side = sidecar_path(path);
    let provenance = if side.exists() {
        let raw = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        Some(serde_json::from_str::<Provenance>(&raw)?)
    } else {
        log::warn!("no sidecar at {}; provenance unknown", side.display());
        None
    };
    let m = EmbeddingMatrix {
        ids,
        h,
        values,
        provenance,
    };
    m.validate()?;
    Ok(m)
}

/// [`load_embeddings`] followed by [`EmbeddingMatrix::align`].
pub fn load_embeddings_for(path: &Path, dataset_ids: &[String]) -> Result<EmbeddingMatrix> {
    load_embeddings(path)?.align(dataset_ids)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logistic,
    Lasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularization {
    L2Lambda(f64),
    L1Alpha(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population statistics; a zero spread is replaced by 1.
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let h = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; h];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; h];
        for row in x {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + sd) && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub kind: LinearKind,
    /// Weights on standardized features.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub regularization: Regularization,
    pub standardization: Standardizer,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LinearModel {
    pub fn decision_row(&self, row: &[f64]) -> f64 {
        self.bias
            + self
                .standardization
                .transform_row(row)
                .iter()
                .zip(&self.weights)
                .map(|(z, w)| z * w)
                .sum::<f64>()
    }

    pub fn decision(&self, x: &[Vec<f64>]) -> Vec<f64> {
        x.iter().map(|r| self.decision_row(r)).collect()
    }

    /// AD probability for logistic heads, the regression value for LASSO.
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<f64> {
        let d = self.decision(x);
        match self.kind {
            LinearKind::Logistic => d.into_iter().map(sigmoid).collect(),
            LinearKind::Lasso => d,
        }
    }

    /// Weights and intercept on the original feature scale.
    pub fn coefficients(&self) -> (Vec<f64>, f64) {
        let s = &self.standardization;
        let w: Vec<f64> = self
            .weights
            .iter()
            .zip(&s.std)
            .map(|(w, sd)| w / sd)
            .collect();
        let b = self.bias - w.iter().zip(&s.mean).map(|(w, m)| w * m).sum::<f64>();
        (w, b)
    }

    pub fn n_nonzero(&self) -> usize {
        self.weights.iter().filter(|w| **w != 0.0).count()
    }
}

fn check_xy(x: &[Vec<f64>], n_targets: usize) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::InvalidParams("no training rows".into()));
    }
    if x.len() != n_targets {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.len(),
            n_targets
        )));
    }
    let h = x[0].len();
    if x.iter().any(|r| r.len() != h) {
        return Err(Error::DimensionMismatch("ragged feature rows".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("features".into()));
    }
    Ok(h)
}

/// Mean logistic loss plus `l2_lambda |w|^2` (bias unpenalized), with its
/// gradient `(d/d bias, d/d w)`.
pub fn logistic_objective(
    x: &[Vec<f64>],
    y: &[bool],
    l2_lambda: f64,
    bias: f64,
    weights: &[f64],
) -> (f64, f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gb = 0.0;
    let mut gw = vec![0.0; weights.len()];
    for (row, &yi) in x.iter().zip(y) {
        let z = bias + row.iter().zip(weights).map(|(a, w)| a * w).sum::<f64>();
        let t = if yi { 1.0 } else { 0.0 };
        loss += softplus(z) - t * z;
        let r = sigmoid(z) - t;
        gb += r;
        for (g, a) in gw.iter_mut().zip(row) {
            *g += r * a;
        }
    }
    let reg: f64 = weights.iter().map(|w| w * w).sum();
    let f = loss / n + l2_lambda * reg;
    gb /= n;
    for (g, w) in gw.iter_mut().zip(weights) {
        *g = *g / n + 2.0 * l2_lambda * w;
    }
    (f, gb, gw)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// L-BFGS on `f(theta)` until `|grad|_2 < gtol`.
fn lbfgs<F>(mut theta: Vec<f64>, f: F, gtol: f64, max_iter: usize) -> (Vec<f64>, usize, bool)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    const MEMORY: usize = 10;
    let (mut fx, mut g) = f(&theta);
    let mut hist: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    for it in 0..max_iter {
        if dot(&g, &g).sqrt() < gtol {
            return (theta, it, true);
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut coef = Vec::with_capacity(hist.len());
        for (s, yv, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(yv).for_each(|(qi, yi)| *qi -= a * yi);
            coef.push(a);
        }
        if let Some((s, yv, _)) = hist.last() {
            let scale = dot(s, yv) / dot(yv, yv);
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, yv, rho), a) in hist.iter().zip(coef.iter().rev()) {
            let b = rho * dot(yv, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.into_iter().map(|v| -v).collect();
        let mut slope = dot(&g, &dir);
        if slope >= 0.0 {
            hist.clear();
            dir = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = 1.0;
        let (next, fn_, gn) = loop {
            let cand: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + step * d).collect();
            let (fc, gc) = f(&cand);
            if fc <= fx + 1e-4 * step * slope || step < 1e-20 {
                break (cand, fc, gc);
            }
            step *= 0.5;
        };
        let s: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() && sy > 0.0 {
            if hist.len() == MEMORY {
                hist.remove(0);
            }
            hist.push((s, yv, 1.0 / sy));
        }
        let stalled = fn_ >= fx && step < 1e-20;
        theta = next;
        fx = fn_;
        g = gn;
        if stalled {
            return (theta, it + 1, dot(&g, &g).sqrt() < gtol);
        }
    }
    let ok = dot(&g, &g).sqrt() < gtol;
    (theta, max_iter, ok)
}

/// Logistic regression; `y[i]` marks AD. The seed is accepted for interface
/// symmetry; the optimizer is deterministic.
pub fn train_logistic(
    x: &[Vec<f64>],
    y: &[bool],
    l2_lambda: f64,
    _seed: u64,
) -> Result<LinearModel> {
    let h = check_xy(x, y.len())?;
    if !(l2_lambda >= 0.0 && l2_lambda.is_finite()) {
        return Err(Error::InvalidParams(format!("l2_lambda = {l2_lambda}")));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClass);
    }
    let st = Standardizer::fit(x);
    let z = st.transform(x);
    let objective = |theta: &[f64]| {
        let (f, gb, mut gw) = logistic_objective(&z, y, l2_lambda, theta[0], &theta[1..]);
        gw.insert(0, gb);
        (f, gw)
    };
    let (theta, iterations, converged) = lbfgs(vec![0.0; h + 1], objective, 1e-6, 10_000);
    if !converged {
        log::warn!("logistic head stopped after {iterations} iterations without reaching gradient tolerance");
    }
    Ok(LinearModel {
        kind: LinearKind::Logistic,
        bias: theta[0],
        weights: theta[1..].to_vec(),
        regularization: Regularization::L2Lambda(l2_lambda),
        standardization: st,
        iterations,
        converged,
    })
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

/// LASSO by cyclic coordinate descent on standardized features, minimizing
/// `1/(2n) |y - b - Zw|^2 + l1_alpha |w|_1`. Stops when no coordinate moves
/// by more than 1e-8 in a sweep.
pub fn train_lasso(x: &[Vec<f64>], y: &[f64], l1_alpha: f64, _seed: u64) -> Result<LinearModel> {
    let h = check_xy(x, y.len())?;
    if !(l1_alpha >= 0.0 && l1_alpha.is_finite()) {
        return Err(Error::InvalidParams(format!("l1_alpha = {l1_alpha}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    let n = x.len();
    let nf = n as f64;
    let st = Standardizer::fit(x);
    let z = st.transform(x);
    let y_mean = y.iter().sum::<f64>() / nf;
    let mut resid: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let col_sq: Vec<f64> = (0..h)
        .map(|j| z.iter().map(|r| r[j] * r[j]).sum::<f64>() / nf)
        .collect();
    let mut w = vec![0.0; h];

    const TOL: f64 = 1e-8;
    const MAX_SWEEPS: usize = 100_000;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_SWEEPS {
        iterations += 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..h {
            if col_sq[j] <= 1e-12 {
                continue;
            }
            let rho =
                z.iter().zip(&resid).map(|(r, e)| r[j] * e).sum::<f64>() / nf + w[j] * col_sq[j];
            let new = soft_threshold(rho, l1_alpha) / col_sq[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (e, r) in resid.iter_mut().zip(&z) {
                    *e -= delta * r[j];
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < TOL {
            converged = true;
            break;
        }
    }
    Ok(LinearModel {
        kind: LinearKind::Lasso,
        weights: w,
        bias: y_mean,
        regularization: Regularization::L1Alpha(l1_alpha),
        standardization: st,
        iterations,
        converged,
    })
}

/// Largest `|<z_j, y - mean(y)>| / n` over standardized columns: the smallest
/// `l1_alpha` giving an all-zero LASSO solution.
pub fn lasso_alpha_max(x: &[Vec<f64>], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let z = Standardizer::fit(x).transform(x);
    let y_mean = y.iter().sum::<f64>() / n;
    let h = x.first().map_or(0, Vec::len);
    (0..h)
        .map(|j| {
            (z.iter()
                .zip(y)
                .map(|(r, v)| r[j] * (v - y_mean))
                .sum::<f64>()
                / n)
                .abs()
        })
        .fold(0.0, f64::max)
}
