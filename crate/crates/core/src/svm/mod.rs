//! Kernel support vector machines.
//!
//! [`train_svc`] solves the C-SVC dual and [`train_svr`] the epsilon-SVR dual
//! with the same SMO solver. [`train_svc_calibrated`] additionally fits a
//! Platt sigmoid on 3-fold out-of-fold decision values so that
//! [`SvmModel::predict_proba`] is available.

mod kernel;
mod platt;
mod smo;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

pub use kernel::{kernel_eval, sq_dist, Kernel};
pub use platt::{fit_platt, Platt};
pub use smo::DualSolution;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gamma {
    /// `1 / (n_features * variance of all cells)`.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: Gamma,
    pub coef0: f64,
    /// Width of the insensitive tube (regression only).
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Rbf,
            c: 1.0,
            gamma: Gamma::Auto,
            coef0: 0.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParams(format!("C = {}", self.c)));
        }
        if let Gamma::Value(g) = self.gamma {
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidParams(format!("gamma = {g}")));
            }
        }
        if !(self.tol > 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::InvalidParams(
                "tol and epsilon must be positive".into(),
            ));
        }
        Ok(())
    }

    fn resolve_gamma(&self, x: &SparseMatrix) -> f64 {
        match self.gamma {
            Gamma::Value(g) => g,
            Gamma::Auto => {
                let denom = x.cols as f64 * x.cell_variance();
                if denom <= 1e-12 {
                    1.0
                } else {
                    (1.0 / denom).max(1e-12)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmKind {
    Classifier,
    Regressor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub kind: SvmKind,
    pub params: SvmParams,
    /// Gamma actually used (resolved from `Auto` at training time).
    pub gamma: f64,
    pub support_vectors: SparseMatrix,
    /// `alpha_i * y_i` for SVC, `alpha_i - alpha_i*` for SVR.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub platt: Option<Platt>,
}

/// Full training output, including the dual variables of every training row.
#[derive(Debug, Clone)]
pub struct SvcFit {
    pub model: SvmModel,
    pub alpha: Vec<f64>,
    pub solution: DualSolution,
}

fn check_inputs(x: &SparseMatrix, n: usize) -> Result<()> {
    if x.rows != n {
        return Err(Error::DimensionMismatch(format!(
            "{} rows vs {} targets",
            x.rows, n
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParams("no training rows".into()));
    }
    x.check_finite("features")
}

fn support_model(
    x: &SparseMatrix,
    coef: &[f64],
    kind: SvmKind,
    params: &SvmParams,
    gamma: f64,
    bias: f64,
) -> SvmModel {
    let keep: Vec<usize> = (0..coef.len()).filter(|&i| coef[i] != 0.0).collect();
    SvmModel {
        version: MODEL_FORMAT_VERSION,
        kind,
        params: *params,
        gamma,
        support_vectors: x.select_rows(&keep),
        dual_coef: keep.iter().map(|&i| coef[i]).collect(),
        bias,
        platt: None,
    }
}

/// C-SVC on labels `y[i] ∈ {-1, +1}` returning the dual variables as well.
pub fn fit_svc(x: &SparseMatrix, y: &[f64], params: &SvmParams, seed: u64) -> Result<SvcFit> {
    params.validate()?;
    check_inputs(x, y.len())?;
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidParams("SVC labels must be -1 or +1".into()));
    }
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::SingleClass);
    }
    let n = y.len();
    let gamma = params.resolve_gamma(x);
    let gram = kernel::gram(params.kernel, gamma, params.coef0, x, x);
    let problem = smo::DualProblem {
        gram: &gram,
        n,
        map: (0..n).collect(),
        y: y.to_vec(),
        p: vec![-1.0; n],
        c: params.c,
    };
    let solution = problem.solve(params.tol, params.max_iter, seed);
    if !solution.converged {
        log::warn!(
            "SMO stopped at max_iter={} before reaching tol",
            params.max_iter
        );
    }
    let coef: Vec<f64> = solution.alpha.iter().zip(y).map(|(a, y)| a * y).collect();
    let model = support_model(x, &coef, SvmKind::Classifier, params, gamma, solution.bias);
    Ok(SvcFit {
        model,
        alpha: solution.alpha.clone(),
        solution,
    })
}

pub fn train_svc(x: &SparseMatrix, y: &[f64], params: &SvmParams, seed: u64) -> Result<SvmModel> {
    fit_svc(x, y, params, seed).map(|f| f.model)
}

/// SVC plus a Platt sigmoid fitted on 3-fold out-of-fold decision values.
/// Falls back to in-sample decisions when a class is too small to appear in
/// every fold's training part.
pub fn train_svc_calibrated(
    x: &SparseMatrix,
    y: &[f64],
    params: &SvmParams,
    seed: u64,
) -> Result<SvmModel> {
    let mut model = train_svc(x, y, params, seed)?;
    let positive: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();

    let mut fold_of = vec![0usize; y.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut enough = true;
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| positive[i] == class).collect();
        enough &= idx.len() >= 3;
        idx.shuffle(&mut rng);
        for (k, i) in idx.into_iter().enumerate() {
            fold_of[i] = k % 3;
        }
    }

    let decisions = if enough {
        let mut oof = vec![0.0; y.len()];
        for fold in 0..3 {
            let train: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] != fold).collect();
            let valid: Vec<usize> = (0..y.len()).filter(|&i| fold_of[i] == fold).collect();
            let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let m = train_svc(&x.select_rows(&train), &ty, params, seed)?;
            for (&i, d) in valid.iter().zip(m.predict_decision(&x.select_rows(&valid))) {
                oof[i] = d;
            }
        }
        oof
    } else {
        model.predict_decision(x)
    };
    model.platt = Some(fit_platt(&decisions, &positive, 100)?);
    Ok(model)
}

/// Epsilon-SVR on real targets.
pub fn train_svr(
    x: &SparseMatrix,
    targets: &[f64],
    params: &SvmParams,
    seed: u64,
) -> Result<SvmModel> {
    params.validate()?;
    check_inputs(x, targets.len())?;
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }
    let n = targets.len();
    let gamma = params.resolve_gamma(x);
    let gram = kernel::gram(params.kernel, gamma, params.coef0, x, x);
    let mut y = vec![1.0; n];
    y.extend(std::iter::repeat(-1.0).take(n));
    let p: Vec<f64> = targets
        .iter()
        .map(|z| params.epsilon - z)
        .chain(targets.iter().map(|z| params.epsilon + z))
        .collect();
    let problem = smo::DualProblem {
        gram: &gram,
        n,
        map: (0..n).chain(0..n).collect(),
        y,
        p,
        c: params.c,
    };
    let solution = problem.solve(params.tol, params.max_iter, seed);
    if !solution.converged {
        log::warn!(
            "SMO stopped at max_iter={} before reaching tol",
            params.max_iter
        );
    }
    let coef: Vec<f64> = (0..n)
        .map(|i| solution.alpha[i] - solution.alpha[i + n])
        .collect();
    Ok(support_model(
        x,
        &coef,
        SvmKind::Regressor,
        params,
        gamma,
        solution.bias,
    ))
}

impl SvmModel {
    pub fn predict_decision(&self, x: &SparseMatrix) -> Vec<f64> {
        let k = kernel::gram(
            self.params.kernel,
            self.gamma,
            self.params.coef0,
            x,
            &self.support_vectors,
        );
        let m = self.support_vectors.rows;
        (0..x.rows)
            .map(|i| {
                if m == 0 {
                    return self.bias;
                }
                k[i * m..(i + 1) * m]
                    .iter()
                    .zip(&self.dual_coef)
                    .map(|(k, c)| k * c)
                    .sum::<f64>()
                    + self.bias
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &SparseMatrix) -> Result<Vec<f64>> {
        let platt = self.platt.ok_or(Error::UncalibratedModel)?;
        Ok(self
            .predict_decision(x)
            .into_iter()
            .map(|d| platt.probability(d))
            .collect())
    }

    /// `+1` / `-1` by the sign of the decision value (0 maps to -1).
    pub fn predict_labels(&self, x: &SparseMatrix) -> Vec<f64> {
        self.predict_decision(x)
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    pub fn predict_svr(&self, x: &SparseMatrix) -> Vec<f64> {
        self.predict_decision(x)
    }
}

pub fn predict_decision(model: &SvmModel, x: &SparseMatrix) -> Vec<f64> {
    model.predict_decision(x)
}

pub fn predict_proba(model: &SvmModel, x: &SparseMatrix) -> Result<Vec<f64>> {
    model.predict_proba(x)
}

pub fn predict_svr(model: &SvmModel, x: &SparseMatrix) -> Vec<f64> {
    model.predict_svr(x)
}

/// Largest KKT violation, measured on `y_i f(x_i)`, over the training rows.
pub fn kkt_violation(fit: &SvcFit, x: &SparseMatrix, y: &[f64]) -> f64 {
    let c = fit.model.params.c;
    fit.model
        .predict_decision(x)
        .iter()
        .zip(y)
        .zip(&fit.alpha)
        .map(|((f, y), &a)| {
            let margin = y * f;
            if a == 0.0 {
                (1.0 - margin).max(0.0)
            } else if a == c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rbf(gamma: f64, c: f64) -> SvmParams {
        SvmParams {
            kernel: Kernel::Rbf,
            gamma: Gamma::Value(gamma),
            c,
            ..SvmParams::default()
        }
    }

    #[test]
    fn two_points_separate() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![1.0]]);
        let m = train_svc(&x, &[-1.0, 1.0], &rbf(1.0, 1.0), 0).unwrap();
        let d = m.predict_decision(&x);
        assert!(d[0] < 0.0 && 0.0 < d[1]);
    }

    #[test]
    fn xor_is_learned() {
        let x = SparseMatrix::from_dense(&[
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
        ]);
        let y = [-1.0, -1.0, 1.0, 1.0];
        let fit = fit_svc(&x, &y, &rbf(1.0, 10.0), 7).unwrap();
        assert_eq!(fit.model.predict_labels(&x), y.to_vec());
        assert!(kkt_violation(&fit, &x, &y) <= 1e-3);
        let balance: f64 = fit.alpha.iter().zip(&y).map(|(a, y)| a * y).sum();
        assert!(balance.abs() < 1e-6);
        assert!(fit.alpha.iter().all(|&a| (0.0..=10.0).contains(&a)));
    }

    #[test]
    fn single_class_and_bad_input() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            train_svc(&x, &[1.0, 1.0], &rbf(1.0, 1.0), 0),
            Err(Error::SingleClass)
        ));
        let bad = SparseMatrix::from_dense(&[vec![f64::NAN], vec![1.0]]);
        assert!(matches!(
            train_svc(&bad, &[1.0, -1.0], &rbf(1.0, 1.0), 0),
            Err(Error::NonFinite(_))
        ));
        assert!(matches!(
            train_svc(&x, &[1.0], &rbf(1.0, 1.0), 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn uncalibrated_model_refuses_probabilities() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![1.0]]);
        let m = train_svc(&x, &[-1.0, 1.0], &rbf(1.0, 1.0), 0).unwrap();
        assert!(matches!(m.predict_proba(&x), Err(Error::UncalibratedModel)));
    }

    #[test]
    fn calibrated_probabilities_track_decisions() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 / 11.0]).collect();
        let y: Vec<f64> = (0..12).map(|i| if i >= 6 { 1.0 } else { -1.0 }).collect();
        let x = SparseMatrix::from_dense(&rows);
        let m = train_svc_calibrated(&x, &y, &rbf(2.0, 1.0), 1).unwrap();
        let d = m.predict_decision(&x);
        let p = m.predict_proba(&x).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                if d[i] < d[j] {
                    assert!(p[i] <= p[j]);
                }
            }
        }
        assert!(p[11] > 0.5 && p[0] < 0.5);
    }

    #[test]
    fn svr_constant_target() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![0.5], vec![1.0], vec![3.0]]);
        let m = train_svr(&x, &[7.0; 4], &rbf(1.0, 1.0), 0).unwrap();
        for p in m.predict_svr(&SparseMatrix::from_dense(&[vec![2.0], vec![-1.0]])) {
            assert!((p - 7.0).abs() < 1e-9);
        }
        assert!(m.dual_coef.is_empty());
    }

    #[test]
    fn svr_fits_collinear_points() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![1.0], vec![2.0]]);
        let y = [0.0, 1.0, 2.0];
        let params = SvmParams {
            epsilon: 0.01,
            c: 100.0,
            ..rbf(0.05, 100.0)
        };
        let m = train_svr(&x, &y, &params, 0).unwrap();
        let pred = m.predict_svr(&x);
        let rmse = (pred
            .iter()
            .zip(&y)
            .map(|(p, t)| (p - t).powi(2))
            .sum::<f64>()
            / 3.0)
            .sqrt();
        assert!(rmse <= 0.1, "rmse {rmse}");
    }

    #[test]
    fn svr_wide_tube_has_no_support_vectors() {
        let x = SparseMatrix::from_dense(&[vec![0.0], vec![1.0], vec![2.0]]);
        let y = [1.0, 1.2, 1.5];
        let params = SvmParams {
            epsilon: 5.0,
            ..rbf(1.0, 1.0)
        };
        let m = train_svr(&x, &y, &params, 0).unwrap();
        assert!(m.dual_coef.is_empty());
        for p in m.predict_svr(&x) {
            assert!((1.0..=1.5).contains(&p));
        }
    }

    #[test]
    fn training_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![(i * 7 % 11) as f64, (i % 3) as f64])
            .collect();
        let y: Vec<f64> = (0..20)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let x = SparseMatrix::from_dense(&rows);
        let p = SvmParams {
            kernel: Kernel::Sigmoid,
            ..SvmParams::default()
        };
        let a = serde_json::to_string(&train_svc_calibrated(&x, &y, &p, 5).unwrap()).unwrap();
        let b = serde_json::to_string(&train_svc_calibrated(&x, &y, &p, 5).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
