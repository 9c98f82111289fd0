//! Platt scaling: `P(AD | f) = 1 / (1 + exp(A f + B))`.
//!
//! Fitted by Newton's method with backtracking on the cross-entropy against
//! smoothed targets `t+ = (N+ + 1) / (N+ + 2)` and `t- = 1 / (N- + 2)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Platt {
    pub a: f64,
    pub b: f64,
}

impl Platt {
    pub fn probability(&self, decision: f64) -> f64 {
        let z = self.a * decision + self.b;
        if z >= 0.0 {
            let e = (-z).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + z.exp())
        }
    }
}

/// Fits `(A, B)`; `positive[i]` marks AD. All-equal decisions give `A = 0`
/// and a constant probability equal to the smoothed positive prior.
pub fn fit_platt(decisions: &[f64], positive: &[bool], max_iter: usize) -> Result<Platt> {
    if decisions.len() != positive.len() {
        return Err(Error::DimensionMismatch("decisions vs labels".into()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count() as f64;
    let n_neg = positive.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = positive.iter().map(|&p| if p { hi } else { lo }).collect();
    let prior_b = ((n_neg + 1.0) / (n_pos + 1.0)).ln();

    let first = decisions[0];
    if decisions.iter().all(|&d| d == first) {
        return Ok(Platt { a: 0.0, b: prior_b });
    }

    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    const EPS: f64 = 1e-8;

    let nll = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = a * f + b;
                if z >= 0.0 {
                    t * z + (1.0 + (-z).exp()).ln()
                } else {
                    (t - 1.0) * z + (1.0 + z.exp()).ln()
                }
            })
            .sum()
    };

    let (mut a, mut b) = (0.0, prior_b);
    let mut fval = nll(a, b);
    for _ in 0..max_iter {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &t) in decisions.iter().zip(&targets) {
            let z = a * f + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < EPS && g2.abs() < EPS {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut accepted = false;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = nll(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
    }
    Ok(Platt { a, b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint_and_symmetry() {
        let p = Platt { a: -1.0, b: 0.0 };
        assert_eq!(p.probability(0.0), 0.5);
        for d in [0.3, 2.0, 8.0] {
            assert!((p.probability(d) + p.probability(-d) - 1.0).abs() < 1e-15);
            assert!(p.probability(d) > p.probability(d - 0.1));
        }
    }

    #[test]
    fn separated_decisions_give_monotone_probabilities() {
        let d = [-1.0, -1.0, 1.0, 1.0];
        let p = fit_platt(&d, &[false, false, true, true], 100).unwrap();
        assert!(p.a < 0.0);
        let probs: Vec<f64> = [-2.0, -1.0, 0.0, 1.0, 2.0]
            .iter()
            .map(|&x| p.probability(x))
            .collect();
        assert!(probs.windows(2).all(|w| w[0] < w[1]));
        assert!(probs.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn degenerate_decisions_fall_back_to_prior() {
        let p = fit_platt(&[0.2; 5], &[true, true, true, false, false], 100).unwrap();
        assert_eq!(p.a, 0.0);
        assert!((p.probability(123.0) - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn flipped_labels_flip_slope() {
        let d = [-2.0, -0.5, 0.1, 0.4, 1.5, -0.2];
        let y = [false, false, true, true, true, true];
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let p = fit_platt(&d, &y, 100).unwrap();
        let q = fit_platt(&d, &flipped, 100).unwrap();
        assert!(p.a < 0.0 && q.a > 0.0);
        assert!(p.probability(1.0) > p.probability(-1.0));
        assert!(q.probability(1.0) < q.probability(-1.0));
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(
            fit_platt(&[1.0, 2.0], &[true, true], 10),
            Err(Error::SingleClass)
        ));
    }
}
