//! SMO solver for the box-constrained dual
//!
//! ```text
//! min  1/2 a'Qa + p'a   s.t.  y'a = const,  0 <= a_t <= C
//! Q_st = y_s y_t K(map(s), map(t))
//! ```
//!
//! Both SVC (`p = -1`) and epsilon-SVR (`2n` variables) reduce to this form.
//! The working pair is the maximal violating pair; among equal violations the
//! earliest index in a seeded permutation wins.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TAU: f64 = 1e-12;

pub(crate) struct DualProblem<'a> {
    /// Gram matrix over the base points, row-major `n x n`.
    pub gram: &'a [f64],
    pub n: usize,
    /// Variable `t` uses base point `map[t]`.
    pub map: Vec<usize>,
    pub y: Vec<f64>,
    pub p: Vec<f64>,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    /// Primal-form objective `1/2 a'Qa + p'a` after every accepted pair update.
    /// The dual objective is its negation.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl<'a> DualProblem<'a> {
    fn k(&self, s: usize, t: usize) -> f64 {
        self.gram[self.map[s] * self.n + self.map[t]]
    }

    fn in_up(&self, t: usize, a: f64) -> bool {
        if self.y[t] > 0.0 {
            a < self.c
        } else {
            a > 0.0
        }
    }

    fn in_low(&self, t: usize, a: f64) -> bool {
        if self.y[t] > 0.0 {
            a > 0.0
        } else {
            a < self.c
        }
    }

    pub fn solve(&self, tol: f64, max_iter: usize, seed: u64) -> DualSolution {
        let l = self.y.len();
        let mut alpha = vec![0.0; l];
        let mut grad = self.p.clone();
        let mut order: Vec<usize> = (0..l).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

        let mut objective = 0.0;
        let mut trace = vec![objective];
        let mut iterations = 0;
        let mut converged = false;

        while iterations < max_iter {
            let (mut i, mut m) = (usize::MAX, f64::NEG_INFINITY);
            let (mut j, mut big_m) = (usize::MAX, f64::INFINITY);
            for &t in &order {
                let v = -self.y[t] * grad[t];
                if self.in_up(t, alpha[t]) && v > m {
                    m = v;
                    i = t;
                }
                if self.in_low(t, alpha[t]) && v < big_m {
                    big_m = v;
                    j = t;
                }
            }
            if i == usize::MAX || j == usize::MAX || m - big_m < tol {
                converged = true;
                break;
            }
            iterations += 1;

            // a_i += y_i t, a_j -= y_j t keeps y'a fixed.
            let curvature = self.k(i, i) + self.k(j, j) - 2.0 * self.k(i, j);
            let b = m - big_m;
            let unconstrained = b / if curvature > 0.0 { curvature } else { TAU };
            let bound_i = if self.y[i] > 0.0 {
                self.c - alpha[i]
            } else {
                alpha[i]
            };
            let bound_j = if self.y[j] > 0.0 {
                alpha[j]
            } else {
                self.c - alpha[j]
            };
            let step = unconstrained.min(bound_i).min(bound_j);
            let clip_i = bound_i <= step;
            let clip_j = bound_j <= step;

            alpha[i] = if clip_i {
                if self.y[i] > 0.0 {
                    self.c
                } else {
                    0.0
                }
            } else {
                alpha[i] + self.y[i] * step
            };
            alpha[j] = if clip_j {
                if self.y[j] > 0.0 {
                    0.0
                } else {
                    self.c
                }
            } else {
                alpha[j] - self.y[j] * step
            };

            for (t, g) in grad.iter_mut().enumerate() {
                *g += self.y[t] * step * (self.k(t, i) - self.k(t, j));
            }
            objective += -b * step + 0.5 * curvature * step * step;
            trace.push(objective);
        }

        let bias = self.bias(&alpha, &grad);
        DualSolution {
            alpha,
            bias,
            objective_trace: trace,
            iterations,
            converged,
        }
    }

    fn bias(&self, alpha: &[f64], grad: &[f64]) -> f64 {
        let mut sum = 0.0;
        let mut free = 0usize;
        let mut m = f64::NEG_INFINITY;
        let mut big_m = f64::INFINITY;
        for t in 0..alpha.len() {
            let v = -self.y[t] * grad[t];
            if alpha[t] > 0.0 && alpha[t] < self.c {
                sum += v;
                free += 1;
            }
            if self.in_up(t, alpha[t]) {
                m = m.max(v);
            }
            if self.in_low(t, alpha[t]) {
                big_m = big_m.min(v);
            }
        }
        if free > 0 {
            sum / free as f64
        } else if m.is_finite() && big_m.is_finite() {
            0.5 * (m + big_m)
        } else if m.is_finite() {
            m
        } else {
            big_m
        }
    }
}

/// `1/2 a'Qa + p'a` evaluated directly, for audits.
#[cfg(test)]
pub(crate) fn objective(problem: &DualProblem<'_>, alpha: &[f64]) -> f64 {
    let l = alpha.len();
    let mut quad = 0.0;
    for s in 0..l {
        if alpha[s] == 0.0 {
            continue;
        }
        for t in 0..l {
            quad += alpha[s] * alpha[t] * problem.y[s] * problem.y[t] * problem.k(s, t);
        }
    }
    0.5 * quad + problem.p.iter().zip(alpha).map(|(p, a)| p * a).sum::<f64>()
}
