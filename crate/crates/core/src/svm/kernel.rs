use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::sparse::{Row, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Rbf,
    Sigmoid,
}

/// Squared Euclidean distance by sorted merge, so `sq_dist(x, x) == 0` exactly.
pub fn sq_dist(a: &Row<'_>, b: &Row<'_>) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.indices.len() || j < b.indices.len() {
        let ci = a.indices.get(i).copied().unwrap_or(usize::MAX);
        let cj = b.indices.get(j).copied().unwrap_or(usize::MAX);
        let d = match ci.cmp(&cj) {
            std::cmp::Ordering::Less => {
                i += 1;
                a.values[i - 1]
            }
            std::cmp::Ordering::Greater => {
                j += 1;
                -b.values[j - 1]
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
                a.values[i - 1] - b.values[j - 1]
            }
        };
        acc += d * d;
    }
    acc
}

/// `rbf = exp(-gamma * |x1 - x2|^2)`, `sigmoid = tanh(gamma * <x1, x2> + coef0)`.
pub fn kernel_eval(kernel: Kernel, gamma: f64, coef0: f64, x1: &Row<'_>, x2: &Row<'_>) -> f64 {
    match kernel {
        Kernel::Rbf => (-gamma * sq_dist(x1, x2)).exp(),
        Kernel::Sigmoid => (gamma * x1.dot(x2) + coef0).tanh(),
    }
}

/// Dense row-major Gram matrix between the rows of `a` and `b`.
pub(crate) fn gram(
    kernel: Kernel,
    gamma: f64,
    coef0: f64,
    a: &SparseMatrix,
    b: &SparseMatrix,
) -> Vec<f64> {
    let mut k = vec![0.0; a.rows * b.rows];
    if b.rows == 0 {
        return k;
    }
    k.par_chunks_mut(b.rows).enumerate().for_each(|(i, out)| {
        let ri = a.row(i);
        for (j, o) in out.iter_mut().enumerate() {
            *o = kernel_eval(kernel, gamma, coef0, &ri, &b.row(j));
        }
    });
    k
}
