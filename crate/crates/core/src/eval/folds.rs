//! Stratified and grouped k-fold splits.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FoldStrategy {
    Stratified,
    Grouped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub strategy: FoldStrategy,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
}

fn assemble(n: usize, k: usize, assignment: &[usize]) -> Vec<Fold> {
    (0..k)
        .map(|f| {
            let (valid, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| assignment[i] == f);
            Fold { train, valid }
        })
        .collect()
}

/// Splits rows into `spec.k` folds. Stratified folds shuffle each class and
/// deal rows round-robin, so per-fold class counts differ by at most one.
/// Grouped folds do the same with whole groups (a group takes the label of
/// its first row), so no group ever straddles train and validation.
pub fn make_folds(
    labels: &[Label],
    groups: Option<&[String]>,
    spec: &FoldSpec,
) -> Result<Vec<Fold>> {
    let n = labels.len();
    if spec.k < 2 {
        return Err(Error::InvalidParams(format!(
            "k = {} (need at least 2 folds)",
            spec.k
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut assignment = vec![0usize; n];
    match spec.strategy {
        FoldStrategy::Stratified => {
            if spec.k > n {
                return Err(Error::TooFewSamples {
                    k: spec.k,
                    samples: n,
                });
            }
            let mut next = 0;
            for class in [Label::AD, Label::Control] {
                let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
                idx.shuffle(&mut rng);
                for i in idx {
                    assignment[i] = next % spec.k;
                    next += 1;
                }
            }
        }
        FoldStrategy::Grouped => {
            let groups = groups.ok_or_else(|| {
                Error::InvalidParams("grouped folds need a group id on every row".into())
            })?;
            if groups.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{} group ids for {} rows",
                    groups.len(),
                    n
                )));
            }
            let mut members: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
            for (i, g) in groups.iter().enumerate() {
                members.entry(g.as_str()).or_default().push(i);
            }
            if spec.k > members.len() {
                return Err(Error::TooFewGroups {
                    k: spec.k,
                    groups: members.len(),
                });
            }
            let mut next = 0;
            for class in [Label::AD, Label::Control] {
                let mut ids: Vec<&str> = members
                    .iter()
                    .filter(|(_, rows)| labels[rows[0]] == class)
                    .map(|(g, _)| *g)
                    .collect();
                ids.shuffle(&mut rng);
                for g in ids {
                    for &i in &members[g] {
                        assignment[i] = next % spec.k;
                    }
                    next += 1;
                }
            }
        }
    }
    Ok(assemble(n, spec.k, &assignment))
}
