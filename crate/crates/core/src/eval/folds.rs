use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled and dealt so that its per-fold counts differ by at
/// most one. Remainder members go to the currently smallest folds, ties
/// broken at random, which also keeps total fold sizes within one.
pub fn stratified_kfold(classes: &[usize], k: usize, rng: &mut Rng) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k = {k}; need at least 2 folds")));
    }
    let n_classes = classes.iter().max().map_or(0, |m| m + 1);
    let mut fold_of = vec![0usize; classes.len()];
    let mut sizes = vec![0usize; k];
    for c in 0..n_classes {
        let mut members: Vec<usize> = (0..classes.len()).filter(|&i| classes[i] == c).collect();
        // Fisher-Yates
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        let base = members.len() / k;
        let remainder = members.len() % k;
        let mut order: Vec<(usize, u64, usize)> = (0..k).map(|f| (sizes[f], rng.random::<u64>(), f)).collect();
        order.sort_unstable();
        let mut quota = vec![base; k];
        for &(_, _, f) in order.iter().take(remainder) {
            quota[f] += 1;
        }
        let mut it = members.into_iter();
        for f in 0..k {
            for _ in 0..quota[f] {
                fold_of[it.next().expect("quota sums to class size")] = f;
            }
            sizes[f] += quota[f];
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
