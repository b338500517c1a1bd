//! Confusion matrices and the support-weighted F1 score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K×K counts, rows = true class, columns = predicted class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> ConfusionMatrix {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_labels(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidInput(format!(
                "{} true labels vs {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut m = ConfusionMatrix::new(k);
        for (&t, &p) in truth.iter().zip(predicted) {
            if t >= k || p >= k {
                return Err(Error::InvalidInput(format!("label outside 0..{k}")));
            }
            m.add(t, p, 1);
        }
        Ok(m)
    }

    #[inline]
    pub fn add(&mut self, truth: usize, predicted: usize, n: u64) {
        self.counts[truth * self.k + predicted] += n;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.k + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Support-weighted mean of per-class F1; classes with no true and no
    /// predicted members score 0 (and carry zero weight anyway).
    pub fn weighted_f1(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let mut score = 0.0;
        for c in 0..self.k {
            let support: u64 = (0..self.k).map(|p| self.get(c, p)).sum();
            if support == 0 {
                continue;
            }
            let predicted: u64 = (0..self.k).map(|t| self.get(t, c)).sum();
            let tp = self.get(c, c);
            let f1 = 2.0 * tp as f64 / (support + predicted) as f64;
            score += support as f64 / total as f64 * f1;
        }
        score
    }
}

/// Weighted F1 over arbitrary non-negative class labels.
pub fn weighted_f1(truth: &[usize], predicted: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::InvalidInput("weighted F1 of an empty prediction set".into()));
    }
    let k = truth.iter().chain(predicted).max().map_or(0, |m| m + 1);
    Ok(ConfusionMatrix::from_labels(truth, predicted, k)?.weighted_f1())
}
