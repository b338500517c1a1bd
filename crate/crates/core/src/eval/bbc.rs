use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

use super::metrics::ConfusionMatrix;
use super::stats::percentile;
use super::store::PredictionStore;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbcResult {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub oob_scores: Vec<f64>,
    /// How often each configuration won a bootstrap.
    pub wins: Vec<usize>,
    pub redraws: usize,
}

const MAX_REDRAWS: usize = 1000;

/// Bootstrap bias-corrected CV over every configuration in `store`.
///
/// The bootstrap unit is the instance: all its (repeat, seed) predictions
/// move together. Each bootstrap picks the configuration with the best
/// pooled in-bag weighted F1 (ties → lowest index) and scores it on the
/// out-of-bag instances.
pub fn bbc_cv(store: &PredictionStore, n_boot: usize, master_seed: u64) -> Result<BbcResult> {
    store.check_complete()?;
    let n = store.n_instances();
    let n_cfg = store.n_configs();
    if n == 0 || n_boot == 0 {
        return Err(Error::InvalidInput("BBC-CV needs instances and bootstraps".into()));
    }
    // counts[(config * n + i) * 4 + class]: predictions of instance i as class.
    let mut counts = vec![0u32; n_cfg * n * 4];
    for run in store.runs() {
        let c = run.key.config;
        for (i, p) in run.predictions.iter().enumerate() {
            counts[(c * n + i) * 4 + p.class.index()] += 1;
        }
    }
    let truth: Vec<usize> = store.truth.iter().map(|c| c.index()).collect();
    let score = |c: usize, mult: &[u32], oob: bool| {
        let mut m = ConfusionMatrix::new(4);
        for i in 0..n {
            let w = if oob { u32::from(mult[i] == 0) } else { mult[i] };
            if w == 0 {
                continue;
            }
            for k in 0..4 {
                let x = counts[(c * n + i) * 4 + k];
                if x > 0 {
                    m.add(truth[i], k, u64::from(w) * u64::from(x));
                }
            }
        }
        m.weighted_f1()
    };

    let results = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut redraws = 0;
            loop {
                let mut rng = seed::rng(master_seed, "bootstrap", &[b as u64, redraws as u64]);
                let mut mult = vec![0u32; n];
                for _ in 0..n {
                    mult[rng.random_range(0..n)] += 1;
                }
                if mult.iter().all(|&m| m > 0) {
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return Err(Error::InvalidInput("every bootstrap left no out-of-bag instance".into()));
                    }
                    continue;
                }
                let mut winner = 0;
                let mut best = f64::NEG_INFINITY;
                for c in 0..n_cfg {
                    let s = score(c, &mult, false);
                    if s > best {
                        best = s;
                        winner = c;
                    }
                }
                return Ok((winner, score(winner, &mult, true), redraws));
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut wins = vec![0; n_cfg];
    let mut oob_scores = Vec::with_capacity(n_boot);
    let mut redraws = 0;
    for (w, s, r) in results {
        wins[w] += 1;
        oob_scores.push(s);
        redraws += r;
    }
    Ok(BbcResult {
        estimate: oob_scores.iter().sum::<f64>() / n_boot as f64,
        ci_low: percentile(&oob_scores, 2.5),
        ci_high: percentile(&oob_scores, 97.5),
        oob_scores,
        wins,
        redraws,
    })
}
