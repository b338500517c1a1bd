//! Recursive feature elimination with an inner stratified cross-validation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{partition, stratified_kfold, ConfusionMatrix, CvPlan};
use crate::forest::ForestConfig;
use crate::labeling::{ClassDistribution, ProgressionClass};
use crate::matrix::FeatureMatrix;
use crate::preprocess::{fit_transform, PreprocessPlan};
use crate::seed;
use crate::strategies::{train_strategy, StrategyKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    /// Active column indices, ascending.
    pub features: Vec<usize>,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeTrace {
    /// One step per subset size, from all columns down to one.
    pub steps: Vec<RfeStep>,
    /// Columns in the order they were removed; the survivor comes last.
    pub elimination_order: Vec<usize>,
    pub chosen: Vec<usize>,
    pub chosen_score: f64,
}

/// RFE on one training set.
///
/// Each step scores the active columns by pooled weighted F1 over fixed
/// inner stratified folds and drops the column with the lowest mean
/// importance over the inner models (ties → highest column index). The
/// chosen subset is the best-scoring one; ties go to the smaller subset.
pub fn rfe_select(
    x: &FeatureMatrix,
    classes: &[ProgressionClass],
    strategy: StrategyKind,
    config: &ForestConfig,
    full: &ClassDistribution,
    inner_k: usize,
    rng: &mut seed::Rng,
) -> Result<RfeTrace> {
    let d = x.n_cols();
    if d == 0 {
        return Err(Error::EmptyFeatureSpace);
    }
    let labels: Vec<usize> = classes.iter().map(|c| c.index()).collect();
    let folds = stratified_kfold(&labels, inner_k, rng)?;
    let fold_data: Vec<(Vec<usize>, Vec<usize>, Vec<ProgressionClass>)> = (0..inner_k)
        .map(|f| {
            let train = folds.train_indices(f);
            let cls = train.iter().map(|&i| classes[i]).collect();
            (train, folds.test_indices(f), cls)
        })
        .collect();

    let mut active: Vec<usize> = (0..d).collect();
    let mut steps = Vec::with_capacity(d);
    let mut elimination_order = Vec::with_capacity(d);
    loop {
        let xa = x.select_cols(&active);
        let per_fold = fold_data
            .par_iter()
            .map(|(train, test, cls)| {
                let model = train_strategy(strategy, &xa.select_rows(train), cls, config, full)?;
                let preds = model.predict_matrix(&xa.select_rows(test))?;
                Ok((model.importance(), preds))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = ConfusionMatrix::new(4);
        let mut importance = vec![0.0; active.len()];
        for ((imp, preds), (_, test, _)) in per_fold.iter().zip(&fold_data) {
            for (&i, p) in test.iter().zip(preds) {
                m.add(labels[i], p.class.index(), 1);
            }
            for (a, v) in importance.iter_mut().zip(imp) {
                *a += v / inner_k as f64;
            }
        }
        steps.push(RfeStep {
            features: active.clone(),
            score: m.weighted_f1(),
        });
        if active.len() == 1 {
            elimination_order.push(active[0]);
            break;
        }
        let mut worst = 0;
        for (i, &v) in importance.iter().enumerate() {
            if v <= importance[worst] {
                worst = i;
            }
        }
        elimination_order.push(active.remove(worst));
    }
    let mut best = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.score >= steps[best].score {
            best = i;
        }
    }
    Ok(RfeTrace {
        chosen: steps[best].features.clone(),
        chosen_score: steps[best].score,
        steps,
        elimination_order,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeRound {
    pub repeat: usize,
    pub fold: usize,
    pub feature_names: Vec<String>,
    pub trace: RfeTrace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfeReport {
    pub rounds: Vec<RfeRound>,
    /// Feature name → number of rounds whose chosen subset contains it.
    pub frequency: BTreeMap<String, usize>,
}

/// Selection counts per feature name over traces.
pub fn selection_frequency(rounds: &[RfeRound]) -> BTreeMap<String, usize> {
    let mut freq = BTreeMap::new();
    for r in rounds {
        for name in &r.feature_names {
            freq.entry(name.clone()).or_insert(0);
        }
        for &c in &r.trace.chosen {
            *freq.get_mut(&r.feature_names[c]).expect("inserted above") += 1;
        }
    }
    freq
}

/// RFE inside every outer training fold of a repeated CV plan.
///
/// The outer partitions are those of `run_cv` under the same plan. Only
/// the first model seed is used.
pub fn rfe_cross_validated(
    dataset: &Dataset,
    strategy: StrategyKind,
    config: &ForestConfig,
    cv: &CvPlan,
    prep: &PreprocessPlan,
    inner_k: usize,
) -> Result<RfeReport> {
    let classes = dataset.class_indices();
    let partitions = (0..cv.n_repeats)
        .map(|r| partition(&classes, cv.k, cv.master_seed, r).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let model_seed = seed::derive(cv.master_seed, "model", &[0]);
    let config = config.with_seed(model_seed);
    let jobs: Vec<(usize, usize)> = (0..cv.n_repeats).flat_map(|r| (0..cv.k).map(move |f| (r, f))).collect();
    let rounds = jobs
        .par_iter()
        .map(|&(r, f)| {
            let train = partitions[r].train_indices(f);
            let t = fit_transform(&dataset.frame, &train, prep)?;
            let x = t.apply_rows(&dataset.frame, &train);
            let cls: Vec<ProgressionClass> = train.iter().map(|&i| dataset.classes[i]).collect();
            let mut rng = seed::rng(cv.master_seed, "rfe", &[r as u64, f as u64]);
            let trace = rfe_select(&x, &cls, strategy, &config, &dataset.distribution, inner_k, &mut rng)?;
            Ok(RfeRound {
                repeat: r,
                fold: f,
                feature_names: t.feature_names(),
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RfeReport {
        frequency: selection_frequency(&rounds),
        rounds,
    })
}
