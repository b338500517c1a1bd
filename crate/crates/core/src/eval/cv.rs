use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::ForestConfig;
use crate::labeling::ProgressionClass;
use crate::matrix::FeatureMatrix;
use crate::preprocess::{fit_transform, PreprocessPlan};
use crate::seed;
use crate::strategies::{train_strategy, StrategyKind};

use super::folds::{stratified_kfold, FoldAssignment};
use super::knn::knn_votes;
use super::store::{ConfigRecord, Prediction, PredictionStore, Run, RunKey};

/// A learner evaluated by cross-validation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Learner {
    Forest { strategy: StrategyKind, config: ForestConfig },
    /// Scale-sensitive; its transforms are always fitted with min-max scaling.
    Knn { k: usize },
}

impl Learner {
    pub fn label(&self) -> String {
        match self {
            Learner::Forest { strategy, config } => format!("{strategy}-{}", config.label()),
            Learner::Knn { k } => format!("knn-{k}"),
        }
    }

    fn needs_scaling(&self) -> bool {
        matches!(self, Learner::Knn { .. })
    }

    /// Trains on `train` and predicts every row of `test`.
    pub fn fit_predict(
        &self,
        train: &FeatureMatrix,
        train_classes: &[ProgressionClass],
        test: &FeatureMatrix,
        dataset: &Dataset,
        model_seed: u64,
    ) -> Result<Vec<Prediction>> {
        match self {
            Learner::Forest { strategy, config } => {
                let config = config.with_seed(model_seed);
                let model = train_strategy(*strategy, train, train_classes, &config, &dataset.distribution)?;
                Ok(model
                    .predict_matrix(test)?
                    .into_iter()
                    .map(|p| Prediction {
                        class: p.class,
                        p_p: p.p_p,
                        p_s: p.p_s,
                    })
                    .collect())
            }
            Learner::Knn { k } => {
                let labels: Vec<usize> = train_classes.iter().map(|c| c.index()).collect();
                let votes = knn_votes(train, &labels, test, *k, 4)?;
                Ok(votes
                    .iter()
                    .map(|v| {
                        let mut best = 0;
                        for c in 1..4 {
                            if v[c] > v[best] {
                                best = c;
                            }
                        }
                        Prediction {
                            class: ProgressionClass::from_index(best),
                            p_p: v[1] + v[3],
                            p_s: v[2] + v[3],
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvPlan {
    pub n_repeats: usize,
    pub k: usize,
    pub n_seeds: usize,
    pub master_seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            n_repeats: 10,
            k: 10,
            n_seeds: 25,
            master_seed: 0,
        }
    }
}

impl CvPlan {
    /// Model seeds, shared by every fold and repeat.
    pub fn model_seeds(&self) -> Vec<u64> {
        (0..self.n_seeds)
            .map(|i| seed::derive(self.master_seed, "model", &[i as u64]))
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if self.n_repeats == 0 || self.n_seeds == 0 || self.k < 2 {
            return Err(Error::InvalidPlan(format!(
                "need repeats ≥ 1, seeds ≥ 1, k ≥ 2 (got {}, {}, {})",
                self.n_repeats, self.n_seeds, self.k
            )));
        }
        Ok(())
    }
}

const MAX_PARTITION_ATTEMPTS: u64 = 100;

/// Stratified partition of one repeat; redrawn while a training fold lacks a class.
pub fn partition(classes: &[usize], k: usize, master: u64, repeat: usize) -> Result<(FoldAssignment, u32)> {
    if classes.len() < k {
        return Err(Error::InvalidInput(format!("{} instances cannot fill {k} folds", classes.len())));
    }
    let present: Vec<usize> = {
        let mut v = classes.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    for attempt in 0..MAX_PARTITION_ATTEMPTS {
        let mut rng = seed::rng(master, "partition", &[repeat as u64, attempt]);
        let folds = stratified_kfold(classes, k, &mut rng)?;
        let ok = (0..k).all(|f| {
            present.iter().all(|&c| {
                classes
                    .iter()
                    .zip(&folds.fold_of)
                    .any(|(&cl, &fo)| cl == c && fo != f)
            })
        });
        if ok {
            return Ok((folds, attempt as u32));
        }
    }
    Err(Error::InvalidInput(format!(
        "no partition with every class in every training fold after {MAX_PARTITION_ATTEMPTS} draws"
    )))
}

/// Repeated stratified k-fold CV of several learners on shared partitions.
///
/// Transforms are fitted on each training fold; the same model seeds are
/// used in every fold and repeat. Predictions of the k test folds are pooled
/// per (learner, repeat, seed).
pub fn run_cv(dataset: &Dataset, learners: &[Learner], plan: &CvPlan, prep: &PreprocessPlan) -> Result<PredictionStore> {
    plan.validate()?;
    if learners.is_empty() {
        return Err(Error::InvalidInput("no configurations to evaluate".into()));
    }
    let classes = dataset.class_indices();
    let partitions = (0..plan.n_repeats)
        .map(|r| partition(&classes, plan.k, plan.master_seed, r))
        .collect::<Result<Vec<_>>>()?;
    let seeds = plan.model_seeds();

    let tasks: Vec<(usize, usize)> = (0..plan.n_repeats)
        .flat_map(|r| (0..plan.k).map(move |f| (r, f)))
        .collect();
    let fold_results = tasks
        .par_iter()
        .map(|&(r, f)| {
            let folds = &partitions[r].0;
            let train_idx = folds.train_indices(f);
            let test_idx = folds.test_indices(f);
            let train_classes: Vec<ProgressionClass> = train_idx.iter().map(|&i| dataset.classes[i]).collect();
            let mut matrices = [None, None];
            for scaled in [false, true] {
                if learners.iter().any(|l| l.needs_scaling() == scaled) {
                    let plan = PreprocessPlan { scaling: scaled, ..prep.clone() };
                    let t = fit_transform(&dataset.frame, &train_idx, &plan)?;
                    matrices[usize::from(scaled)] =
                        Some((t.apply_rows(&dataset.frame, &train_idx), t.apply_rows(&dataset.frame, &test_idx)));
                }
            }
            let jobs: Vec<(usize, usize)> = (0..learners.len())
                .flat_map(|c| (0..seeds.len()).map(move |s| (c, s)))
                .collect();
            let preds = jobs
                .par_iter()
                .map(|&(c, s)| {
                    let (train, test) = matrices[usize::from(learners[c].needs_scaling())]
                        .as_ref()
                        .expect("matrix prepared for learner");
                    learners[c]
                        .fit_predict(train, &train_classes, test, dataset, seeds[s])
                        .map(|p| ((c, s), p))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((r, test_idx, preds))
        })
        .collect::<Result<Vec<_>>>()?;

    let placeholder = Prediction {
        class: ProgressionClass::N,
        p_p: f64::NAN,
        p_s: f64::NAN,
    };
    let mut pooled = vec![vec![placeholder; dataset.len()]; plan.n_repeats * learners.len() * seeds.len()];
    let slot = |c: usize, r: usize, s: usize| (c * plan.n_repeats + r) * seeds.len() + s;
    for (r, test_idx, preds) in fold_results {
        for ((c, s), p) in preds {
            let run = &mut pooled[slot(c, r, s)];
            for (&i, pi) in test_idx.iter().zip(p) {
                run[i] = pi;
            }
        }
    }

    let configs = learners
        .iter()
        .map(|l| ConfigRecord {
            label: l.label(),
            learner: l.clone(),
        })
        .collect();
    let folds = partitions.iter().map(|(p, _)| p.fold_of.clone()).collect();
    let mut store = PredictionStore::new(dataset.ids.clone(), dataset.classes.clone(), configs, seeds.clone(), folds);
    store.partition_redraws = partitions.iter().map(|(_, a)| *a).collect();
    for c in 0..learners.len() {
        for r in 0..plan.n_repeats {
            for s in 0..seeds.len() {
                let predictions = std::mem::take(&mut pooled[slot(c, r, s)]);
                store.insert(Run {
                    key: RunKey { config: c, repeat: r, seed: s },
                    predictions,
                })?;
            }
        }
    }
    Ok(store)
}

/// Repeated CV of one strategy/configuration.
pub fn repeated_cv(
    dataset: &Dataset,
    strategy: StrategyKind,
    config: &ForestConfig,
    plan: &CvPlan,
    prep: &PreprocessPlan,
) -> Result<PredictionStore> {
    run_cv(
        dataset,
        &[Learner::Forest {
            strategy,
            config: config.clone(),
        }],
        plan,
        prep,
    )
}
