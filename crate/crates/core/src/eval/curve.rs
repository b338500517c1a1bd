use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::labeling::ProgressionClass;
use crate::preprocess::{fit_transform, PreprocessPlan};
use crate::seed;

use super::cv::{partition, CvPlan, Learner};
use super::metrics::ConfusionMatrix;
use super::stats::{mad, median};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveMode {
    /// Stratified fractions of the whole (imbalanced) training fold.
    FullImbalanced,
    /// Class-balanced subsamples of the training fold.
    BalancedDownsample,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurvePlan {
    pub fractions: Vec<f64>,
    pub mode: CurveMode,
    /// Balanced subsamples per training fold.
    pub n_samples: usize,
    /// Members per class in a balanced subsample; default is the smallest
    /// training class. Always capped at the smallest training class.
    pub per_class: Option<usize>,
}

impl Default for CurvePlan {
    fn default() -> Self {
        CurvePlan {
            fractions: (1..=10).map(|i| f64::from(i) / 10.0).collect(),
            mode: CurveMode::FullImbalanced,
            n_samples: 11,
            per_class: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub mean_train_size: f64,
    /// Median over subsamples of the median-of-medians.
    pub median: f64,
    /// MAD of the per-(subsample, repeat) medians.
    pub mad: f64,
    pub min: f64,
    pub max: f64,
    pub subsample_medians: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub mode: CurveMode,
    pub points: Vec<CurvePoint>,
    /// `folds[repeat][instance]`, shared with `run_cv` under the same plan.
    pub folds: Vec<Vec<usize>>,
}

fn shuffled(mut v: Vec<usize>, rng: &mut seed::Rng) -> Vec<usize> {
    v.shuffle(rng);
    v
}

fn take_count(fraction: f64, n: usize) -> usize {
    if n == 0 {
        0
    } else {
        ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
    }
}

/// Nested training subsets of one training fold: `subsets[sample][fraction]`.
fn training_subsets(
    train_idx: &[usize],
    classes: &[ProgressionClass],
    plan: &CurvePlan,
    master: u64,
    repeat: usize,
    fold: usize,
) -> Vec<Vec<Vec<usize>>> {
    let by_class: Vec<Vec<usize>> = ProgressionClass::ALL
        .iter()
        .map(|&c| train_idx.iter().copied().filter(|&i| classes[i] == c).collect())
        .collect();
    let n_samples = match plan.mode {
        CurveMode::FullImbalanced => 1,
        CurveMode::BalancedDownsample => plan.n_samples,
    };
    let smallest = by_class.iter().map(Vec::len).filter(|&n| n > 0).min().unwrap_or(0);
    (0..n_samples)
        .map(|s| {
            let mut rng = seed::rng(master, "subset", &[repeat as u64, fold as u64, s as u64]);
            let pools: Vec<Vec<usize>> = by_class
                .iter()
                .map(|members| {
                    let order = shuffled(members.clone(), &mut rng);
                    match plan.mode {
                        CurveMode::FullImbalanced => order,
                        CurveMode::BalancedDownsample => {
                            let m = plan.per_class.unwrap_or(smallest).min(smallest);
                            order.into_iter().take(m).collect()
                        }
                    }
                })
                .collect();
            plan.fractions
                .iter()
                .map(|&fr| {
                    let mut subset: Vec<usize> = pools
                        .iter()
                        .flat_map(|p| p[..take_count(fr, p.len())].iter().copied())
                        .collect();
                    subset.sort_unstable();
                    subset
                })
                .collect()
        })
        .collect()
}

/// Learning curve of one learner over repeated stratified CV.
///
/// Test folds are those of `run_cv` under the same plan, whatever the mode.
pub fn learning_curve(
    dataset: &Dataset,
    learner: &Learner,
    cv: &CvPlan,
    plan: &CurvePlan,
    prep: &PreprocessPlan,
) -> Result<LearningCurve> {
    if plan.fractions.is_empty() || plan.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidPlan("curve fractions must lie in (0, 1]".into()));
    }
    if plan.mode == CurveMode::BalancedDownsample && plan.n_samples == 0 {
        return Err(Error::InvalidPlan("balanced mode needs at least one subsample".into()));
    }
    let classes = dataset.class_indices();
    let partitions = (0..cv.n_repeats)
        .map(|r| partition(&classes, cv.k, cv.master_seed, r).map(|p| p.0))
        .collect::<Result<Vec<_>>>()?;
    let seeds = cv.model_seeds();
    let n_samples = match plan.mode {
        CurveMode::FullImbalanced => 1,
        CurveMode::BalancedDownsample => plan.n_samples,
    };
    let n_fr = plan.fractions.len();
    let prep = PreprocessPlan {
        scaling: matches!(learner, Learner::Knn { .. }),
        ..prep.clone()
    };

    struct Job {
        repeat: usize,
        sample: usize,
        fraction: usize,
        subset: Vec<usize>,
        test: Vec<usize>,
    }
    let mut jobs = Vec::new();
    for (r, folds) in partitions.iter().enumerate() {
        for f in 0..cv.k {
            let train = folds.train_indices(f);
            let test = folds.test_indices(f);
            let subsets = training_subsets(&train, &dataset.classes, plan, cv.master_seed, r, f);
            for (s, per_fraction) in subsets.into_iter().enumerate() {
                for (fi, subset) in per_fraction.into_iter().enumerate() {
                    jobs.push(Job {
                        repeat: r,
                        sample: s,
                        fraction: fi,
                        subset,
                        test: test.clone(),
                    });
                }
            }
        }
    }

    // confusion[(fraction, sample, repeat, seed)] accumulated over folds
    let slot = |fi: usize, s: usize, r: usize, sd: usize| ((fi * n_samples + s) * cv.n_repeats + r) * seeds.len() + sd;
    let outputs = jobs
        .par_iter()
        .map(|job| {
            let t = fit_transform(&dataset.frame, &job.subset, &prep)?;
            let train = t.apply_rows(&dataset.frame, &job.subset);
            let test = t.apply_rows(&dataset.frame, &job.test);
            let train_classes: Vec<ProgressionClass> = job.subset.iter().map(|&i| dataset.classes[i]).collect();
            let per_seed = seeds
                .par_iter()
                .map(|&sd| learner.fit_predict(&train, &train_classes, &test, dataset, sd))
                .collect::<Result<Vec<_>>>()?;
            Ok(per_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut confusion = vec![ConfusionMatrix::new(4); n_fr * n_samples * cv.n_repeats * seeds.len()];
    let mut sizes = vec![0usize; n_fr];
    for (job, per_seed) in jobs.iter().zip(outputs) {
        sizes[job.fraction] += job.subset.len();
        for (sd, preds) in per_seed.into_iter().enumerate() {
            let m = &mut confusion[slot(job.fraction, job.sample, job.repeat, sd)];
            for (&i, p) in job.test.iter().zip(preds) {
                m.add(dataset.classes[i].index(), p.class.index(), 1);
            }
        }
    }

    let fits_per_fraction = (n_samples * cv.n_repeats * cv.k) as f64;
    let points = plan
        .fractions
        .iter()
        .enumerate()
        .map(|(fi, &fraction)| {
            let mut all_scores = Vec::new();
            let mut cell_medians = Vec::new();
            let mut subsample_medians = Vec::new();
            for s in 0..n_samples {
                let mut repeat_medians = Vec::new();
                for r in 0..cv.n_repeats {
                    let scores: Vec<f64> = (0..seeds.len())
                        .map(|sd| confusion[slot(fi, s, r, sd)].weighted_f1())
                        .collect();
                    all_scores.extend_from_slice(&scores);
                    repeat_medians.push(median(&scores));
                }
                subsample_medians.push(median(&repeat_medians));
                cell_medians.extend(repeat_medians);
            }
            CurvePoint {
                fraction,
                mean_train_size: sizes[fi] as f64 / fits_per_fraction,
                median: median(&subsample_medians),
                mad: mad(&cell_medians),
                min: all_scores.iter().copied().fold(f64::INFINITY, f64::min),
                max: all_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                subsample_medians,
            }
        })
        .collect();
    Ok(LearningCurve {
        mode: plan.mode,
        points,
        folds: partitions.into_iter().map(|p| p.fold_of).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_nested_and_balanced() {
        let classes: Vec<ProgressionClass> = (0..200)
            .map(|i| ProgressionClass::from_index(if i < 120 { 0 } else if i < 150 { 1 } else if i < 190 { 2 } else { 3 }))
            .collect();
        let train: Vec<usize> = (0..200).collect();
        let plan = CurvePlan {
            fractions: vec![0.1, 0.5, 1.0],
            mode: CurveMode::BalancedDownsample,
            n_samples: 3,
            per_class: None,
        };
        let subsets = training_subsets(&train, &classes, &plan, 7, 0, 0);
        assert_eq!(subsets.len(), 3);
        for per_fraction in &subsets {
            for w in per_fraction.windows(2) {
                assert!(w[0].iter().all(|i| w[1].contains(i)));
            }
            let last = per_fraction.last().unwrap();
            for c in ProgressionClass::ALL {
                assert_eq!(last.iter().filter(|&&i| classes[i] == c).count(), 10);
            }
        }
        let full = CurvePlan {
            mode: CurveMode::FullImbalanced,
            ..plan
        };
        let subsets = training_subsets(&train, &classes, &full, 7, 0, 0);
        assert_eq!(subsets.len(), 1);
        assert_eq!(subsets[0][2], train);
        assert_eq!(subsets[0][0].len(), 12 + 3 + 4 + 1);
    }
}
