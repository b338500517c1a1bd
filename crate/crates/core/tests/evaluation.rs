mod common;

use oaprog::cohort::Value;
use oaprog::eval::{
    bbc_cv, learning_curve, partition, roc_curve, run_cv, score_configuration, CurveMode, CurvePlan, CvPlan, Learner,
    PredictionStore,
};
use oaprog::forest::ForestConfig;
use oaprog::labeling::ProgressionClass::{self, N, P, PS, S};
use oaprog::preprocess::{fit_transform, PreprocessPlan};
use oaprog::seed;
use oaprog::strategies::StrategyKind;

fn small_forest() -> ForestConfig {
    ForestConfig {
        n_trees: 10,
        max_depth: Some(5),
        ..ForestConfig::default()
    }
}

fn duo() -> Learner {
    Learner::Forest {
        strategy: StrategyKind::Duo,
        config: small_forest(),
    }
}

/// 1-NN on one feature, two folds. Every fold holds one member of each
/// class, so the prediction of each instance is fixed whatever the
/// partition: the P at 2 is nearest to an N, the P at 30 nearest to an S,
/// and everything else finds its own class.
#[test]
fn two_fold_nearest_neighbour_trace() {
    let values = [0.0, 1.0, 2.0, 30.0, 50.0, 51.0, 70.0, 71.0];
    let classes = [N, N, P, P, S, S, PS, PS];
    let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
    let ds = common::numeric_dataset(&rows, &classes);
    let plan = CvPlan { n_repeats: 3, k: 2, n_seeds: 2, master_seed: 4 };
    let store = run_cv(&ds, &[Learner::Knn { k: 1 }], &plan, &PreprocessPlan::default()).unwrap();
    let expected = [N, N, N, S, S, S, PS, PS];
    for run in store.runs() {
        let got: Vec<ProgressionClass> = run.predictions.iter().map(|p| p.class).collect();
        assert_eq!(got, expected);
        // F1: N 2·2/(2+3), P 0, S 2·2/(2+3), PS 1; each class weighted 1/4
        assert!((store.run_score(run) - 0.65).abs() < 1e-12);
    }
    let summary = score_configuration(&store, 0).unwrap();
    assert!((summary.median - 0.65).abs() < 1e-12);
    assert_eq!(summary.mad, 0.0);
}

#[test]
fn store_covers_every_run_and_is_deterministic() {
    let mut rng = seed::rng(1, "eval-store", &[]);
    let ds = common::gaussian_dataset(&mut rng, 120, 5, 1.5);
    let plan = CvPlan { n_repeats: 3, k: 4, n_seeds: 2, master_seed: 17 };
    let learners = [duo(), Learner::Knn { k: 3 }];
    let a = run_cv(&ds, &learners, &plan, &PreprocessPlan::default()).unwrap();
    a.check_complete().unwrap();
    assert_eq!(a.runs().len(), 2 * 3 * 2);
    for run in a.runs() {
        assert_eq!(run.predictions.len(), ds.len());
        assert!(run.predictions.iter().all(|p| p.p_p.is_finite() && p.p_s.is_finite()));
    }
    for (r, folds) in a.folds.iter().enumerate() {
        assert_eq!(folds, &partition(&ds.class_indices(), 4, 17, r).unwrap().0.fold_of);
    }
    let b = run_cv(&ds, &learners, &plan, &PreprocessPlan::default()).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    assert_eq!(PredictionStore::from_json(&a.to_json().unwrap()).unwrap(), a);
}

#[test]
fn learning_curve_modes_share_test_folds() {
    let mut rng = seed::rng(2, "eval-curve", &[]);
    let ds = common::gaussian_dataset(&mut rng, 160, 4, 1.5);
    let cv = CvPlan { n_repeats: 2, k: 4, n_seeds: 1, master_seed: 5 };
    let curve = |mode| {
        let plan = CurvePlan { fractions: vec![0.3, 0.6, 1.0], mode, n_samples: 3, per_class: None };
        learning_curve(&ds, &duo(), &cv, &plan, &PreprocessPlan::default()).unwrap()
    };
    let full = curve(CurveMode::FullImbalanced);
    let balanced = curve(CurveMode::BalancedDownsample);
    assert_eq!(full.folds, balanced.folds);
    let store = run_cv(&ds, &[duo()], &cv, &PreprocessPlan::default()).unwrap();
    assert_eq!(full.folds, store.folds);
    // at fraction 1 the full curve trains on the run_cv training sets
    let last = full.points.last().unwrap();
    let cv_summary = score_configuration(&store, 0).unwrap();
    assert!((last.median - cv_summary.median).abs() < 1e-12);
    for w in full.points.windows(2) {
        assert!(w[0].mean_train_size < w[1].mean_train_size);
    }
}

#[test]
fn single_configuration_bbc_matches_its_cv_score() {
    let mut rng = seed::rng(3, "eval-bbc", &[]);
    let ds = common::gaussian_dataset(&mut rng, 300, 6, 2.0);
    let cv = CvPlan { n_repeats: 2, k: 5, n_seeds: 1, master_seed: 8 };
    let store = run_cv(&ds, &[duo()], &cv, &PreprocessPlan::default()).unwrap();
    let bbc = bbc_cv(&store, 500, 3).unwrap();
    assert_eq!(bbc.wins, vec![500]);
    assert!(bbc.ci_low <= bbc.estimate && bbc.estimate <= bbc.ci_high);
    // With nothing to choose from there is no selection bias to remove.
    assert!((bbc.estimate - store.pooled_score(0)).abs() < 0.02, "{} vs {}", bbc.estimate, store.pooled_score(0));
}

#[test]
fn duo_probabilities_are_uninformative_on_null_data() {
    let mut rng = seed::rng(4, "eval-null", &[]);
    let ds = common::gaussian_dataset(&mut rng, 400, 6, 0.0);
    let cv = CvPlan { n_repeats: 1, k: 5, n_seeds: 1, master_seed: 2 };
    let store = run_cv(&ds, &[duo()], &cv, &PreprocessPlan::default()).unwrap();
    let run = &store.runs()[0];
    for bit in [0usize, 1] {
        let scores: Vec<f64> = run.predictions.iter().map(|p| if bit == 0 { p.p_p } else { p.p_s }).collect();
        let truth: Vec<bool> = ds.classes.iter().map(|c| if bit == 0 { c.label_pair().p } else { c.label_pair().s }).collect();
        let auc = roc_curve(&scores, &truth).unwrap().auc;
        assert!((auc - 0.5).abs() < 0.1, "bit {bit}: AUC {auc}");
    }
}

#[test]
fn duo_probabilities_track_signal() {
    let mut rng = seed::rng(5, "eval-signal", &[]);
    let ds = common::gaussian_dataset(&mut rng, 300, 6, 2.5);
    let cv = CvPlan { n_repeats: 1, k: 5, n_seeds: 1, master_seed: 2 };
    let store = run_cv(&ds, &[duo()], &cv, &PreprocessPlan::default()).unwrap();
    let run = &store.runs()[0];
    let scores: Vec<f64> = run.predictions.iter().map(|p| p.p_p).collect();
    let truth: Vec<bool> = ds.classes.iter().map(|c| c.label_pair().p).collect();
    assert!(roc_curve(&scores, &truth).unwrap().auc > 0.8);
}

#[test]
fn transforms_ignore_test_rows() {
    let mut rng = seed::rng(6, "eval-leak", &[]);
    let ds = common::gaussian_dataset(&mut rng, 60, 4, 1.0);
    let train: Vec<usize> = (0..40).collect();
    let plan = PreprocessPlan { scaling: true, ..PreprocessPlan::default() };
    let a = fit_transform(&ds.frame, &train, &plan).unwrap();
    let mut perturbed = ds.frame.clone();
    for row in &mut perturbed.rows[40..] {
        for v in row.iter_mut() {
            *v = Some(Value::Num(1e6));
        }
    }
    let b = fit_transform(&perturbed, &train, &plan).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.apply_rows(&ds.frame, &train), b.apply_rows(&perturbed, &train));
}
