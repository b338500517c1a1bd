//! Scoring, repeated stratified cross-validation, learning curves, grid
//! tuning, bootstrap bias correction and ROC analysis.

mod bbc;
mod curve;
mod cv;
mod folds;
mod knn;
mod metrics;
mod roc;
mod score;
mod stats;
mod store;
mod tune;

pub use bbc::{bbc_cv, BbcResult};
pub use curve::{learning_curve, CurveMode, CurvePlan, CurvePoint, LearningCurve};
pub use cv::{partition, repeated_cv, run_cv, CvPlan, Learner};
pub use folds::{stratified_kfold, FoldAssignment};
pub use knn::{knn_baseline, knn_votes};
pub use metrics::{weighted_f1, ConfusionMatrix};
pub use roc::{roc_curve, RocCurve};
pub use score::{median_run, score_configuration, RunScore, ScoreSummary};
pub use stats::{binomial_ci_median, mad, median, median_index, percentile};
pub use store::{ConfigRecord, Prediction, PredictionStore, Run, RunKey, STORE_FORMAT_VERSION};
pub use tune::{default_grid, forest_grid, select_best, tune_grid, TuneResult, GRID_DEPTHS, GRID_TREES};
