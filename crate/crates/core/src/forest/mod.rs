//! Cost-sensitive CART trees and random forests.

mod tree;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use tree::{split_impurity, train_tree, Node, Tree};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// Number of candidate features examined at each split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// floor(sqrt(d)), at least 1.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(c) => c.min(d),
        };
        m.max(1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// `None` grows trees until leaves are pure.
    pub max_depth: Option<usize>,
    pub criterion: Criterion,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            criterion: Criterion::Gini,
            min_samples_split: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(&self, seed: u64) -> ForestConfig {
        ForestConfig { seed, ..self.clone() }
    }

    /// Short stable label, e.g. `t800-d9-entropy`.
    pub fn label(&self) -> String {
        let depth = self.max_depth.map_or("inf".to_string(), |d| d.to_string());
        let crit = match self.criterion {
            Criterion::Gini => "gini",
            Criterion::Entropy => "entropy",
        };
        format!("t{}-d{}-{}", self.n_trees, depth, crit)
    }
}

/// Positive per-class weights for one output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub Vec<f64>);

impl ClassWeights {
    pub fn uniform(n_classes: usize) -> ClassWeights {
        ClassWeights(vec![1.0; n_classes])
    }

    /// `w_c = N / (K · n_c)`; every class must be present.
    pub fn balanced(counts: &[usize]) -> Result<ClassWeights> {
        let total: usize = counts.iter().sum();
        let k = counts.len() as f64;
        counts
            .iter()
            .enumerate()
            .map(|(c, &n)| {
                if n == 0 {
                    Err(Error::AbsentClass(c.to_string()))
                } else {
                    Ok(total as f64 / (k * n as f64))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(ClassWeights)
    }

    pub fn scaled(&self, factor: f64) -> ClassWeights {
        ClassWeights(self.0.iter().map(|w| w * factor).collect())
    }
}

/// Class weights inversely proportional to class frequency in `labels`.
pub fn class_weights(labels: &[usize], n_classes: usize) -> Result<ClassWeights> {
    let mut counts = vec![0usize; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    ClassWeights::balanced(&counts)
}

/// Class labels for one or more outputs, stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub n_outputs: usize,
    pub n_classes: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Targets {
    pub fn single(labels: Vec<usize>, n_classes: usize) -> Targets {
        Targets {
            n_outputs: 1,
            n_classes: vec![n_classes],
            labels,
        }
    }

    /// Builds multi-output targets from per-output label columns.
    pub fn multi(columns: &[Vec<usize>], n_classes: Vec<usize>) -> Targets {
        let n = columns.first().map_or(0, Vec::len);
        let mut labels = Vec::with_capacity(n * columns.len());
        for i in 0..n {
            labels.extend(columns.iter().map(|c| c[i]));
        }
        Targets {
            n_outputs: columns.len(),
            n_classes,
            labels,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len() / self.n_outputs.max(1)
    }

    pub fn label(&self, row: usize, output: usize) -> usize {
        self.labels[row * self.n_outputs + output]
    }

    pub fn column(&self, output: usize) -> Vec<usize> {
        (0..self.n_rows()).map(|i| self.label(i, output)).collect()
    }

    pub(crate) fn check(&self, n_rows: usize) -> Result<()> {
        if self.n_outputs == 0 || self.n_classes.len() != self.n_outputs {
            return Err(Error::InvalidInput("targets need at least one output".into()));
        }
        if self.n_rows() != n_rows || self.labels.len() != n_rows * self.n_outputs {
            return Err(Error::InvalidInput(format!(
                "{} target rows for {} feature rows",
                self.n_rows(),
                n_rows
            )));
        }
        for i in 0..n_rows {
            for o in 0..self.n_outputs {
                if self.label(i, o) >= self.n_classes[o] {
                    return Err(Error::InvalidInput(format!("label out of range at row {i}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub format_version: u32,
    pub config: ForestConfig,
    pub tree_seeds: Vec<u64>,
    pub n_features: usize,
    pub n_classes: Vec<usize>,
    pub trees: Vec<Tree>,
}

pub fn train_forest(
    x: &FeatureMatrix,
    targets: &Targets,
    weights: &[ClassWeights],
    config: &ForestConfig,
) -> Result<RandomForestModel> {
    if config.n_trees == 0 {
        return Err(Error::InvalidInput("n_trees must be positive".into()));
    }
    if x.n_rows() == 0 {
        return Err(Error::InvalidInput("cannot train on zero rows".into()));
    }
    targets.check(x.n_rows())?;
    let n = x.n_rows();
    let tree_seeds: Vec<u64> = (0..config.n_trees as u64)
        .map(|t| seed::derive(config.seed, "tree", &[t]))
        .collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&ts| {
            let samples: Vec<usize> = if config.bootstrap {
                let mut rng = seed::rng(ts, "bootstrap", &[]);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree(x, targets, &samples, weights, config, ts)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForestModel {
        format_version: MODEL_FORMAT_VERSION,
        config: config.clone(),
        tree_seeds,
        n_features: x.n_cols(),
        n_classes: targets.n_classes.clone(),
        trees,
    })
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

impl RandomForestModel {
    /// Wraps hand-built trees (used for testing and model import).
    pub fn from_trees(config: ForestConfig, n_features: usize, n_classes: Vec<usize>, trees: Vec<Tree>) -> Result<RandomForestModel> {
        if trees.is_empty() {
            return Err(Error::MalformedModel("forest has no trees".into()));
        }
        let trees = trees
            .into_iter()
            .map(|t| Tree::from_nodes(t.nodes, &n_classes))
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomForestModel {
            format_version: MODEL_FORMAT_VERSION,
            tree_seeds: vec![0; trees.len()],
            config,
            n_features,
            n_classes,
            trees,
        })
    }

    pub fn n_outputs(&self) -> usize {
        self.n_classes.len()
    }

    /// Mean of per-tree leaf class proportions, one vector per output.
    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<Vec<f64>>> {
        if row.len() != self.n_features {
            return Err(Error::WidthMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let mut out: Vec<Vec<f64>> = self.n_classes.iter().map(|&k| vec![0.0; k]).collect();
        for t in &self.trees {
            let leaf = t.leaf_index(row);
            for (o, acc) in out.iter_mut().enumerate() {
                for (a, p) in acc.iter_mut().zip(t.leaf_proba(leaf, o)) {
                    *a += p;
                }
            }
        }
        let m = self.trees.len() as f64;
        for acc in &mut out {
            acc.iter_mut().for_each(|v| *v /= m);
        }
        Ok(out)
    }

    /// Argmax class per output; ties go to the lowest class index.
    pub fn predict(&self, row: &[f64]) -> Result<Vec<usize>> {
        Ok(self.predict_proba(row)?.iter().map(|p| argmax(p)).collect())
    }

    pub fn predict_proba_matrix(&self, x: &FeatureMatrix) -> Result<Vec<Vec<Vec<f64>>>> {
        x.rows().map(|r| self.predict_proba(r)).collect()
    }

    /// Positive-class probability of a binary output for every row.
    pub fn positive_proba(&self, x: &FeatureMatrix, output: usize) -> Result<Vec<f64>> {
        x.rows()
            .map(|r| Ok(self.predict_proba(r)?[output][1]))
            .collect()
    }

    /// Normalized impurity-decrease importance per feature.
    pub fn split_count_importance(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            let mut per_tree = vec![0.0; self.n_features];
            for n in &t.nodes {
                if let Node::Split { feature, gain, .. } = n {
                    per_tree[*feature] += gain.max(0.0);
                }
            }
            let s: f64 = per_tree.iter().sum();
            if s > 0.0 {
                for (a, v) in total.iter_mut().zip(per_tree) {
                    *a += v / s;
                }
            }
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        }
        total
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<RandomForestModel> {
        let model: RandomForestModel = serde_json::from_str(text)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::MalformedModel(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

pub fn predict_class(model: &RandomForestModel, row: &[f64]) -> Result<usize> {
    Ok(model.predict(row)?[0])
}
