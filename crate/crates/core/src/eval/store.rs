use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::ProgressionClass;

use super::cv::Learner;
use super::metrics::ConfusionMatrix;

pub const STORE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: ProgressionClass,
    pub p_p: f64,
    pub p_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RunKey {
    pub config: usize,
    pub repeat: usize,
    pub seed: usize,
}

/// Pooled out-of-sample predictions of one (config, repeat, seed), indexed by instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub key: RunKey,
    pub predictions: Vec<Prediction>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub label: String,
    pub learner: Learner,
}

/// Keyed, order-independent store of pooled CV predictions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionStore {
    pub format_version: u32,
    pub instance_ids: Vec<String>,
    pub truth: Vec<ProgressionClass>,
    pub configs: Vec<ConfigRecord>,
    pub model_seeds: Vec<u64>,
    /// `folds[repeat][instance]` = test fold of that instance.
    pub folds: Vec<Vec<usize>>,
    /// Partition redraws needed per repeat (a training fold lacked a class).
    pub partition_redraws: Vec<u32>,
    runs: Vec<Run>,
}

impl PredictionStore {
    pub fn new(
        instance_ids: Vec<String>,
        truth: Vec<ProgressionClass>,
        configs: Vec<ConfigRecord>,
        model_seeds: Vec<u64>,
        folds: Vec<Vec<usize>>,
    ) -> PredictionStore {
        let n_repeats = folds.len();
        PredictionStore {
            format_version: STORE_FORMAT_VERSION,
            instance_ids,
            truth,
            configs,
            model_seeds,
            folds,
            partition_redraws: vec![0; n_repeats],
            runs: Vec::new(),
        }
    }

    pub fn n_instances(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn n_repeats(&self) -> usize {
        self.folds.len()
    }

    pub fn n_seeds(&self) -> usize {
        self.model_seeds.len()
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    /// Inserts at the key's sorted position; replaces an existing run with the same key.
    pub fn insert(&mut self, run: Run) -> Result<()> {
        if run.predictions.len() != self.n_instances() {
            return Err(Error::InvalidInput(format!(
                "run covers {} instances, store has {}",
                run.predictions.len(),
                self.n_instances()
            )));
        }
        match self.runs.binary_search_by(|r| r.key.cmp(&run.key)) {
            Ok(i) => self.runs[i] = run,
            Err(i) => self.runs.insert(i, run),
        }
        Ok(())
    }

    pub fn run(&self, key: RunKey) -> Option<&Run> {
        self.runs
            .binary_search_by(|r| r.key.cmp(&key))
            .ok()
            .map(|i| &self.runs[i])
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn config_runs(&self, config: usize) -> impl Iterator<Item = &Run> {
        self.runs.iter().filter(move |r| r.key.config == config)
    }

    /// Weighted F1 of one pooled run.
    pub fn run_score(&self, run: &Run) -> f64 {
        let mut m = ConfusionMatrix::new(4);
        for (t, p) in self.truth.iter().zip(&run.predictions) {
            m.add(t.index(), p.class.index(), 1);
        }
        m.weighted_f1()
    }

    /// Pooled weighted F1 over every run of a configuration.
    pub fn pooled_score(&self, config: usize) -> f64 {
        let mut m = ConfusionMatrix::new(4);
        for run in self.config_runs(config) {
            for (t, p) in self.truth.iter().zip(&run.predictions) {
                m.add(t.index(), p.class.index(), 1);
            }
        }
        m.weighted_f1()
    }

    /// Checks that every run is complete and every configuration has every (repeat, seed).
    pub fn check_complete(&self) -> Result<()> {
        let expected = self.n_configs() * self.n_repeats() * self.n_seeds();
        if self.runs.len() != expected {
            return Err(Error::InvalidInput(format!(
                "store holds {} runs, expected {expected}",
                self.runs.len()
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<PredictionStore> {
        let s: PredictionStore = serde_json::from_str(text)?;
        if s.format_version != STORE_FORMAT_VERSION {
            return Err(Error::InvalidInput(format!(
                "prediction store format {} (expected {STORE_FORMAT_VERSION})",
                s.format_version
            )));
        }
        Ok(s)
    }
}
