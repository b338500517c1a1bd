use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::stats::{binomial_ci_median, mad, median, median_index};
use super::store::{PredictionStore, RunKey};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScore {
    pub repeat: usize,
    pub seed: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    /// Median over repeats of the per-repeat median over seeds.
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Median absolute deviation of the repeat medians.
    pub mad: f64,
    pub repeat_medians: Vec<f64>,
    pub run_scores: Vec<RunScore>,
}

impl ScoreSummary {
    /// Summary of a `repeats × seeds` score grid.
    pub fn from_grid(grid: &[Vec<f64>]) -> ScoreSummary {
        let repeat_medians: Vec<f64> = grid.iter().map(|row| median(row)).collect();
        let (ci_low, ci_high) = binomial_ci_median(&repeat_medians, 0.95);
        let run_scores = grid
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .map(move |(s, &score)| RunScore { repeat: r, seed: s, score })
            })
            .collect();
        ScoreSummary {
            median: median(&repeat_medians),
            ci_low,
            ci_high,
            mad: mad(&repeat_medians),
            repeat_medians,
            run_scores,
        }
    }
}

fn score_grid(store: &PredictionStore, config: usize) -> Result<Vec<Vec<f64>>> {
    if config >= store.n_configs() {
        return Err(Error::InvalidInput(format!("no configuration {config} in store")));
    }
    let mut grid = vec![vec![f64::NAN; store.n_seeds()]; store.n_repeats()];
    for run in store.config_runs(config) {
        grid[run.key.repeat][run.key.seed] = store.run_score(run);
    }
    if grid.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::InvalidInput(format!("configuration {config} has missing runs")));
    }
    Ok(grid)
}

pub fn score_configuration(store: &PredictionStore, config: usize) -> Result<ScoreSummary> {
    Ok(ScoreSummary::from_grid(&score_grid(store, config)?))
}

/// The median-seed run of the median repeat.
pub fn median_run(store: &PredictionStore, config: usize) -> Result<RunKey> {
    let grid = score_grid(store, config)?;
    let repeat_medians: Vec<f64> = grid.iter().map(|row| median(row)).collect();
    let repeat = median_index(&repeat_medians);
    let seed = median_index(&grid[repeat]);
    Ok(RunKey { config, repeat, seed })
}
