use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{Criterion, ForestConfig};
use crate::preprocess::PreprocessPlan;
use crate::strategies::StrategyKind;

use super::cv::{run_cv, CvPlan, Learner};
use super::score::{score_configuration, ScoreSummary};
use super::store::PredictionStore;

pub const GRID_TREES: [usize; 6] = [100, 200, 400, 600, 800, 1000];
pub const GRID_DEPTHS: [usize; 7] = [4, 5, 6, 7, 8, 9, 10];

/// Cartesian grid over tree counts, depths and both criteria.
pub fn forest_grid(trees: &[usize], depths: &[usize], base: &ForestConfig) -> Vec<ForestConfig> {
    let mut grid = Vec::with_capacity(trees.len() * depths.len() * 2);
    for &n_trees in trees {
        for &d in depths {
            for criterion in [Criterion::Gini, Criterion::Entropy] {
                grid.push(ForestConfig {
                    n_trees,
                    max_depth: Some(d),
                    criterion,
                    ..base.clone()
                });
            }
        }
    }
    grid
}

/// The 84-configuration default grid.
pub fn default_grid() -> Vec<ForestConfig> {
    forest_grid(&GRID_TREES, &GRID_DEPTHS, &ForestConfig::default())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: usize,
    pub best_config: ForestConfig,
    pub summaries: Vec<ScoreSummary>,
}

/// Highest median; ties → lower MAD, then lower depth, then fewer trees, then grid order.
pub fn select_best(summaries: &[ScoreSummary], grid: &[ForestConfig]) -> usize {
    let depth = |c: &ForestConfig| c.max_depth.unwrap_or(usize::MAX);
    let mut best = 0;
    for i in 1..summaries.len() {
        let (a, b) = (&summaries[i], &summaries[best]);
        let better = a
            .median
            .total_cmp(&b.median)
            .reverse()
            .then(a.mad.total_cmp(&b.mad))
            .then(depth(&grid[i]).cmp(&depth(&grid[best])))
            .then(grid[i].n_trees.cmp(&grid[best].n_trees))
            .is_lt();
        if better {
            best = i;
        }
    }
    best
}

pub fn tune_grid(
    dataset: &Dataset,
    strategy: StrategyKind,
    grid: &[ForestConfig],
    cv: &CvPlan,
    prep: &PreprocessPlan,
) -> Result<(TuneResult, PredictionStore)> {
    if grid.is_empty() {
        return Err(Error::InvalidPlan("empty tuning grid".into()));
    }
    let learners: Vec<Learner> = grid
        .iter()
        .map(|config| Learner::Forest {
            strategy,
            config: config.clone(),
        })
        .collect();
    let store = run_cv(dataset, &learners, cv, prep)?;
    let summaries = (0..grid.len())
        .map(|c| score_configuration(&store, c))
        .collect::<Result<Vec<_>>>()?;
    let best = select_best(&summaries, grid);
    Ok((
        TuneResult {
            best,
            best_config: grid[best].clone(),
            summaries,
        },
        store,
    ))
}
