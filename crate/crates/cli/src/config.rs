use std::path::{Path, PathBuf};

use oaprog::cohort::PeriodRule;
use oaprog::eval::{CurvePlan, CvPlan};
use oaprog::forest::ForestConfig;
use oaprog::labeling::PainCombination;
use oaprog::preprocess::PreprocessPlan;
use oaprog::strategies::StrategyKind;
use oaprog::synth::SynthConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Cohort CSV; defaults to the `synth` output inside the output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metadata: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub n_repeats: usize,
    pub k: usize,
    pub n_seeds: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        let d = CvPlan::default();
        CvSection {
            n_repeats: d.n_repeats,
            k: d.k,
            n_seeds: d.n_seeds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub trees: Vec<usize>,
    pub depths: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            trees: oaprog::eval::GRID_TREES.to_vec(),
            depths: oaprog::eval::GRID_DEPTHS.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSection {
    pub fractions: Vec<f64>,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<usize>,
}

impl Default for CurveSection {
    fn default() -> Self {
        let d = CurvePlan::default();
        CurveSection {
            fractions: d.fractions,
            n_samples: d.n_samples,
            per_class: d.per_class,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BbcSection {
    pub n_boot: usize,
}

impl Default for BbcSection {
    fn default() -> Self {
        BbcSection { n_boot: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeSection {
    pub inner_k: usize,
}

impl Default for RfeSection {
    fn default() -> Self {
        RfeSection { inner_k: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainSection {
    /// Attribute at most this many instances (dataset order); 0 = all.
    pub max_instances: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection { max_instances: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[clap(rename_all = "kebab-case")]
pub enum SelectMode {
    Conventional,
    MlL,
    MlP,
}

impl SelectMode {
    pub fn name(self) -> &'static str {
        match self {
            SelectMode::Conventional => "conventional",
            SelectMode::MlL => "ml-l",
            SelectMode::MlP => "ml-p",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSection {
    pub mode: SelectMode,
    /// Match the ML-P count to the conventional selection.
    pub match_count: bool,
    /// Explicit ML-P count when not matching.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

impl Default for SelectSection {
    fn default() -> Self {
        SelectSection {
            mode: SelectMode::Conventional,
            match_count: true,
            target: None,
        }
    }
}

/// Everything a run depends on; one TOML file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub strategy: StrategyKind,
    pub pain_combination: PainCombination,
    pub paths: Paths,
    pub periods: PeriodRule,
    pub preprocess: PreprocessPlan,
    pub forest: ForestConfig,
    pub cv: CvSection,
    pub grid: GridSection,
    pub curve: CurveSection,
    pub bbc: BbcSection,
    pub rfe: RfeSection,
    pub explain: ExplainSection,
    pub select: SelectSection,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            strategy: StrategyKind::Duo,
            pain_combination: PainCombination::PerTimepointMax,
            paths: Paths::default(),
            periods: PeriodRule::default(),
            preprocess: PreprocessPlan::default(),
            forest: ForestConfig::default(),
            cv: CvSection::default(),
            grid: GridSection::default(),
            curve: CurveSection::default(),
            bbc: BbcSection::default(),
            rfe: RfeSection::default(),
            explain: ExplainSection::default(),
            select: SelectSection::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: oaprog::Error| CliError::Config(e.to_string());
        if self.seed > i64::MAX as u64 {
            return Err(CliError::Config("seed must fit in a signed 64-bit integer".into()));
        }
        self.preprocess.validate().map_err(cfg)?;
        self.synth.validate().map_err(cfg)?;
        if self.cv.n_repeats == 0 || self.cv.n_seeds == 0 || self.cv.k < 2 {
            return Err(CliError::Config("cv needs n_repeats ≥ 1, n_seeds ≥ 1 and k ≥ 2".into()));
        }
        if self.forest.n_trees == 0 || self.forest.max_depth == Some(0) {
            return Err(CliError::Config("forest needs n_trees ≥ 1 and max_depth ≥ 1".into()));
        }
        if self.grid.trees.is_empty() || self.grid.depths.is_empty() {
            return Err(CliError::Config("tuning grid is empty".into()));
        }
        if self.rfe.inner_k < 2 {
            return Err(CliError::Config("rfe.inner_k must be at least 2".into()));
        }
        Ok(())
    }

    pub fn cv_plan(&self) -> CvPlan {
        CvPlan {
            n_repeats: self.cv.n_repeats,
            k: self.cv.k,
            n_seeds: self.cv.n_seeds,
            master_seed: self.seed,
        }
    }

    /// SHA-256 of the canonical TOML form (paths excluded, so moving a run
    /// directory does not change the hash).
    pub fn hash(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.paths = Paths::default();
        let text = c.to_toml()?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}
