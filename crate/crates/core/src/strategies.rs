//! Model compositions over the four-class target: a single 4-class forest,
//! one-vs-rest, a two-output multi-label forest, and the duo classifier.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{train_forest, ClassWeights, ForestConfig, RandomForestModel, Targets};
use crate::labeling::{ClassDistribution, LabelPair, ProgressionClass};
use crate::matrix::FeatureMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Single,
    OneVsRest,
    Multilabel,
    Duo,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Single,
        StrategyKind::OneVsRest,
        StrategyKind::Multilabel,
        StrategyKind::Duo,
    ];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            StrategyKind::Single => "single",
            StrategyKind::OneVsRest => "one_vs_rest",
            StrategyKind::Multilabel => "multilabel",
            StrategyKind::Duo => "duo",
        };
        f.write_str(s)
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(StrategyKind::Single),
            "one_vs_rest" | "ovr" => Ok(StrategyKind::OneVsRest),
            "multilabel" => Ok(StrategyKind::Multilabel),
            "duo" => Ok(StrategyKind::Duo),
            other => Err(Error::InvalidInput(format!("unknown strategy `{other}`"))),
        }
    }
}

/// Two independent binary forests for the P and S label bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuoModel {
    pub p_forest: RandomForestModel,
    pub s_forest: RandomForestModel,
    pub config: ForestConfig,
    /// `(p, s)` bits → class name, for readers of the persisted artifact.
    pub bijection: Vec<((bool, bool), String)>,
}

impl DuoModel {
    fn bijection_table() -> Vec<((bool, bool), String)> {
        ProgressionClass::ALL
            .iter()
            .map(|c| {
                let lp = c.label_pair();
                ((lp.p, lp.s), c.name().to_string())
            })
            .collect()
    }

    pub fn label_pair(&self, row: &[f64]) -> Result<LabelPair> {
        let (p, s) = self.probabilities(row)?;
        Ok(LabelPair { p: p >= 0.5, s: s >= 0.5 })
    }

    /// `(p(P), p(S))` from the sub-forests' positive classes.
    pub fn probabilities(&self, row: &[f64]) -> Result<(f64, f64)> {
        Ok((
            self.p_forest.predict_proba(row)?[0][1],
            self.s_forest.predict_proba(row)?[0][1],
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum StrategyModel {
    Single { forest: RandomForestModel },
    OneVsRest { forests: Vec<RandomForestModel> },
    Multilabel { forest: RandomForestModel },
    Duo(DuoModel),
}

/// Per-row output shared by every strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyPrediction {
    pub class: ProgressionClass,
    pub p_p: f64,
    pub p_s: f64,
}

fn require_both(bits: &[usize], name: &str) -> Result<()> {
    let pos = bits.iter().filter(|&&b| b == 1).count();
    if pos == 0 || pos == bits.len() {
        Err(Error::DegenerateLabel(name.to_string()))
    } else {
        Ok(())
    }
}

fn bit_counts(full: &ClassDistribution, bit: impl Fn(ProgressionClass) -> bool) -> [usize; 2] {
    let mut c = [0usize; 2];
    for cls in ProgressionClass::ALL {
        c[usize::from(bit(cls))] += full.counts[cls.index()];
    }
    c
}

/// Trains one composition. Class weights always come from the full-dataset
/// distribution `full`, not from the training fold.
pub fn train_strategy(
    kind: StrategyKind,
    x: &FeatureMatrix,
    classes: &[ProgressionClass],
    config: &ForestConfig,
    full: &ClassDistribution,
) -> Result<StrategyModel> {
    if classes.len() != x.n_rows() {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} rows",
            classes.len(),
            x.n_rows()
        )));
    }
    let p_bits: Vec<usize> = classes.iter().map(|c| usize::from(c.label_pair().p)).collect();
    let s_bits: Vec<usize> = classes.iter().map(|c| usize::from(c.label_pair().s)).collect();
    let p_weights = || ClassWeights::balanced(&bit_counts(full, |c| c.label_pair().p));
    let s_weights = || ClassWeights::balanced(&bit_counts(full, |c| c.label_pair().s));

    match kind {
        StrategyKind::Single => {
            let weights = ClassWeights::balanced(&full.counts)?;
            let y = Targets::single(classes.iter().map(|c| c.index()).collect(), 4);
            Ok(StrategyModel::Single {
                forest: train_forest(x, &y, &[weights], config)?,
            })
        }
        StrategyKind::OneVsRest => {
            let total = full.total();
            let forests = ProgressionClass::ALL
                .iter()
                .map(|&target| {
                    let bits: Vec<usize> = classes.iter().map(|&c| usize::from(c == target)).collect();
                    require_both(&bits, &format!("{target}-vs-rest"))?;
                    let n_pos = full.counts[target.index()];
                    let w = ClassWeights::balanced(&[total - n_pos, n_pos])?;
                    train_forest(x, &Targets::single(bits, 2), &[w], config)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(StrategyModel::OneVsRest { forests })
        }
        StrategyKind::Multilabel => {
            require_both(&p_bits, "P")?;
            require_both(&s_bits, "S")?;
            let y = Targets::multi(&[p_bits, s_bits], vec![2, 2]);
            Ok(StrategyModel::Multilabel {
                forest: train_forest(x, &y, &[p_weights()?, s_weights()?], config)?,
            })
        }
        StrategyKind::Duo => {
            require_both(&p_bits, "P")?;
            require_both(&s_bits, "S")?;
            let (p_forest, s_forest) = rayon::join(
                || train_forest(x, &Targets::single(p_bits.clone(), 2), &[p_weights()?], config),
                || train_forest(x, &Targets::single(s_bits.clone(), 2), &[s_weights()?], config),
            );
            Ok(StrategyModel::Duo(DuoModel {
                p_forest: p_forest?,
                s_forest: s_forest?,
                config: config.clone(),
                bijection: DuoModel::bijection_table(),
            }))
        }
    }
}

fn argmax_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

impl StrategyModel {
    pub fn kind(&self) -> StrategyKind {
        match self {
            StrategyModel::Single { .. } => StrategyKind::Single,
            StrategyModel::OneVsRest { .. } => StrategyKind::OneVsRest,
            StrategyModel::Multilabel { .. } => StrategyKind::Multilabel,
            StrategyModel::Duo(_) => StrategyKind::Duo,
        }
    }

    /// Class plus P/S probabilities.
    ///
    /// For the 4-class strategies `p(P) = q(P) + q(P+S)` and
    /// `p(S) = q(S) + q(P+S)`, where one-vs-rest scores `q` are the
    /// positive-class probabilities normalized to sum to one.
    pub fn predict_row(&self, row: &[f64]) -> Result<StrategyPrediction> {
        let from_four = |q: &[f64], class: ProgressionClass| StrategyPrediction {
            class,
            p_p: q[1] + q[3],
            p_s: q[2] + q[3],
        };
        match self {
            StrategyModel::Single { forest } => {
                let q = forest.predict_proba(row)?.remove(0);
                Ok(from_four(&q, ProgressionClass::from_index(argmax_lowest(&q))))
            }
            StrategyModel::OneVsRest { forests } => {
                let scores = forests
                    .iter()
                    .map(|f| Ok(f.predict_proba(row)?[0][1]))
                    .collect::<Result<Vec<f64>>>()?;
                let class = ProgressionClass::from_index(argmax_lowest(&scores));
                let total: f64 = scores.iter().sum();
                let q: Vec<f64> = if total > 0.0 {
                    scores.iter().map(|s| s / total).collect()
                } else {
                    vec![0.25; 4]
                };
                Ok(from_four(&q, class))
            }
            StrategyModel::Multilabel { forest } => {
                let p = forest.predict_proba(row)?;
                let (p_p, p_s) = (p[0][1], p[1][1]);
                let class = LabelPair { p: p_p >= 0.5, s: p_s >= 0.5 }.class();
                Ok(StrategyPrediction { class, p_p, p_s })
            }
            StrategyModel::Duo(duo) => {
                let (p_p, p_s) = duo.probabilities(row)?;
                let class = LabelPair { p: p_p >= 0.5, s: p_s >= 0.5 }.class();
                Ok(StrategyPrediction { class, p_p, p_s })
            }
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> Result<ProgressionClass> {
        Ok(self.predict_row(row)?.class)
    }

    pub fn predict_matrix(&self, x: &FeatureMatrix) -> Result<Vec<StrategyPrediction>> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    /// Sub-forests whose mean importance ranks features.
    pub fn forests(&self) -> Vec<&RandomForestModel> {
        match self {
            StrategyModel::Single { forest } | StrategyModel::Multilabel { forest } => vec![forest],
            StrategyModel::OneVsRest { forests } => forests.iter().collect(),
            StrategyModel::Duo(d) => vec![&d.p_forest, &d.s_forest],
        }
    }

    pub fn importance(&self) -> Vec<f64> {
        let forests = self.forests();
        let d = forests[0].n_features;
        let mut out = vec![0.0; d];
        for f in &forests {
            for (a, v) in out.iter_mut().zip(f.split_count_importance()) {
                *a += v / forests.len() as f64;
            }
        }
        out
    }
}

pub fn predict_duo_probabilities(duo: &DuoModel, row: &[f64]) -> Result<(f64, f64)> {
    duo.probabilities(row)
}

/// LabelPair targets `(p, s)` for the multi-label composition.
pub fn multilabel_targets(classes: &[ProgressionClass]) -> Vec<(usize, usize)> {
    classes
        .iter()
        .map(|c| {
            let lp = c.label_pair();
            (usize::from(lp.p), usize::from(lp.s))
        })
        .collect()
}
