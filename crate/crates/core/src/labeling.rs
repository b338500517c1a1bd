//! Pain (P) and structure (S) progression criteria and the four-class target.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cohort::PeriodRecord;
use crate::error::{Error, Result};

/// Slack applied to inclusive thresholds so that decimal readings such as
/// 4.0 → 3.1 mm over 3 years still count as 0.3 mm/yr.
pub const BOUNDARY_EPS: f64 = 1e-9;

pub const PAIN_RATE_LOW: f64 = 5.0;
pub const PAIN_END_LOW: f64 = 40.0;
pub const PAIN_RATE_HIGH: f64 = 10.0;
pub const PAIN_END_HIGH: f64 = 35.0;
pub const PAIN_SUSTAINED: f64 = 40.0;
pub const JSW_NARROWING_PER_YEAR: f64 = 0.3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProgressionClass {
    N,
    P,
    S,
    PS,
}

impl ProgressionClass {
    pub const ALL: [ProgressionClass; 4] = [
        ProgressionClass::N,
        ProgressionClass::P,
        ProgressionClass::S,
        ProgressionClass::PS,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> ProgressionClass {
        Self::ALL[i]
    }

    pub fn label_pair(self) -> LabelPair {
        LabelPair {
            p: matches!(self, ProgressionClass::P | ProgressionClass::PS),
            s: matches!(self, ProgressionClass::S | ProgressionClass::PS),
        }
    }

    pub fn is_progressive(self) -> bool {
        self != ProgressionClass::N
    }

    pub fn name(self) -> &'static str {
        match self {
            ProgressionClass::N => "N",
            ProgressionClass::P => "P",
            ProgressionClass::S => "S",
            ProgressionClass::PS => "P+S",
        }
    }
}

impl fmt::Display for ProgressionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProgressionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "N" => Ok(ProgressionClass::N),
            "P" => Ok(ProgressionClass::P),
            "S" => Ok(ProgressionClass::S),
            "P+S" | "PS" => Ok(ProgressionClass::PS),
            other => Err(Error::InvalidInput(format!("unknown class `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelPair {
    pub p: bool,
    pub s: bool,
}

impl LabelPair {
    pub fn class(self) -> ProgressionClass {
        match (self.p, self.s) {
            (false, false) => ProgressionClass::N,
            (true, false) => ProgressionClass::P,
            (false, true) => ProgressionClass::S,
            (true, true) => ProgressionClass::PS,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PainObservation {
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub duration_years: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JswObservation {
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub duration_years: f64,
}

/// Why a criterion or a whole period could not be evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    MissingPain,
    MissingJsw,
    MissingPainAndJsw,
    ShortPeriod,
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExclusionReason::MissingPain => "missing_pain",
            ExclusionReason::MissingJsw => "missing_jsw",
            ExclusionReason::MissingPainAndJsw => "missing_pain_and_jsw",
            ExclusionReason::ShortPeriod => "short_period",
        };
        f.write_str(s)
    }
}

fn at_least(value: f64, threshold: f64) -> bool {
    value >= threshold - BOUNDARY_EPS
}

/// Progressive or intense sustained pain. `Err` means the period is unlabelable.
pub fn pain_progression(obs: PainObservation) -> Result<bool, ExclusionReason> {
    let (Some(ps), Some(pe)) = (obs.start, obs.end) else {
        return Err(ExclusionReason::MissingPain);
    };
    if obs.duration_years < 2.0 {
        return Err(ExclusionReason::ShortPeriod);
    }
    let rate = (pe - ps) / obs.duration_years;
    let progressive = (at_least(rate, PAIN_RATE_LOW) && at_least(pe, PAIN_END_LOW))
        || (at_least(rate, PAIN_RATE_HIGH) && at_least(pe, PAIN_END_HIGH));
    let sustained = at_least(ps, PAIN_SUSTAINED) && at_least(pe, PAIN_SUSTAINED);
    Ok(progressive || sustained)
}

fn narrowing_rate(obs: JswObservation) -> Option<f64> {
    Some((obs.start? - obs.end?) / obs.duration_years)
}

/// Minimum JSW narrowing of at least 0.3 mm per year.
pub fn structural_progression(obs: JswObservation) -> Result<bool, ExclusionReason> {
    if obs.duration_years < 2.0 {
        return Err(ExclusionReason::ShortPeriod);
    }
    let rate = narrowing_rate(obs).ok_or(ExclusionReason::MissingJsw)?;
    Ok(at_least(rate, JSW_NARROWING_PER_YEAR))
}

/// How pain from two knees is combined into one observation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PainCombination {
    /// Maximum over reported knees, independently at start and at end.
    #[default]
    PerTimepointMax,
    /// Trajectory of the single knee with the higher end-of-period pain
    /// (ties → left); only knees reported at both ends qualify.
    PerKneeTrajectory,
}

fn max_reported(values: [Option<f64>; 2]) -> Option<f64> {
    match values {
        [Some(a), Some(b)] => Some(a.max(b)),
        [Some(a), None] | [None, Some(a)] => Some(a),
        [None, None] => None,
    }
}

/// Pain observation for a period under the given combination rule.
pub fn combined_pain(period: &PeriodRecord, rule: PainCombination) -> PainObservation {
    let o = &period.outcome;
    let (start, end) = match rule {
        PainCombination::PerTimepointMax => (max_reported(o.pain_start), max_reported(o.pain_end)),
        PainCombination::PerKneeTrajectory => {
            let mut best: Option<(f64, f64)> = None;
            for k in 0..2 {
                if let (Some(s), Some(e)) = (o.pain_start[k], o.pain_end[k]) {
                    if best.is_none_or(|(_, be)| e > be) {
                        best = Some((s, e));
                    }
                }
            }
            best.map_or((None, None), |(s, e)| (Some(s), Some(e)))
        }
    };
    PainObservation {
        start,
        end,
        duration_years: period.duration_years,
    }
}

/// JSW observation of the most affected knee (greater annualized narrowing,
/// ties → left). Knees missing either end are skipped.
pub fn most_affected_knee(period: &PeriodRecord) -> JswObservation {
    let o = &period.outcome;
    let knee = |k: usize| JswObservation {
        start: o.jsw_start[k],
        end: o.jsw_end[k],
        duration_years: period.duration_years,
    };
    match (narrowing_rate(knee(0)), narrowing_rate(knee(1))) {
        (Some(l), Some(r)) => {
            if r > l {
                knee(1)
            } else {
                knee(0)
            }
        }
        (None, Some(_)) => knee(1),
        _ => knee(0),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Labeling {
    Labeled(ProgressionClass),
    Excluded(ExclusionReason),
}

impl Labeling {
    pub fn class(self) -> Option<ProgressionClass> {
        match self {
            Labeling::Labeled(c) => Some(c),
            Labeling::Excluded(_) => None,
        }
    }
}

pub fn label_period(period: &PeriodRecord, rule: PainCombination) -> Labeling {
    if period.duration_years < 2.0 {
        return Labeling::Excluded(ExclusionReason::ShortPeriod);
    }
    let p = pain_progression(combined_pain(period, rule));
    let s = structural_progression(most_affected_knee(period));
    match (p, s) {
        (Ok(p), Ok(s)) => Labeling::Labeled(LabelPair { p, s }.class()),
        (Err(_), Err(_)) => Labeling::Excluded(ExclusionReason::MissingPainAndJsw),
        (Err(r), _) | (_, Err(r)) => Labeling::Excluded(r),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    pub counts: [usize; 4],
    pub fractions: [f64; 4],
}

impl ClassDistribution {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn class_distribution(labels: &[ProgressionClass]) -> ClassDistribution {
    let mut counts = [0usize; 4];
    for c in labels {
        counts[c.index()] += 1;
    }
    let n = labels.len().max(1) as f64;
    let fractions = counts.map(|c| c as f64 / n);
    ClassDistribution { counts, fractions }
}
