//! Simulated patient selection: conventional clinical criteria versus
//! model-based selection by predicted label or by ranked probabilities.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::cohort::{CohortTable, PeriodRecord, Value};
use crate::error::{Error, Result};
use crate::labeling::ProgressionClass;

pub const ACR_MIN_AGE: f64 = 50.0;
pub const ACR_MAX_STIFFNESS_MINUTES: f64 = 30.0;
pub const KL_RANGE: (i64, i64) = (1, 3);
pub const MIN_WOMAC_PAIN: f64 = 40.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KneeInputs {
    pub knee_pain: Option<bool>,
    pub crepitus: Option<bool>,
    pub osteophytes: Option<bool>,
    pub kl_grade: Option<i64>,
    pub womac_pain: Option<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConventionalInputs {
    pub age: Option<f64>,
    pub stiffness_minutes: Option<f64>,
    /// Left, right.
    pub knees: [KneeInputs; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionalOutcome {
    Selected,
    Rejected,
    /// No knee passes and at least one knee lacks a required field.
    Unevaluable,
}

/// Whether one knee satisfies all three criteria; `None` if a field is missing.
pub fn knee_passes(age: Option<f64>, stiffness: Option<f64>, knee: &KneeInputs) -> Option<bool> {
    let (age, stiffness) = (age?, stiffness?);
    let acr = knee.knee_pain?
        && (age > ACR_MIN_AGE || stiffness < ACR_MAX_STIFFNESS_MINUTES || knee.crepitus? || knee.osteophytes?);
    let kl = knee.kl_grade?;
    let womac = knee.womac_pain?;
    Some(acr && (KL_RANGE.0..=KL_RANGE.1).contains(&kl) && womac >= MIN_WOMAC_PAIN)
}

pub fn conventional_decision(inputs: &ConventionalInputs) -> ConventionalOutcome {
    let verdicts = inputs
        .knees
        .map(|k| knee_passes(inputs.age, inputs.stiffness_minutes, &k));
    if verdicts.contains(&Some(true)) {
        ConventionalOutcome::Selected
    } else if verdicts.contains(&None) {
        ConventionalOutcome::Unevaluable
    } else {
        ConventionalOutcome::Rejected
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConventionalSelection {
    pub mask: Vec<bool>,
    /// Indices of unevaluable instances (not selected).
    pub unevaluable: Vec<usize>,
}

pub fn conventional_select(inputs: &[ConventionalInputs]) -> ConventionalSelection {
    let outcomes: Vec<ConventionalOutcome> = inputs.iter().map(conventional_decision).collect();
    ConventionalSelection {
        mask: outcomes.iter().map(|o| *o == ConventionalOutcome::Selected).collect(),
        unevaluable: (0..outcomes.len())
            .filter(|&i| outcomes[i] == ConventionalOutcome::Unevaluable)
            .collect(),
    }
}

/// Start-of-period criteria fields, read through the table's column roles.
pub fn conventional_inputs(table: &CohortTable, period: &PeriodRecord) -> ConventionalInputs {
    let roles = &table.roles;
    let get = |role: &Option<String>| table.role_index(role).and_then(|a| period.features[a].as_ref());
    let num = |role: &Option<String>| get(role).and_then(Value::as_f64);
    let flag = |role: &Option<String>| get(role).map(Value::is_truthy);
    let knee = |pain: &Option<String>, crep: &Option<String>, ost: &Option<String>, kl: &Option<String>, womac: &Option<String>| KneeInputs {
        knee_pain: flag(pain),
        crepitus: flag(crep),
        osteophytes: flag(ost),
        kl_grade: num(kl).map(|v| v.round() as i64),
        womac_pain: num(womac),
    };
    ConventionalInputs {
        age: num(&roles.age),
        stiffness_minutes: num(&roles.stiffness),
        knees: [
            knee(&roles.knee_pain_left, &roles.crepitus_left, &roles.osteophytes_left, &roles.kl_left, &roles.pain_left),
            knee(&roles.knee_pain_right, &roles.crepitus_right, &roles.osteophytes_right, &roles.kl_right, &roles.pain_right),
        ],
    }
}

pub fn ml_label_select(predicted: &[ProgressionClass]) -> Vec<bool> {
    predicted.iter().map(|c| c.is_progressive()).collect()
}

/// Count-matched selection from three descending rankings.
///
/// Instances are ranked by `p(P)+p(S)`, by `p(S)` and by `p(P)` (ties →
/// id ascending). The lists receive `target/3` slots each, the remainder
/// going to the earlier lists, and are walked in that order, skipping
/// instances already taken.
pub fn ml_prob_select(p_p: &[f64], p_s: &[f64], ids: &[String], target: usize) -> Result<Vec<bool>> {
    let n = p_p.len();
    if p_s.len() != n || ids.len() != n {
        return Err(Error::InvalidInput("probability and id vectors differ in length".into()));
    }
    if target > n {
        return Err(Error::InvalidInput(format!("target {target} exceeds {n} instances")));
    }
    let keys: [Box<dyn Fn(usize) -> f64>; 3] = [
        Box::new(|i| p_p[i] + p_s[i]),
        Box::new(|i| p_s[i]),
        Box::new(|i| p_p[i]),
    ];
    let mut selected = vec![false; n];
    let mut taken = 0;
    for (l, key) in keys.iter().enumerate() {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            key(b)
                .partial_cmp(&key(a))
                .unwrap_or(Ordering::Equal)
                .then_with(|| ids[a].cmp(&ids[b]))
        });
        let quota = target / 3 + usize::from(l < target % 3);
        let mut got = 0;
        for i in order {
            if got == quota {
                break;
            }
            if !selected[i] {
                selected[i] = true;
                got += 1;
                taken += 1;
            }
        }
    }
    debug_assert_eq!(taken, target);
    Ok(selected)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: ProgressionClass,
    pub count: usize,
    pub share: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub selected: usize,
    pub per_class: Vec<ClassSelection>,
    /// Recall over every progressive class together.
    pub progressive_recall: f64,
}

impl SelectionReport {
    pub fn n_share(&self) -> f64 {
        self.per_class[ProgressionClass::N.index()].share
    }
}

pub fn selection_report(mask: &[bool], truth: &[ProgressionClass]) -> Result<SelectionReport> {
    if mask.len() != truth.len() {
        return Err(Error::InvalidInput("mask and truth differ in length".into()));
    }
    let mut chosen = [0usize; 4];
    let mut total = [0usize; 4];
    for (&m, c) in mask.iter().zip(truth) {
        total[c.index()] += 1;
        if m {
            chosen[c.index()] += 1;
        }
    }
    let selected: usize = chosen.iter().sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class = ProgressionClass::ALL
        .iter()
        .map(|&c| ClassSelection {
            class: c,
            count: chosen[c.index()],
            share: ratio(chosen[c.index()], selected),
            recall: ratio(chosen[c.index()], total[c.index()]),
        })
        .collect();
    Ok(SelectionReport {
        selected,
        per_class,
        progressive_recall: ratio(chosen[1..].iter().sum(), total[1..].iter().sum()),
    })
}
