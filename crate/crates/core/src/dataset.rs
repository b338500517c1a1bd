//! From a cohort table to the labelled, globally filtered period set.

use serde::{Deserialize, Serialize};

use crate::cohort::{build_periods, replacement_events, CohortTable, PeriodRecord, PeriodRule};
use crate::error::Result;
use crate::labeling::{class_distribution, label_period, ClassDistribution, ExclusionReason, Labeling, PainCombination, ProgressionClass};
use crate::preprocess::{fill_forward, filter_table, FeatureFrame, FilterReport, PreprocessPlan};

/// Labelled periods ready for cross-validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ids: Vec<String>,
    pub frame: FeatureFrame,
    pub classes: Vec<ProgressionClass>,
    /// Class counts of the full dataset; the source of every class weight.
    pub distribution: ClassDistribution,
}

impl Dataset {
    pub fn new(ids: Vec<String>, frame: FeatureFrame, classes: Vec<ProgressionClass>) -> Dataset {
        let distribution = class_distribution(&classes);
        Dataset {
            ids,
            frame,
            classes,
            distribution,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn class_indices(&self) -> Vec<usize> {
        self.classes.iter().map(|c| c.index()).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset::new(
            idx.iter().map(|&i| self.ids[i].clone()).collect(),
            self.frame.select_rows(idx),
            idx.iter().map(|&i| self.classes[i]).collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub period: String,
    pub reason: ExclusionReason,
}

#[derive(Clone, Debug)]
pub struct PreparedCohort {
    pub dataset: Dataset,
    /// Period records aligned with `dataset` rows, with raw (unfilled) features.
    pub periods: Vec<PeriodRecord>,
    pub exclusions: Vec<Exclusion>,
    /// Periods dropped by the row filter.
    pub filtered_out: Vec<String>,
    pub filter: FilterReport,
}

/// Fill-forward, period expansion, labelling and global filtering.
pub fn prepare_dataset(
    table: &CohortTable,
    period_rule: PeriodRule,
    pain_rule: PainCombination,
    plan: &PreprocessPlan,
) -> Result<PreparedCohort> {
    let raw_periods = build_periods(table, &replacement_events(table), period_rule);
    let filled = fill_forward(table);
    let filled_periods = build_periods(&filled, &replacement_events(&filled), period_rule);

    let mut exclusions = Vec::new();
    let mut kept = Vec::new();
    let mut classes = Vec::new();
    for (raw, filled) in raw_periods.into_iter().zip(filled_periods) {
        match label_period(&raw, pain_rule) {
            Labeling::Labeled(c) => {
                classes.push(c);
                kept.push((raw, filled));
            }
            Labeling::Excluded(reason) => exclusions.push(Exclusion {
                period: raw.id(),
                reason,
            }),
        }
    }
    let filled: Vec<PeriodRecord> = kept.iter().map(|(_, f)| f.clone()).collect();
    let frame = FeatureFrame::from_periods(&table.attributes, &filled);
    let (frame, filter) = filter_table(&frame, plan)?;

    let mut periods = Vec::with_capacity(filter.kept_rows.len());
    let mut kept_classes = Vec::with_capacity(filter.kept_rows.len());
    let mut filtered_out = Vec::new();
    let mut next = filter.kept_rows.iter().peekable();
    for (i, (raw, _)) in kept.into_iter().enumerate() {
        if next.peek() == Some(&&i) {
            next.next();
            kept_classes.push(classes[i]);
            periods.push(raw);
        } else {
            filtered_out.push(raw.id());
        }
    }
    let ids = periods.iter().map(PeriodRecord::id).collect();
    Ok(PreparedCohort {
        dataset: Dataset::new(ids, frame, kept_classes),
        periods,
        exclusions,
        filtered_out,
        filter,
    })
}
