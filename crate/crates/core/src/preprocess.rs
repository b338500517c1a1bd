//! Missingness filters, fill-forward, fold-local imputation and encoding.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::cohort::{AttributeKind, AttributeMeta, CohortTable, PeriodRecord, Value};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessPlan {
    /// Attributes missing in more than this fraction of rows are dropped.
    pub attr_missing_threshold: f64,
    /// Rows missing more than this fraction of kept attributes are dropped.
    pub row_missing_threshold: f64,
    /// Min-max scale numeric columns into [0, 1] (scale-sensitive learners only).
    pub scaling: bool,
}

impl Default for PreprocessPlan {
    fn default() -> Self {
        PreprocessPlan {
            attr_missing_threshold: 0.5,
            row_missing_threshold: 0.4,
            scaling: false,
        }
    }
}

impl PreprocessPlan {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("attr_missing_threshold", self.attr_missing_threshold),
            ("row_missing_threshold", self.row_missing_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidPlan(format!("{name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Rows of raw (typed, possibly missing) attribute values.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureFrame {
    pub attributes: Vec<AttributeMeta>,
    pub rows: Vec<Vec<Option<Value>>>,
}

impl FeatureFrame {
    pub fn from_periods(attributes: &[AttributeMeta], periods: &[PeriodRecord]) -> FeatureFrame {
        FeatureFrame {
            attributes: attributes.to_vec(),
            rows: periods.iter().map(|p| p.features.clone()).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureFrame {
        FeatureFrame {
            attributes: self.attributes.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    fn keep_columns(&self, cols: &[usize]) -> FeatureFrame {
        FeatureFrame {
            attributes: cols.iter().map(|&c| self.attributes[c].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&c| r[c].clone()).collect())
                .collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Excluded,
    TooManyMissing,
    Constant,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    /// Indices (into the input frame) of rows that survived.
    pub kept_rows: Vec<usize>,
    pub dropped_attributes: Vec<(String, DropReason)>,
}

/// Drops excluded and sparse attributes, then sparse rows, then constant attributes.
pub fn filter_table(frame: &FeatureFrame, plan: &PreprocessPlan) -> Result<(FeatureFrame, FilterReport)> {
    plan.validate()?;
    let mut report = FilterReport::default();
    let n = frame.n_rows();

    let mut cols = Vec::new();
    for (c, meta) in frame.attributes.iter().enumerate() {
        if meta.excluded {
            report.dropped_attributes.push((meta.name.clone(), DropReason::Excluded));
            continue;
        }
        let missing = frame.rows.iter().filter(|r| r[c].is_none()).count();
        if n > 0 && missing as f64 / n as f64 > plan.attr_missing_threshold {
            report.dropped_attributes.push((meta.name.clone(), DropReason::TooManyMissing));
            continue;
        }
        cols.push(c);
    }

    let kept_rows: Vec<usize> = (0..n)
        .filter(|&i| {
            if cols.is_empty() {
                return true;
            }
            let missing = cols.iter().filter(|&&c| frame.rows[i][c].is_none()).count();
            missing as f64 / cols.len() as f64 <= plan.row_missing_threshold
        })
        .collect();

    cols.retain(|&c| {
        let mut first: Option<&Value> = None;
        let varies = kept_rows.iter().filter_map(|&i| frame.rows[i][c].as_ref()).any(|v| {
            match first {
                None => {
                    first = Some(v);
                    false
                }
                Some(f) => f != v,
            }
        });
        if !varies {
            report
                .dropped_attributes
                .push((frame.attributes[c].name.clone(), DropReason::Constant));
        }
        varies
    });

    if cols.is_empty() {
        return Err(Error::EmptyFeatureSpace);
    }
    let filtered = frame.select_rows(&kept_rows).keep_columns(&cols);
    report.kept_rows = kept_rows;
    Ok((filtered, report))
}

/// Carries values forward for `fill_forward` attributes, then applies defaults.
///
/// Only observed visits are touched; attributes without the flag are left as is.
pub fn fill_forward(table: &CohortTable) -> CohortTable {
    let mut out = table.clone();
    for (a, meta) in table.attributes.iter().enumerate() {
        if !meta.fill_forward {
            continue;
        }
        for p in 0..table.patients.len() {
            let mut last: Option<Value> = None;
            for t in table.observed_timepoints(p) {
                match table.cell(p, t, a) {
                    Some(v) => last = Some(v.clone()),
                    None => {
                        let fill = last.clone().or_else(|| meta.default_value.clone());
                        out.set_cell(p, t, a, fill);
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Encoding {
    Numeric,
    /// 1.0 iff the value equals `positive`.
    Binary { positive: Value },
    OneHot { categories: Vec<Value> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnTransform {
    /// Index of the attribute in the frame the transform was fitted on.
    pub source: usize,
    pub name: String,
    pub kind: AttributeKind,
    pub impute: Value,
    pub encoding: Encoding,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<(f64, f64)>,
}

impl ColumnTransform {
    fn width(&self) -> usize {
        match &self.encoding {
            Encoding::OneHot { categories } => categories.len(),
            _ => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedTransform {
    pub columns: Vec<ColumnTransform>,
    /// Attributes with no training values and no default.
    pub dropped: Vec<String>,
    pub scaling: bool,
    pub width: usize,
}

fn mode(values: &[&Value]) -> Value {
    let mut counts: HashMap<_, (usize, &Value)> = HashMap::new();
    for v in values {
        counts.entry(v.key()).or_insert((0, v)).0 += 1;
    }
    let mut best: Option<(usize, &Value)> = None;
    for (count, v) in counts.into_values() {
        best = match best {
            None => Some((count, v)),
            Some((bc, bv)) => {
                let better = count > bc || (count == bc && v.canonical_cmp(bv) == Ordering::Less);
                if better {
                    Some((count, v))
                } else {
                    Some((bc, bv))
                }
            }
        };
    }
    best.expect("mode of non-empty slice").1.clone()
}

fn distinct_sorted(values: &[&Value]) -> Vec<Value> {
    let mut out: Vec<Value> = values.iter().map(|v| (*v).clone()).collect();
    out.sort_by(Value::canonical_cmp);
    out.dedup();
    out
}

/// Fits imputation, encoding and scaling on training rows only.
pub fn fit_transform(frame: &FeatureFrame, train_rows: &[usize], plan: &PreprocessPlan) -> Result<FittedTransform> {
    if train_rows.is_empty() {
        return Err(Error::InvalidInput("fit_transform needs at least one training row".into()));
    }
    let mut columns = Vec::new();
    let mut dropped = Vec::new();
    for (c, meta) in frame.attributes.iter().enumerate() {
        let observed: Vec<&Value> = train_rows
            .iter()
            .filter_map(|&i| frame.rows[i][c].as_ref())
            .collect();
        if observed.is_empty() {
            match &meta.default_value {
                Some(d) => {
                    let encoding = match (meta.kind, d) {
                        (AttributeKind::Categorical, Value::Text(_)) => Encoding::Binary { positive: d.clone() },
                        _ => Encoding::Numeric,
                    };
                    columns.push(ColumnTransform {
                        source: c,
                        name: meta.name.clone(),
                        kind: meta.kind,
                        impute: d.clone(),
                        encoding,
                        range: None,
                    });
                }
                None => dropped.push(meta.name.clone()),
            }
            continue;
        }
        let (impute, encoding) = match meta.kind {
            AttributeKind::Continuous => {
                let nums: Vec<f64> = observed.iter().filter_map(|v| v.as_f64()).collect();
                let mean = nums.iter().sum::<f64>() / nums.len() as f64;
                (Value::Num(mean), Encoding::Numeric)
            }
            AttributeKind::Ordinal => (mode(&observed), Encoding::Numeric),
            AttributeKind::Categorical => {
                let cats = distinct_sorted(&observed);
                let encoding = if cats.len() > 2 {
                    Encoding::OneHot { categories: cats }
                } else {
                    Encoding::Binary {
                        positive: cats.last().expect("non-empty").clone(),
                    }
                };
                (mode(&observed), encoding)
            }
        };
        let range = if plan.scaling && matches!(encoding, Encoding::Numeric) {
            let nums = observed.iter().filter_map(|v| v.as_f64());
            let (lo, hi) = nums.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            Some((lo, hi))
        } else {
            None
        };
        columns.push(ColumnTransform {
            source: c,
            name: meta.name.clone(),
            kind: meta.kind,
            impute,
            encoding,
            range,
        });
    }
    let width = columns.iter().map(ColumnTransform::width).sum();
    Ok(FittedTransform {
        columns,
        dropped,
        scaling: plan.scaling,
        width,
    })
}

impl FittedTransform {
    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.width);
        for col in &self.columns {
            match &col.encoding {
                Encoding::OneHot { categories } => {
                    names.extend(categories.iter().map(|c| format!("{}={}", col.name, c)));
                }
                _ => names.push(col.name.clone()),
            }
        }
        names
    }

    /// Index of the source attribute behind every output column.
    pub fn column_sources(&self) -> Vec<usize> {
        self.columns
            .iter()
            .flat_map(|c| std::iter::repeat_n(c.source, c.width()))
            .collect()
    }

    pub fn apply(&self, row: &[Option<Value>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        self.apply_into(row, &mut out);
        out
    }

    fn apply_into(&self, row: &[Option<Value>], out: &mut Vec<f64>) {
        for col in &self.columns {
            let v = row[col.source].as_ref().unwrap_or(&col.impute);
            match &col.encoding {
                Encoding::Numeric => {
                    let x = v.as_f64().unwrap_or_else(|| col.impute.as_f64().unwrap_or(0.0));
                    let x = match col.range {
                        Some((lo, hi)) if hi > lo => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
                        Some(_) => 0.0,
                        None => x,
                    };
                    out.push(x);
                }
                Encoding::Binary { positive } => out.push(if v == positive { 1.0 } else { 0.0 }),
                Encoding::OneHot { categories } => {
                    out.extend(categories.iter().map(|c| if c == v { 1.0 } else { 0.0 }));
                }
            }
        }
    }

    pub fn apply_rows(&self, frame: &FeatureFrame, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.width);
        for &i in idx {
            self.apply_into(&frame.rows[i], &mut data);
        }
        FeatureMatrix::new(idx.len(), self.width, data)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
