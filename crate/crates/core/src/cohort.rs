//! Longitudinal cohort storage, loading and period expansion.
//!
//! A cohort is stored as a dense patient × timepoint × attribute cube of
//! optional values. The on-disk form is a CSV file with one row per visit
//! (`patient`, `timepoint`, then one column per attribute) and a TOML
//! metadata file with one `[attributes.<name>]` section per column.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Heuristic cut-off: attributes with at most this many distinct values are
/// treated as categorical when the metadata does not declare a kind.
pub const CATEGORICAL_MAX_DISTINCT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical,
    Ordinal,
    Continuous,
}

impl AttributeKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, AttributeKind::Categorical)
    }
}

impl fmt::Display for AttributeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AttributeKind::Categorical => "categorical",
            AttributeKind::Ordinal => "ordinal",
            AttributeKind::Continuous => "continuous",
        };
        f.write_str(s)
    }
}

/// A typed cell value. Missingness is `Option::None`, never a sentinel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Text(String),
}

impl Value {
    /// Parses a raw cell: numbers become `Num`, everything else `Text`.
    pub fn parse(raw: &str) -> Value {
        match raw.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Value::Num(v),
            _ => Value::Text(raw.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            Value::Text(_) => None,
        }
    }

    /// Truthiness used for event markers such as knee replacement.
    pub fn is_truthy(&self) -> bool {
        match self {
            Value::Num(v) => *v != 0.0,
            Value::Text(s) => matches!(
                s.trim().to_ascii_lowercase().as_str(),
                "1" | "true" | "yes" | "y"
            ),
        }
    }

    /// Canonical total order: numbers (numerically) before text (lexicographically).
    pub fn canonical_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Num(_), Value::Text(_)) => Ordering::Less,
            (Value::Text(_), Value::Num(_)) => Ordering::Greater,
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
        }
    }

    /// Key usable in hash maps and ordered sets.
    pub fn key(&self) -> ValueKey {
        match self {
            Value::Num(v) => ValueKey::Num(v.to_bits()),
            Value::Text(s) => ValueKey::Text(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ValueKey {
    Num(u64),
    Text(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributeMeta {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub fill_forward: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_value: Option<Value>,
    #[serde(default)]
    pub excluded: bool,
}

/// Column names carrying clinical roles (outcomes, selection inputs, events).
///
/// Index 0 of every per-knee pair is the left knee.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Roles {
    pub pain_left: Option<String>,
    pub pain_right: Option<String>,
    pub jsw_left: Option<String>,
    pub jsw_right: Option<String>,
    pub replacement: Option<String>,
    pub knee_pain_left: Option<String>,
    pub knee_pain_right: Option<String>,
    pub age: Option<String>,
    pub stiffness: Option<String>,
    pub crepitus_left: Option<String>,
    pub crepitus_right: Option<String>,
    pub osteophytes_left: Option<String>,
    pub osteophytes_right: Option<String>,
    pub kl_left: Option<String>,
    pub kl_right: Option<String>,
}

/// Per-attribute metadata section as written in the TOML file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributeSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<AttributeKind>,
    pub fill_forward: bool,
    #[serde(rename = "default", skip_serializing_if = "Option::is_none")]
    pub default_value: Option<toml::Value>,
    pub excluded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Metadata {
    pub patient_column: String,
    pub timepoint_column: String,
    pub roles: Roles,
    pub attributes: BTreeMap<String, AttributeSection>,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            patient_column: "patient".into(),
            timepoint_column: "timepoint".into(),
            roles: Roles::default(),
            attributes: BTreeMap::new(),
        }
    }
}

impl Metadata {
    pub fn parse(text: &str) -> Result<Metadata> {
        toml::from_str(text).map_err(|e| Error::Metadata(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Metadata(e.to_string()))
    }
}

fn toml_to_value(v: &toml::Value) -> Result<Value> {
    match v {
        toml::Value::Integer(i) => Ok(Value::Num(*i as f64)),
        toml::Value::Float(f) => Ok(Value::Num(*f)),
        toml::Value::String(s) => Ok(Value::parse(s)),
        toml::Value::Boolean(b) => Ok(Value::Num(if *b { 1.0 } else { 0.0 })),
        other => Err(Error::Metadata(format!("unsupported default value {other}"))),
    }
}

fn value_to_toml(v: &Value) -> toml::Value {
    match v {
        Value::Num(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => toml::Value::Integer(*f as i64),
        Value::Num(f) => toml::Value::Float(*f),
        Value::Text(s) => toml::Value::String(s.clone()),
    }
}

/// Dense patient × timepoint × attribute store.
#[derive(Clone, Debug, PartialEq)]
pub struct CohortTable {
    pub patients: Vec<String>,
    pub timepoints: Vec<i32>,
    pub attributes: Vec<AttributeMeta>,
    pub roles: Roles,
    observed: Vec<bool>,
    cells: Vec<Option<Value>>,
}

impl CohortTable {
    /// Empty table with every visit unobserved.
    pub fn new(
        patients: Vec<String>,
        timepoints: Vec<i32>,
        attributes: Vec<AttributeMeta>,
        roles: Roles,
    ) -> Result<CohortTable> {
        if timepoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("timepoints must be strictly increasing".into()));
        }
        for a in &attributes {
            if a.default_value.is_some() && a.kind == AttributeKind::Continuous {
                return Err(Error::Metadata(format!(
                    "attribute `{}`: defaults are only allowed for categorical/ordinal attributes",
                    a.name
                )));
            }
        }
        let visits = patients.len() * timepoints.len();
        Ok(CohortTable {
            observed: vec![false; visits],
            cells: vec![None; visits * attributes.len()],
            patients,
            timepoints,
            attributes,
            roles,
        })
    }

    fn visit(&self, patient: usize, tp: usize) -> usize {
        patient * self.timepoints.len() + tp
    }

    pub fn n_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn timepoint_index(&self, year: i32) -> Option<usize> {
        self.timepoints.binary_search(&year).ok()
    }

    pub fn is_observed(&self, patient: usize, tp: usize) -> bool {
        self.observed[self.visit(patient, tp)]
    }

    pub fn set_observed(&mut self, patient: usize, tp: usize, observed: bool) {
        let v = self.visit(patient, tp);
        self.observed[v] = observed;
    }

    pub fn cell(&self, patient: usize, tp: usize, attr: usize) -> Option<&Value> {
        self.cells[self.visit(patient, tp) * self.attributes.len() + attr].as_ref()
    }

    pub fn set_cell(&mut self, patient: usize, tp: usize, attr: usize, value: Option<Value>) {
        let idx = self.visit(patient, tp) * self.attributes.len() + attr;
        self.cells[idx] = value;
    }

    /// Snapshot of every attribute at one visit.
    pub fn visit_row(&self, patient: usize, tp: usize) -> &[Option<Value>] {
        let start = self.visit(patient, tp) * self.attributes.len();
        &self.cells[start..start + self.attributes.len()]
    }

    /// Observed timepoint indices for one patient, in increasing order.
    pub fn observed_timepoints(&self, patient: usize) -> Vec<usize> {
        (0..self.timepoints.len())
            .filter(|&t| self.is_observed(patient, t))
            .collect()
    }

    pub fn role_index(&self, role: &Option<String>) -> Option<usize> {
        role.as_deref().and_then(|n| self.attribute_index(n))
    }

    fn role_num(&self, role: &Option<String>, patient: usize, tp: usize) -> Option<f64> {
        self.role_index(role)
            .and_then(|a| self.cell(patient, tp, a))
            .and_then(Value::as_f64)
    }

    /// Metadata describing this table, suitable for [`write_cohort`].
    pub fn metadata(&self, patient_column: &str, timepoint_column: &str) -> Metadata {
        let attributes = self
            .attributes
            .iter()
            .map(|a| {
                (
                    a.name.clone(),
                    AttributeSection {
                        kind: Some(a.kind),
                        fill_forward: a.fill_forward,
                        default_value: a.default_value.as_ref().map(value_to_toml),
                        excluded: a.excluded,
                    },
                )
            })
            .collect();
        Metadata {
            patient_column: patient_column.into(),
            timepoint_column: timepoint_column.into(),
            roles: self.roles.clone(),
            attributes,
        }
    }
}

fn infer_kind(raw: &[&str]) -> AttributeKind {
    let distinct: BTreeSet<&str> = raw.iter().copied().filter(|s| !s.is_empty()).collect();
    if distinct.len() <= CATEGORICAL_MAX_DISTINCT {
        return AttributeKind::Categorical;
    }
    if distinct.iter().all(|s| matches!(Value::parse(s), Value::Num(_))) {
        AttributeKind::Continuous
    } else {
        AttributeKind::Categorical
    }
}

/// Loads a cohort from a CSV data file and a TOML metadata file.
pub fn load_cohort(data_file: &Path, metadata_file: &Path) -> Result<CohortTable> {
    let meta_text =
        std::fs::read_to_string(metadata_file).map_err(|e| Error::io(metadata_file, e))?;
    let metadata = Metadata::parse(&meta_text)?;
    let data = std::fs::File::open(data_file).map_err(|e| Error::io(data_file, e))?;
    parse_cohort(data, &metadata)
}

/// Parses CSV visit rows against metadata.
pub fn parse_cohort<R: Read>(data: R, metadata: &Metadata) -> Result<CohortTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(data);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let patient_col = headers
        .iter()
        .position(|h| *h == metadata.patient_column)
        .ok_or_else(|| Error::Malformed(format!("missing key column `{}`", metadata.patient_column)))?;
    let tp_col = headers
        .iter()
        .position(|h| *h == metadata.timepoint_column)
        .ok_or_else(|| {
            Error::Malformed(format!("missing key column `{}`", metadata.timepoint_column))
        })?;
    let attr_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != patient_col && c != tp_col)
        .collect();
    for &c in &attr_cols {
        if !metadata.attributes.contains_key(&headers[c]) {
            return Err(Error::UnknownColumn(headers[c].clone()));
        }
    }

    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(Error::Malformed(format!(
                "row {} has {} fields, expected {}",
                records.len() + 1,
                rec.len(),
                headers.len()
            )));
        }
        records.push(rec);
    }

    let mut attributes = Vec::with_capacity(attr_cols.len());
    for &c in &attr_cols {
        let name = &headers[c];
        let section = &metadata.attributes[name];
        let kind = match section.kind {
            Some(k) => k,
            None => {
                let raw: Vec<&str> = records.iter().map(|r| &r[c]).collect();
                infer_kind(&raw)
            }
        };
        let default_value = section.default_value.as_ref().map(toml_to_value).transpose()?;
        attributes.push(AttributeMeta {
            name: name.clone(),
            kind,
            fill_forward: section.fill_forward,
            default_value,
            excluded: section.excluded,
        });
    }

    let mut patients: Vec<String> = Vec::new();
    let mut patient_index: HashMap<String, usize> = HashMap::new();
    let mut years = BTreeSet::new();
    let mut keys = Vec::with_capacity(records.len());
    for (row, rec) in records.iter().enumerate() {
        let pid = rec[patient_col].to_string();
        let year: i32 = rec[tp_col].trim().parse().map_err(|_| Error::KindMismatch {
            row: row + 1,
            column: headers[tp_col].clone(),
            value: rec[tp_col].to_string(),
            kind: "integer timepoint".into(),
        })?;
        let p = *patient_index.entry(pid.clone()).or_insert_with(|| {
            patients.push(pid);
            patients.len() - 1
        });
        years.insert(year);
        keys.push((p, year));
    }

    let timepoints: Vec<i32> = years.into_iter().collect();
    let mut table = CohortTable::new(patients, timepoints, attributes, metadata.roles.clone())?;
    for (row, (rec, &(p, year))) in records.iter().zip(&keys).enumerate() {
        let t = table.timepoint_index(year).expect("collected above");
        if table.is_observed(p, t) {
            return Err(Error::Malformed(format!(
                "duplicate visit for patient `{}` at timepoint {year}",
                table.patients[p]
            )));
        }
        table.set_observed(p, t, true);
        for (a, &c) in attr_cols.iter().enumerate() {
            let raw = &rec[c];
            if raw.is_empty() {
                continue;
            }
            let value = Value::parse(raw);
            let kind = table.attributes[a].kind;
            if kind.is_numeric() && value.as_f64().is_none() {
                return Err(Error::KindMismatch {
                    row: row + 1,
                    column: headers[c].clone(),
                    value: raw.to_string(),
                    kind: kind.to_string(),
                });
            }
            table.set_cell(p, t, a, Some(value));
        }
    }
    Ok(table)
}

/// Writes observed visits as CSV; the inverse of [`parse_cohort`].
pub fn write_cohort<W: Write>(table: &CohortTable, metadata: &Metadata, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![metadata.patient_column.clone(), metadata.timepoint_column.clone()];
    header.extend(table.attributes.iter().map(|a| a.name.clone()));
    w.write_record(&header)?;
    for p in 0..table.patients.len() {
        for t in table.observed_timepoints(p) {
            let mut rec = vec![table.patients[p].clone(), table.timepoints[t].to_string()];
            rec.extend(
                table
                    .visit_row(p, t)
                    .iter()
                    .map(|c| c.as_ref().map(Value::to_string).unwrap_or_default()),
            );
            w.write_record(&rec)?;
        }
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Start/end outcome measurements of a period; index 0 is the left knee.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRaw {
    pub pain_start: [Option<f64>; 2],
    pub pain_end: [Option<f64>; 2],
    pub jsw_start: [Option<f64>; 2],
    pub jsw_end: [Option<f64>; 2],
}

/// One observation window of one patient.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodRecord {
    pub patient: String,
    pub patient_index: usize,
    pub start_tp: i32,
    pub end_tp: i32,
    pub duration_years: f64,
    /// Every attribute at the start visit, aligned with `CohortTable::attributes`.
    pub features: Vec<Option<Value>>,
    pub outcome: OutcomeRaw,
    pub after_replacement: bool,
}

impl PeriodRecord {
    pub fn id(&self) -> String {
        format!("{}:{}-{}", self.patient, self.start_tp, self.end_tp)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodRule {
    pub min_years: i32,
    /// Drop periods whose end visit is the replacement visit itself.
    pub exclude_ending_at_replacement: bool,
}

impl Default for PeriodRule {
    fn default() -> Self {
        PeriodRule {
            min_years: 2,
            exclude_ending_at_replacement: true,
        }
    }
}

/// First replacement year per patient index, read from the `replacement` role.
pub fn replacement_events(table: &CohortTable) -> BTreeMap<usize, i32> {
    let mut events = BTreeMap::new();
    let Some(attr) = table.role_index(&table.roles.replacement) else {
        return events;
    };
    for p in 0..table.patients.len() {
        if let Some(t) = table
            .observed_timepoints(p)
            .into_iter()
            .find(|&t| table.cell(p, t, attr).is_some_and(Value::is_truthy))
        {
            events.insert(p, table.timepoints[t]);
        }
    }
    events
}

/// Every period of at least `rule.min_years`, flagged when it reaches a replacement.
pub fn enumerate_periods(
    table: &CohortTable,
    replacements: &BTreeMap<usize, i32>,
    rule: PeriodRule,
) -> Vec<PeriodRecord> {
    let roles = &table.roles;
    let mut periods = Vec::new();
    for p in 0..table.patients.len() {
        let visits = table.observed_timepoints(p);
        for (i, &a) in visits.iter().enumerate() {
            for &b in &visits[i + 1..] {
                let (start, end) = (table.timepoints[a], table.timepoints[b]);
                if end - start < rule.min_years {
                    continue;
                }
                let after_replacement = match replacements.get(&p) {
                    Some(&r) if rule.exclude_ending_at_replacement => end >= r,
                    Some(&r) => end > r,
                    None => false,
                };
                let outcome = OutcomeRaw {
                    pain_start: [
                        table.role_num(&roles.pain_left, p, a),
                        table.role_num(&roles.pain_right, p, a),
                    ],
                    pain_end: [
                        table.role_num(&roles.pain_left, p, b),
                        table.role_num(&roles.pain_right, p, b),
                    ],
                    jsw_start: [
                        table.role_num(&roles.jsw_left, p, a),
                        table.role_num(&roles.jsw_right, p, a),
                    ],
                    jsw_end: [
                        table.role_num(&roles.jsw_left, p, b),
                        table.role_num(&roles.jsw_right, p, b),
                    ],
                };
                periods.push(PeriodRecord {
                    patient: table.patients[p].clone(),
                    patient_index: p,
                    start_tp: start,
                    end_tp: end,
                    duration_years: f64::from(end - start),
                    features: table.visit_row(p, a).to_vec(),
                    outcome,
                    after_replacement,
                });
            }
        }
    }
    periods
}

/// Periods usable downstream: long enough and strictly before any replacement.
pub fn build_periods(
    table: &CohortTable,
    replacements: &BTreeMap<usize, i32>,
    rule: PeriodRule,
) -> Vec<PeriodRecord> {
    enumerate_periods(table, replacements, rule)
        .into_iter()
        .filter(|p| !p.after_replacement)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(text: &str) -> Metadata {
        Metadata::parse(text).unwrap()
    }

    const META: &str = r#"
[attributes.barcode]
kind = "categorical"
excluded = true

[attributes.jsw]
kind = "continuous"

[attributes.grade]
"#;

    #[test]
    fn excluded_flag_and_missing_marker() {
        let csv = "patient,timepoint,barcode,jsw,grade\nA,0,X1,4.5,1\nA,2,X2,,2\n";
        let t = parse_cohort(csv.as_bytes(), &meta(META)).unwrap();
        assert_eq!(t.attributes.len(), 3);
        assert!(t.attributes[0].excluded);
        assert_eq!(t.cell(0, 0, 1), Some(&Value::Num(4.5)));
        assert_eq!(t.cell(0, 1, 1), None);
        assert_eq!(t.timepoints, vec![0, 2]);
    }

    #[test]
    fn kind_heuristic_when_metadata_omits_kind() {
        let mut csv = String::from("patient,timepoint,barcode,jsw,grade\n");
        for i in 0..10 {
            csv.push_str(&format!("P{i},0,b,1.0,{i}\n"));
        }
        let t = parse_cohort(csv.as_bytes(), &meta(META)).unwrap();
        assert_eq!(t.attributes[2].kind, AttributeKind::Categorical);

        let mut csv = String::from("patient,timepoint,barcode,jsw,grade\n");
        for i in 0..11 {
            csv.push_str(&format!("P{i},0,b,1.0,{i}\n"));
        }
        let t = parse_cohort(csv.as_bytes(), &meta(META)).unwrap();
        assert_eq!(t.attributes[2].kind, AttributeKind::Continuous);
    }

    #[test]
    fn metadata_kind_wins_over_heuristic() {
        let m = meta("[attributes.v]\nkind = \"continuous\"\n");
        let csv = "patient,timepoint,v\nA,0,1\nB,0,2\n";
        let t = parse_cohort(csv.as_bytes(), &m).unwrap();
        assert_eq!(t.attributes[0].kind, AttributeKind::Continuous);
    }

    #[test]
    fn unknown_column_is_named() {
        let csv = "patient,timepoint,jsw,mystery\nA,0,1,2\n";
        let err = parse_cohort(csv.as_bytes(), &meta(META)).unwrap_err();
        assert!(matches!(err, Error::UnknownColumn(ref c) if c == "mystery"), "{err}");
    }

    #[test]
    fn text_in_continuous_column_reports_coordinates() {
        let csv = "patient,timepoint,jsw\nA,0,1.0\nA,2,abc\n";
        match parse_cohort(csv.as_bytes(), &meta(META)).unwrap_err() {
            Error::KindMismatch { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "jsw");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn continuous_default_rejected() {
        let m = meta("[attributes.v]\nkind = \"continuous\"\ndefault = 0\n");
        let csv = "patient,timepoint,v\nA,0,1\n";
        assert!(matches!(parse_cohort(csv.as_bytes(), &m), Err(Error::Metadata(_))));
    }

    fn table_with_visits(visits: &[i32]) -> CohortTable {
        let mut t = CohortTable::new(
            vec!["A".into()],
            visits.to_vec(),
            vec![AttributeMeta {
                name: "x".into(),
                kind: AttributeKind::Continuous,
                fill_forward: false,
                default_value: None,
                excluded: false,
            }],
            Roles::default(),
        )
        .unwrap();
        for i in 0..visits.len() {
            t.set_observed(0, i, true);
            t.set_cell(0, i, 0, Some(Value::Num(i as f64)));
        }
        t
    }

    #[test]
    fn all_pairs_at_least_two_years() {
        let t = table_with_visits(&[0, 2, 5, 8]);
        let periods = build_periods(&t, &BTreeMap::new(), PeriodRule::default());
        let pairs: Vec<(i32, i32)> = periods.iter().map(|p| (p.start_tp, p.end_tp)).collect();
        assert_eq!(pairs, vec![(0, 2), (0, 5), (0, 8), (2, 5), (2, 8), (5, 8)]);
        // features are start-of-period snapshots
        assert_eq!(periods[3].features[0], Some(Value::Num(1.0)));
    }

    #[test]
    fn replacement_at_end_visit_excludes_period() {
        let t = table_with_visits(&[0, 1, 2]);
        let reps = BTreeMap::from([(0usize, 2)]);
        assert!(build_periods(&t, &reps, PeriodRule::default()).is_empty());
        let lenient = PeriodRule {
            exclude_ending_at_replacement: false,
            ..PeriodRule::default()
        };
        let kept = build_periods(&t, &reps, lenient);
        assert_eq!(kept.len(), 1);
        assert_eq!((kept[0].start_tp, kept[0].end_tp), (0, 2));
    }

    #[test]
    fn single_visit_yields_nothing() {
        let t = table_with_visits(&[4]);
        assert!(build_periods(&t, &BTreeMap::new(), PeriodRule::default()).is_empty());
    }

    #[test]
    fn non_increasing_timepoints_rejected() {
        assert!(CohortTable::new(vec![], vec![0, 2, 2], vec![], Roles::default()).is_err());
    }
}
