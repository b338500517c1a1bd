//! Synthetic longitudinal knee cohorts with known progression classes.
//!
//! Each patient gets one class, drawn by exact quota, and keeps it in every
//! period: pain and joint-space trajectories are built so that every period
//! of the patient labels to that class. Informative attributes carry a
//! per-bit mean shift of configurable strength; noise attributes carry none.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cohort::{AttributeKind, AttributeMeta, AttributeSection, CohortTable, Metadata, Roles, Value};
use crate::error::{Error, Result};
use crate::labeling::ProgressionClass;
use crate::seed;

/// Longest follow-up span for which the trajectory guarantees hold.
pub const MAX_SPAN_YEARS: i32 = 10;
/// Shares of N patients whose pain starts high and resolves.
pub const RESOLVING_SHARE: f64 = 0.15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub timepoints: Vec<i32>,
    pub n_informative: usize,
    pub n_noise: usize,
    /// Target fractions of N, P, S, P+S.
    pub class_fractions: [f64; 4],
    /// Probability that a non-outcome cell is missing.
    pub missingness: f64,
    /// Mean shift of informative attributes between bit-negative and bit-positive patients.
    pub signal_p: f64,
    pub signal_s: f64,
    /// Share of patients with a knee replacement during follow-up.
    pub replacement_rate: f64,
    /// Keep pain, JSW, knee-pain and KL columns as model features. When
    /// false they are marked excluded (labelling and selection still read them).
    pub outcome_features: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 1000,
            timepoints: vec![0, 2, 5, 8],
            n_informative: 30,
            n_noise: 70,
            class_fractions: [0.63, 0.12, 0.20, 0.05],
            missingness: 0.05,
            signal_p: 0.5,
            signal_s: 0.5,
            replacement_rate: 0.02,
            outcome_features: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let sum: f64 = self.class_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.class_fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return bad(format!("class fractions {:?} must lie in [0, 1] and sum to 1", self.class_fractions));
        }
        for (name, v) in [("missingness", self.missingness), ("replacement_rate", self.replacement_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if self.signal_p < 0.0 || self.signal_s < 0.0 || !self.signal_p.is_finite() || !self.signal_s.is_finite() {
            return bad("signal strengths must be finite and non-negative".into());
        }
        if self.n_patients == 0 {
            return bad("n_patients must be positive".into());
        }
        let t = &self.timepoints;
        if t.len() < 2 || t.windows(2).any(|w| w[0] >= w[1]) {
            return bad("need at least two strictly increasing timepoints".into());
        }
        if t[t.len() - 1] - t[0] > MAX_SPAN_YEARS {
            return bad(format!("follow-up span exceeds {MAX_SPAN_YEARS} years"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PainSubtype {
    StableLow,
    Resolving,
    Sustained,
    Progressive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatientTruth {
    pub patient: String,
    pub class: ProgressionClass,
    pub pain_subtype: PainSubtype,
    /// Knee (0 = left) carrying the pain and narrowing trajectories.
    pub index_knee: usize,
    pub pain_start: f64,
    pub pain_slope: f64,
    pub jsw_start: [f64; 2],
    pub jsw_rate: [f64; 2],
    pub replacement_year: Option<i32>,
    /// Noise-free pain and JSW per timepoint and knee.
    pub pain: Vec<[f64; 2]>,
    pub jsw: Vec<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub patients: Vec<PatientTruth>,
}

impl GroundTruth {
    pub fn class_of(&self) -> BTreeMap<String, ProgressionClass> {
        self.patients.iter().map(|p| (p.patient.clone(), p.class)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCohort {
    pub table: CohortTable,
    pub metadata: Metadata,
    pub truth: GroundTruth,
}

/// Largest-remainder class counts, assigned to patients in shuffled order.
fn assign_classes(config: &SynthConfig) -> Vec<ProgressionClass> {
    let n = config.n_patients;
    let raw: Vec<f64> = config.class_fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let short = n - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    let mut classes: Vec<ProgressionClass> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat_n(ProgressionClass::from_index(c), k))
        .collect();
    classes.shuffle(&mut seed::rng(config.seed, "generator", &[u64::MAX]));
    classes
}

struct Columns {
    pain: [usize; 2],
    jsw: [usize; 2],
    knee_pain: [usize; 2],
    kl: [usize; 2],
    crepitus: [usize; 2],
    osteophytes: [usize; 2],
    age: usize,
    stiffness: usize,
    replacement: usize,
    barcode: usize,
    injury_history: usize,
    rare_disorder: usize,
    informative: usize,
    noise: usize,
}

fn attribute(name: &str, kind: AttributeKind) -> AttributeMeta {
    AttributeMeta {
        name: name.to_string(),
        kind,
        fill_forward: false,
        default_value: None,
        excluded: false,
    }
}

fn informative_kind(j: usize) -> AttributeKind {
    match j % 3 {
        0 => AttributeKind::Continuous,
        1 => AttributeKind::Ordinal,
        _ => AttributeKind::Categorical,
    }
}

fn build_attributes(config: &SynthConfig) -> (Vec<AttributeMeta>, Columns, Roles) {
    use AttributeKind::*;
    let mut attrs = Vec::new();
    let mut push = |m: AttributeMeta| {
        attrs.push(m);
        attrs.len() - 1
    };
    let outcome = |name: &str, kind| AttributeMeta {
        excluded: !config.outcome_features,
        ..attribute(name, kind)
    };
    let pain = [push(outcome("womac_pain_l", Continuous)), push(outcome("womac_pain_r", Continuous))];
    let jsw = [push(outcome("jsw_l", Continuous)), push(outcome("jsw_r", Continuous))];
    let knee_pain = [push(outcome("knee_pain_l", Categorical)), push(outcome("knee_pain_r", Categorical))];
    let kl = [push(outcome("kl_l", Ordinal)), push(outcome("kl_r", Ordinal))];
    let crepitus = [push(attribute("crepitus_l", Categorical)), push(attribute("crepitus_r", Categorical))];
    let osteophytes = [push(attribute("osteophytes_l", Categorical)), push(attribute("osteophytes_r", Categorical))];
    let age = push(attribute("age", Continuous));
    let stiffness = push(attribute("stiffness_min", Continuous));
    let replacement = push(AttributeMeta {
        excluded: true,
        ..attribute("knee_replacement", Categorical)
    });
    let barcode = push(AttributeMeta {
        excluded: true,
        ..attribute("barcode", Categorical)
    });
    let injury_history = push(AttributeMeta {
        fill_forward: true,
        ..attribute("injury_history", Categorical)
    });
    let rare_disorder = push(AttributeMeta {
        fill_forward: true,
        default_value: Some(Value::Num(0.0)),
        ..attribute("rare_disorder", Categorical)
    });
    let informative = attrs.len();
    for j in 0..config.n_informative {
        attrs.push(attribute(&format!("f_inf_{j:02}"), informative_kind(j)));
    }
    let noise = attrs.len();
    for j in 0..config.n_noise {
        attrs.push(attribute(&format!("f_noise_{j:02}"), Continuous));
    }
    let name = |i: usize| Some(attrs[i].name.clone());
    let roles = Roles {
        pain_left: name(pain[0]),
        pain_right: name(pain[1]),
        jsw_left: name(jsw[0]),
        jsw_right: name(jsw[1]),
        replacement: name(replacement),
        knee_pain_left: name(knee_pain[0]),
        knee_pain_right: name(knee_pain[1]),
        age: name(age),
        stiffness: name(stiffness),
        crepitus_left: name(crepitus[0]),
        crepitus_right: name(crepitus[1]),
        osteophytes_left: name(osteophytes[0]),
        osteophytes_right: name(osteophytes[1]),
        kl_left: name(kl[0]),
        kl_right: name(kl[1]),
    };
    let cols = Columns {
        pain,
        jsw,
        knee_pain,
        kl,
        crepitus,
        osteophytes,
        age,
        stiffness,
        replacement,
        barcode,
        injury_history,
        rare_disorder,
        informative,
        noise,
    };
    (attrs, cols, roles)
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn metadata_for(attrs: &[AttributeMeta], roles: &Roles) -> Metadata {
    let attributes = attrs
        .iter()
        .map(|a| {
            let section = AttributeSection {
                kind: Some(a.kind),
                fill_forward: a.fill_forward,
                default_value: a.default_value.as_ref().map(|v| match v {
                    Value::Num(f) => toml::Value::Integer(*f as i64),
                    Value::Text(s) => toml::Value::String(s.clone()),
                }),
                excluded: a.excluded,
            };
            (a.name.clone(), section)
        })
        .collect();
    Metadata {
        roles: roles.clone(),
        attributes,
        ..Metadata::default()
    }
}

/// Generates a cohort and its ground truth from one master seed.
pub fn generate_cohort(config: &SynthConfig) -> Result<SyntheticCohort> {
    config.validate()?;
    let classes = assign_classes(config);
    let (attrs, cols, roles) = build_attributes(config);
    let patients: Vec<String> = (0..config.n_patients).map(|i| format!("P{i:05}")).collect();
    let metadata = metadata_for(&attrs, &roles);
    let mut table = CohortTable::new(patients.clone(), config.timepoints.clone(), attrs, roles)?;
    let tps = &config.timepoints;
    let t0 = tps[0];
    let span = f64::from(tps[tps.len() - 1] - t0);
    let std = Normal::new(0.0, 1.0).expect("unit normal");

    let mut truths = Vec::with_capacity(config.n_patients);
    for (p, &class) in classes.iter().enumerate() {
        let mut rng = seed::rng(config.seed, "generator", &[p as u64]);
        let bits = class.label_pair();
        let index_knee = rng.random_range(0..2usize);

        let pain_subtype = if bits.p {
            if rng.random_bool(0.5) {
                PainSubtype::Sustained
            } else {
                PainSubtype::Progressive
            }
        } else if rng.random_bool(RESOLVING_SHARE) {
            PainSubtype::Resolving
        } else {
            PainSubtype::StableLow
        };
        let (pain_start, pain_slope) = match pain_subtype {
            PainSubtype::StableLow => (rng.random_range(0.0..25.0), rng.random_range(-0.5..0.5)),
            PainSubtype::Resolving => (rng.random_range(40.0..48.0), rng.random_range(-8.0..-6.0)),
            PainSubtype::Sustained => (rng.random_range(43.0..70.0), rng.random_range(-0.1..0.1)),
            PainSubtype::Progressive => (rng.random_range(30.0..34.0), rng.random_range(6.5..8.0)),
        };
        let other_gap: f64 = rng.random_range(2.0..20.0);

        let mut jsw_rate = [0.0; 2];
        let mut jsw_start = [0.0; 2];
        for k in 0..2 {
            if bits.s && k == index_knee {
                jsw_rate[k] = rng.random_range(0.34..0.5);
                jsw_start[k] = rng.random_range(4.5..6.5f64).max(jsw_rate[k] * span + 0.5);
            } else {
                jsw_rate[k] = rng.random_range(0.0..0.22);
                jsw_start[k] = rng.random_range(4.0..6.5f64).max(jsw_rate[k] * span + 0.5);
            }
        }

        let replacement_year = if tps.len() > 2 && rng.random_bool(config.replacement_rate) {
            Some(tps[rng.random_range(2..tps.len())])
        } else {
            None
        };
        let age0: f64 = rng.random_range(45.0..80.0);
        let crepitus_p = [rng.random_range(0.1..0.5), rng.random_range(0.1..0.5)];
        let injury = rng.random_bool(0.2);
        let rare = rng.random_bool(0.03);
        let barcode: u64 = rng.random();

        let mut pain_truth = Vec::with_capacity(tps.len());
        let mut jsw_truth = Vec::with_capacity(tps.len());
        for (t, &year) in tps.iter().enumerate() {
            table.set_observed(p, t, true);
            let dt = f64::from(year - t0);
            let index_pain = (pain_start + pain_slope * dt).clamp(0.0, 100.0);
            let noisy_index = (pain_start + pain_slope * dt + rng.random_range(-1.0..1.0)).clamp(0.0, 100.0);
            let mut pains = [0.0; 2];
            let mut pains_true = [0.0; 2];
            pains[index_knee] = noisy_index;
            pains[1 - index_knee] = (noisy_index - other_gap).max(0.0);
            pains_true[index_knee] = index_pain;
            pains_true[1 - index_knee] = (index_pain - other_gap).max(0.0);
            let mut jsws = [0.0; 2];
            let mut jsws_true = [0.0; 2];
            for k in 0..2 {
                jsws_true[k] = jsw_start[k] - jsw_rate[k] * dt;
                jsws[k] = (jsws_true[k] + rng.random_range(-0.02..0.02)).max(0.0);
            }
            pain_truth.push(pains_true);
            jsw_truth.push(jsws_true);

            let mut set = |a: usize, v: Value, rng: &mut seed::Rng, maskable: bool| {
                let missing = maskable && config.missingness > 0.0 && rng.random_bool(config.missingness);
                table.set_cell(p, t, a, if missing { None } else { Some(v) });
            };
            for k in 0..2 {
                set(cols.pain[k], Value::Num(round_to(pains[k], 1)), &mut rng, false);
                set(cols.jsw[k], Value::Num(round_to(jsws[k], 2)), &mut rng, false);
                set(cols.knee_pain[k], Value::Num(f64::from(u8::from(pains[k] >= 25.0))), &mut rng, true);
                let kl = ((6.5 - jsws[k]) / 1.2 + 0.3 * std.sample(&mut rng)).round().clamp(0.0, 4.0);
                set(cols.kl[k], Value::Num(kl), &mut rng, true);
                let crep = rng.random_bool(crepitus_p[k]);
                set(cols.crepitus[k], Value::Num(f64::from(u8::from(crep))), &mut rng, true);
                let ost = rng.random_bool(if kl >= 2.0 { 0.7 } else { 0.15 });
                set(cols.osteophytes[k], Value::Num(f64::from(u8::from(ost))), &mut rng, true);
            }
            set(cols.age, Value::Num(round_to(age0 + dt, 1)), &mut rng, true);
            let stiff: f64 = rng.random_range(0.0..60.0);
            set(cols.stiffness, Value::Num(stiff.round()), &mut rng, true);
            let replaced = replacement_year.is_some_and(|r| year >= r);
            set(cols.replacement, Value::Num(f64::from(u8::from(replaced))), &mut rng, false);
            set(cols.barcode, Value::Text(format!("BC{barcode:016x}{t}")), &mut rng, false);
            // reported at baseline only; later visits rely on fill-forward
            if t == 0 {
                set(cols.injury_history, Value::Num(f64::from(u8::from(injury))), &mut rng, true);
            }
            if rare {
                set(cols.rare_disorder, Value::Num(1.0), &mut rng, false);
            }
            for j in 0..config.n_informative {
                let (bit, strength) = if j % 2 == 0 { (bits.p, config.signal_p) } else { (bits.s, config.signal_s) };
                let shift = if bit { strength / 2.0 } else { -strength / 2.0 };
                let z = shift + std.sample(&mut rng);
                let v = match informative_kind(j) {
                    AttributeKind::Continuous => Value::Num(round_to(z, 3)),
                    AttributeKind::Ordinal => Value::Num((2.0 + z).round().clamp(0.0, 4.0)),
                    AttributeKind::Categorical => Value::Text(
                        if z < -0.5 {
                            "low"
                        } else if z < 0.5 {
                            "mid"
                        } else {
                            "high"
                        }
                        .to_string(),
                    ),
                };
                set(cols.informative + j, v, &mut rng, true);
            }
            for j in 0..config.n_noise {
                let z: f64 = std.sample(&mut rng);
                set(cols.noise + j, Value::Num(round_to(z, 3)), &mut rng, true);
            }
        }
        truths.push(PatientTruth {
            patient: patients[p].clone(),
            class,
            pain_subtype,
            index_knee,
            pain_start,
            pain_slope,
            jsw_start,
            jsw_rate,
            replacement_year,
            pain: pain_truth,
            jsw: jsw_truth,
        });
    }
    Ok(SyntheticCohort {
        table,
        metadata,
        truth: GroundTruth {
            config: config.clone(),
            patients: truths,
        },
    })
}
