#![allow(dead_code)]

use oaprog::cohort::{AttributeKind, AttributeMeta, Value};
use oaprog::dataset::Dataset;
use oaprog::labeling::ProgressionClass;
use oaprog::preprocess::FeatureFrame;
use oaprog::seed;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn continuous(name: &str) -> AttributeMeta {
    AttributeMeta {
        name: name.to_string(),
        kind: AttributeKind::Continuous,
        fill_forward: false,
        default_value: None,
        excluded: false,
    }
}

/// Dataset of numeric columns `x0..`, ids `i0..`.
pub fn numeric_dataset(rows: &[Vec<f64>], classes: &[ProgressionClass]) -> Dataset {
    let d = rows.first().map_or(0, Vec::len);
    let frame = FeatureFrame {
        attributes: (0..d).map(|j| continuous(&format!("x{j}"))).collect(),
        rows: rows.iter().map(|r| r.iter().map(|&v| Some(Value::Num(v))).collect()).collect(),
    };
    Dataset::new((0..rows.len()).map(|i| format!("i{i}")).collect(), frame, classes.to_vec())
}

/// Classes in roughly the given proportions, shuffled; every class present.
pub fn shuffled_classes(rng: &mut seed::Rng, n: usize, fractions: [f64; 4]) -> Vec<ProgressionClass> {
    let mut classes: Vec<ProgressionClass> = ProgressionClass::ALL.to_vec();
    for _ in 4..n {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = 3;
        for (c, f) in fractions.iter().enumerate() {
            acc += f;
            if u < acc {
                pick = c;
                break;
            }
        }
        classes.push(ProgressionClass::from_index(pick));
    }
    classes.shuffle(rng);
    classes
}

/// Gaussian features; the first two columns are shifted by the P and S bits
/// when `signal > 0`.
pub fn gaussian_dataset(rng: &mut seed::Rng, n: usize, d: usize, signal: f64) -> Dataset {
    let classes = shuffled_classes(rng, n, [0.4, 0.2, 0.25, 0.15]);
    let rows: Vec<Vec<f64>> = classes
        .iter()
        .map(|c| {
            let pair = c.label_pair();
            (0..d)
                .map(|j| {
                    let z: f64 = rng.sample(StandardNormal);
                    let shift = match j {
                        0 if pair.p => signal,
                        1 if pair.s => signal,
                        _ => 0.0,
                    };
                    z + shift
                })
                .collect()
        })
        .collect();
    numeric_dataset(&rows, &classes)
}
