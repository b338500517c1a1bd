//! Exact path-dependent Shapley attributions for trees and forests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{Node, RandomForestModel, Tree};

/// Largest number of distinct used features the brute-force oracle accepts.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 20;

/// What a tree's output is: the probability of `class` in `output`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputId {
    pub output: usize,
    pub class: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapAttribution {
    pub phi: Vec<f64>,
    pub base_value: f64,
    /// Model output for the instance; equals `base_value + Σ phi`.
    pub prediction: f64,
    pub output: OutputId,
    pub values: Vec<f64>,
}

fn leaf_value(tree: &Tree, node: usize, out: OutputId) -> f64 {
    tree.leaf_proba(node, out.output)[out.class]
}

fn check_tree(tree: &Tree) -> Result<()> {
    for (i, n) in tree.nodes.iter().enumerate() {
        if !(n.cover() > 0.0) {
            return Err(Error::MalformedModel(format!("node {i} has zero cover")));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug)]
struct PathElem {
    feature: Option<usize>,
    zero: f64,
    one: f64,
    weight: f64,
}

fn extend(path: &mut Vec<PathElem>, zero: f64, one: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElem {
        feature,
        zero,
        one,
        weight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (l + 1) as f64;
        path[i].weight = zero * path[i].weight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &mut Vec<PathElem>, i: usize) {
    let l = path.len();
    let (zero, one) = (path[i].zero, path[i].one);
    let mut n = path[l - 1].weight;
    for j in (0..l - 1).rev() {
        if one != 0.0 {
            let t = path[j].weight;
            path[j].weight = n * l as f64 / ((j + 1) as f64 * one);
            n = t - path[j].weight * zero * (l - 1 - j) as f64 / l as f64;
        } else {
            path[j].weight = path[j].weight * l as f64 / (zero * (l - 1 - j) as f64);
        }
    }
    for j in i..l - 1 {
        path[j].feature = path[j + 1].feature;
        path[j].zero = path[j + 1].zero;
        path[j].one = path[j + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElem], i: usize) -> f64 {
    let mut p = path.to_vec();
    unwind(&mut p, i);
    p.iter().map(|e| e.weight).sum()
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    out: OutputId,
    node: usize,
    mut path: Vec<PathElem>,
    zero: f64,
    one: f64,
    feature: Option<usize>,
    phi: &mut [f64],
) {
    extend(&mut path, zero, one, feature);
    match &tree.nodes[node] {
        Node::Leaf { .. } => {
            let v = leaf_value(tree, node, out);
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let e = path[i];
                phi[e.feature.expect("non-root path element")] += w * (e.one - e.zero) * v;
            }
        }
        Node::Split {
            feature: f,
            threshold,
            left,
            right,
            cover,
            ..
        } => {
            let (hot, cold) = if x[*f] <= *threshold { (*left, *right) } else { (*right, *left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().skip(1).position(|e| e.feature == Some(*f)).map(|k| k + 1) {
                incoming_zero = path[k].zero;
                incoming_one = path[k].one;
                unwind(&mut path, k);
            }
            let hot_frac = tree.nodes[hot].cover() / cover;
            let cold_frac = tree.nodes[cold].cover() / cover;
            recurse(tree, x, out, hot, path.clone(), incoming_zero * hot_frac, incoming_one, Some(*f), phi);
            recurse(tree, x, out, cold, path, incoming_zero * cold_frac, 0.0, Some(*f), phi);
        }
    }
}

/// Cover-weighted expectation of the tree output over every leaf.
pub fn expected_value(tree: &Tree, out: OutputId) -> f64 {
    conditional_value(tree, &[], out, &|_| false)
}

fn conditional_value(tree: &Tree, x: &[f64], out: OutputId, known: &dyn Fn(usize) -> bool) -> f64 {
    fn go(tree: &Tree, x: &[f64], out: OutputId, known: &dyn Fn(usize) -> bool, node: usize) -> f64 {
        match &tree.nodes[node] {
            Node::Leaf { .. } => leaf_value(tree, node, out),
            Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
                ..
            } => {
                if known(*feature) {
                    let next = if x[*feature] <= *threshold { *left } else { *right };
                    go(tree, x, out, known, next)
                } else {
                    let l = tree.nodes[*left].cover() / cover;
                    let r = tree.nodes[*right].cover() / cover;
                    l * go(tree, x, out, known, *left) + r * go(tree, x, out, known, *right)
                }
            }
        }
    }
    go(tree, x, out, known, 0)
}

/// Path-dependent TreeSHAP values of one tree output; `phi.len() == x.len()`.
pub fn tree_shap(tree: &Tree, x: &[f64], out: OutputId) -> Result<Vec<f64>> {
    check_tree(tree)?;
    let mut phi = vec![0.0; x.len()];
    recurse(tree, x, out, 0, Vec::new(), 1.0, 1.0, None, &mut phi);
    Ok(phi)
}

/// Exact Shapley values by enumerating every subset of the used features.
pub fn brute_force_shapley(tree: &Tree, x: &[f64], out: OutputId) -> Result<Vec<f64>> {
    check_tree(tree)?;
    let used = tree.used_features();
    let m = used.len();
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::TooManyFeatures(m));
    }
    let values: Vec<f64> = (0..1usize << m)
        .map(|mask| {
            conditional_value(tree, x, out, &|f| {
                used.iter().position(|&u| u == f).is_some_and(|k| mask >> k & 1 == 1)
            })
        })
        .collect();
    // weight(s) = s!(m-s-1)!/m!
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let mut phi = vec![0.0; x.len()];
    for (k, &f) in used.iter().enumerate() {
        let mut acc = 0.0;
        for mask in 0..1usize << m {
            if mask >> k & 1 == 1 {
                continue;
            }
            let s = mask.count_ones() as usize;
            let w = fact[s] * fact[m - s - 1] / fact[m];
            acc += w * (values[mask | 1 << k] - values[mask]);
        }
        phi[f] = acc;
    }
    Ok(phi)
}

/// Mean of per-tree attributions; locally accurate against `predict_proba`.
pub fn forest_shap(model: &RandomForestModel, x: &[f64], out: OutputId) -> Result<ShapAttribution> {
    if x.len() != model.n_features {
        return Err(Error::WidthMismatch {
            expected: model.n_features,
            got: x.len(),
        });
    }
    if out.output >= model.n_outputs() || out.class >= model.n_classes[out.output] {
        return Err(Error::InvalidInput(format!("model has no output {}/{}", out.output, out.class)));
    }
    let n = model.trees.len() as f64;
    let mut phi = vec![0.0; x.len()];
    let mut base = 0.0;
    for tree in &model.trees {
        for (a, v) in phi.iter_mut().zip(tree_shap(tree, x, out)?) {
            *a += v / n;
        }
        base += expected_value(tree, out) / n;
    }
    let prediction = model.predict_proba(x)?[out.output][out.class];
    Ok(ShapAttribution {
        phi,
        base_value: base,
        prediction,
        output: out,
        values: x.to_vec(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureImpact {
    pub feature: usize,
    pub name: String,
    pub mean_abs_phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub instance: usize,
    pub feature: usize,
    pub value: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactSummary {
    /// Features with nonzero impact, by decreasing mean |φ| (ties → feature index).
    pub ranking: Vec<FeatureImpact>,
    pub scatter: Vec<ScatterPoint>,
}

pub fn summarize_impact(attributions: &[ShapAttribution], names: &[String]) -> ImpactSummary {
    let d = names.len();
    let mut mean = vec![0.0; d];
    let mut scatter = Vec::new();
    for (i, a) in attributions.iter().enumerate() {
        for j in 0..d {
            mean[j] += a.phi[j].abs() / attributions.len() as f64;
            scatter.push(ScatterPoint {
                instance: i,
                feature: j,
                value: a.values[j],
                phi: a.phi[j],
            });
        }
    }
    let mut ranking: Vec<FeatureImpact> = (0..d)
        .filter(|&j| mean[j] > 0.0)
        .map(|j| FeatureImpact {
            feature: j,
            name: names[j].clone(),
            mean_abs_phi: mean[j],
        })
        .collect();
    ranking.sort_by(|a, b| b.mean_abs_phi.total_cmp(&a.mean_abs_phi).then(a.feature.cmp(&b.feature)));
    ImpactSummary { ranking, scatter }
}
