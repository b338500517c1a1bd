use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{ClassWeights, Criterion, ForestConfig, Targets};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::seed;

/// Relative slack under which two impurity decreases count as tied.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
        /// Cover-weighted impurity decrease, summed over outputs.
        gain: f64,
    },
    Leaf {
        /// Weight-adjusted class counts, one vector per output.
        counts: Vec<Vec<f64>>,
        cover: f64,
        depth: usize,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// A decision tree stored as a node arena; the root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Builds a tree from explicit nodes, checking structural invariants.
    pub fn from_nodes(nodes: Vec<Node>, n_classes: &[usize]) -> Result<Tree> {
        if nodes.is_empty() {
            return Err(Error::MalformedModel("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            if !(node.cover() > 0.0) {
                return Err(Error::MalformedModel(format!("node {i} has non-positive cover")));
            }
            match node {
                Node::Split { left, right, threshold, .. } => {
                    if *left <= i || *right <= i || *left >= nodes.len() || *right >= nodes.len() {
                        return Err(Error::MalformedModel(format!("node {i} has invalid children")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::MalformedModel(format!("node {i} has a non-finite threshold")));
                    }
                }
                Node::Leaf { counts, .. } => {
                    if counts.len() != n_classes.len()
                        || counts.iter().zip(n_classes).any(|(c, &k)| c.len() != k)
                    {
                        return Err(Error::MalformedModel(format!("leaf {i} has the wrong shape")));
                    }
                    for c in counts {
                        if c.iter().any(|&v| v < 0.0 || !v.is_finite()) || c.iter().sum::<f64>() <= 0.0 {
                            return Err(Error::MalformedModel(format!("leaf {i} has invalid counts")));
                        }
                    }
                }
            }
        }
        Ok(Tree { nodes })
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { .. } => return i,
            }
        }
    }

    /// Leaf class proportions for one output.
    pub fn leaf_proba(&self, leaf: usize, output: usize) -> Vec<f64> {
        match &self.nodes[leaf] {
            Node::Leaf { counts, .. } => {
                let c = &counts[output];
                let total: f64 = c.iter().sum();
                c.iter().map(|v| v / total).collect()
            }
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    pub fn predict_proba(&self, row: &[f64], output: usize) -> Vec<f64> {
        self.leaf_proba(self.leaf_index(row), output)
    }

    pub fn depth(&self) -> usize {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Leaf { depth, .. } => Some(*depth),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Distinct features used by split nodes, sorted.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                _ => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

pub(crate) fn impurity(counts: &[f64], total: f64, criterion: Criterion) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    match criterion {
        Criterion::Gini => 1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>(),
        Criterion::Entropy => -counts
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|c| {
                let q = c / total;
                q * q.log2()
            })
            .sum::<f64>(),
    }
}

/// Impurity decrease of a split: parent impurity minus the size-weighted
/// child average, summed over outputs.
///
/// `left`/`right` hold weight-adjusted class counts per output.
pub fn split_impurity(left: &[Vec<f64>], right: &[Vec<f64>], criterion: Criterion) -> f64 {
    left.iter()
        .zip(right)
        .map(|(l, r)| {
            let parent: Vec<f64> = l.iter().zip(r).map(|(a, b)| a + b).collect();
            let (wl, wr): (f64, f64) = (l.iter().sum(), r.iter().sum());
            let w = wl + wr;
            if w <= 0.0 {
                return 0.0;
            }
            impurity(&parent, w, criterion)
                - (wl / w) * impurity(l, wl, criterion)
                - (wr / w) * impurity(r, wr, criterion)
        })
        .sum()
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    labels: &'a [usize],
    n_outputs: usize,
    offsets: Vec<usize>,
    n_classes: &'a [usize],
    total_classes: usize,
    sample_w: Vec<f64>,
    cover_w: Vec<f64>,
    criterion: Criterion,
    max_depth: Option<usize>,
    min_samples_split: usize,
    mtry: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    decrease: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn accumulate(&self, samples: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.total_classes];
        for &i in samples {
            self.add(&mut counts, i);
        }
        counts
    }

    #[inline]
    fn add(&self, counts: &mut [f64], row: usize) {
        for o in 0..self.n_outputs {
            let k = row * self.n_outputs + o;
            counts[self.offsets[o] + self.labels[k]] += self.sample_w[k];
        }
    }

    fn output_slice<'c>(&self, counts: &'c [f64], o: usize) -> &'c [f64] {
        &counts[self.offsets[o]..self.offsets[o] + self.n_classes[o]]
    }

    fn is_pure(&self, counts: &[f64]) -> bool {
        (0..self.n_outputs).all(|o| self.output_slice(counts, o).iter().filter(|&&c| c > 0.0).count() <= 1)
    }

    fn decrease(&self, parent: &[f64], parent_tot: &[f64], parent_imp: &[f64], left: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut right = [0.0f64; 16];
        for o in 0..self.n_outputs {
            let l = self.output_slice(left, o);
            let p = self.output_slice(parent, o);
            let k = l.len();
            let r = &mut right[..k];
            let mut wl = 0.0;
            for c in 0..k {
                wl += l[c];
                r[c] = (p[c] - l[c]).max(0.0);
            }
            let w = parent_tot[o];
            let wr = (w - wl).max(0.0);
            total += parent_imp[o]
                - (wl / w) * impurity(l, wl, self.criterion)
                - (wr / w) * impurity(r, wr, self.criterion);
        }
        total
    }

    fn better(candidate: &BestSplit, best: &Option<BestSplit>) -> bool {
        match best {
            None => true,
            Some(b) => {
                let tol = TIE_EPS * b.decrease.abs().max(1.0);
                if candidate.decrease > b.decrease + tol {
                    true
                } else if candidate.decrease >= b.decrease - tol {
                    (candidate.feature, candidate.threshold) < (b.feature, b.threshold)
                } else {
                    false
                }
            }
        }
    }

    fn find_split(&self, samples: &[usize], parent: &[f64], key: u64) -> Option<BestSplit> {
        let d = self.x.n_cols();
        let parent_tot: Vec<f64> = (0..self.n_outputs)
            .map(|o| self.output_slice(parent, o).iter().sum())
            .collect();
        let parent_imp: Vec<f64> = (0..self.n_outputs)
            .map(|o| impurity(self.output_slice(parent, o), parent_tot[o], self.criterion))
            .collect();

        let mut rng = seed::rng_from(key);
        let mut features: Vec<usize> = (0..d).collect();
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        let mut left = vec![0.0; self.total_classes];
        let mut best: Option<BestSplit> = None;
        let mut visited = 0;
        let mut next = 0;
        // Draw features without replacement until `mtry` non-constant ones were examined.
        while next < d && visited < self.mtry {
            let j = rng.random_range(next..d);
            features.swap(next, j);
            let f = features[next];
            next += 1;

            pairs.clear();
            pairs.extend(samples.iter().map(|&i| (self.x.get(i, f), i)));
            pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if pairs[0].0 >= pairs[pairs.len() - 1].0 {
                continue;
            }
            visited += 1;

            left.iter_mut().for_each(|v| *v = 0.0);
            for pos in 0..pairs.len() - 1 {
                self.add(&mut left, pairs[pos].1);
                let (lo, hi) = (pairs[pos].0, pairs[pos + 1].0);
                if lo >= hi {
                    continue;
                }
                let decrease = self.decrease(parent, &parent_tot, &parent_imp, &left);
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                let cand = BestSplit { decrease, feature: f, threshold };
                if Self::better(&cand, &best) {
                    best = Some(cand);
                }
            }
        }
        best.filter(|b| b.decrease > TIE_EPS)
    }

    fn leaf(&mut self, counts: &[f64], cover: f64, depth: usize) -> usize {
        let counts = (0..self.n_outputs).map(|o| self.output_slice(counts, o).to_vec()).collect();
        self.nodes.push(Node::Leaf { counts, cover, depth });
        self.nodes.len() - 1
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize, key: u64) -> usize {
        let counts = self.accumulate(&samples);
        let cover: f64 = samples.iter().map(|&i| self.cover_w[i]).sum();
        let depth_reached = self.max_depth.is_some_and(|m| depth >= m);
        if depth_reached || samples.len() < self.min_samples_split || self.is_pure(&counts) {
            return self.leaf(&counts, cover, depth);
        }
        let Some(best) = self.find_split(&samples, &counts, key) else {
            return self.leaf(&counts, cover, depth);
        };

        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&i| self.x.get(i, best.feature) <= best.threshold);
        let gain = self.node_gain(&counts, &left);

        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { counts: vec![], cover, depth });
        let l = self.build(left, depth + 1, seed::derive(key, "left", &[]));
        let r = self.build(right, depth + 1, seed::derive(key, "right", &[]));
        self.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
            cover,
            gain,
        };
        id
    }

    /// Σ_o W_o · decrease_o for the chosen split.
    fn node_gain(&self, parent: &[f64], left_samples: &[usize]) -> f64 {
        let left = self.accumulate(left_samples);
        let mut gain = 0.0;
        for o in 0..self.n_outputs {
            let p = self.output_slice(parent, o);
            let l = self.output_slice(&left, o);
            let r: Vec<f64> = p.iter().zip(l).map(|(a, b)| (a - b).max(0.0)).collect();
            let w: f64 = p.iter().sum();
            let wl: f64 = l.iter().sum();
            let wr: f64 = r.iter().sum();
            gain += w * impurity(p, w, self.criterion)
                - wl * impurity(l, wl, self.criterion)
                - wr * impurity(&r, wr, self.criterion);
        }
        gain
    }
}

/// Grows one CART tree on `samples` (row indices, duplicates allowed).
///
/// The feature subset at every node is drawn from a stream keyed by the
/// node's path from the root, so deeper limits only extend shallower trees.
pub fn train_tree(
    x: &FeatureMatrix,
    targets: &Targets,
    samples: &[usize],
    weights: &[ClassWeights],
    config: &ForestConfig,
    tree_seed: u64,
) -> Result<Tree> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("cannot grow a tree on zero rows".into()));
    }
    targets.check(x.n_rows())?;
    if weights.len() != targets.n_outputs {
        return Err(Error::InvalidInput(format!(
            "{} weight vectors for {} outputs",
            weights.len(),
            targets.n_outputs
        )));
    }
    if targets.n_classes.iter().any(|&k| k > 16) {
        return Err(Error::InvalidInput("at most 16 classes per output are supported".into()));
    }
    let n_outputs = targets.n_outputs;
    let mut offsets = Vec::with_capacity(n_outputs);
    let mut total_classes = 0;
    for &k in &targets.n_classes {
        offsets.push(total_classes);
        total_classes += k;
    }
    let n = x.n_rows();
    let mut sample_w = vec![0.0; n * n_outputs];
    let mut cover_w = vec![1.0; n];
    for i in 0..n {
        for o in 0..n_outputs {
            let w = weights[o].0[targets.label(i, o)];
            sample_w[i * n_outputs + o] = w;
            cover_w[i] *= w;
        }
    }
    let mut builder = Builder {
        x,
        labels: &targets.labels,
        n_outputs,
        offsets,
        n_classes: &targets.n_classes,
        total_classes,
        sample_w,
        cover_w,
        criterion: config.criterion,
        max_depth: config.max_depth,
        min_samples_split: config.min_samples_split.max(2),
        mtry: config.max_features.resolve(x.n_cols()),
        nodes: Vec::new(),
    };
    builder.build(samples.to_vec(), 0, seed::derive(tree_seed, "node", &[]));
    Ok(Tree { nodes: builder.nodes })
}
