//! Random forest of CART trees with Gini splits over sparse vectors.
//!
//! Tree `k` draws everything (bootstrap sample, candidate features) from
//! ChaCha8 seeded with `seed + k`, so trees can be grown in parallel and the
//! forest is identical to a sequential build.
//!
//! At each node `max_features` candidate features are sampled without
//! replacement. If none of them separates the node's samples, the remaining
//! features that occur in the node are tried in random order until one does.
//! Splits route `x[f] <= threshold` to the left child.

use std::collections::HashMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, ClassWeighting};
use crate::error::{Error, Result};
use crate::features::DocumentVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `ceil(sqrt(dim))`
    Sqrt,
    Count(usize),
    All,
}

impl MaxFeatures {
    fn resolve(self, dim: usize) -> usize {
        let n = match self {
            MaxFeatures::Sqrt => (dim as f64).sqrt().ceil() as usize,
            MaxFeatures::Count(n) => n,
            MaxFeatures::All => dim,
        };
        n.clamp(1, dim.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
    pub class_weight: ClassWeighting,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
            class_weight: ClassWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    /// Weighted class counts of the training samples that reached the leaf.
    Leaf { histogram: Vec<f64> },
}

/// Nodes in creation order; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn from_nodes(nodes: Vec<TreeNode>, n_classes: usize, dim: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Bundle("empty decision tree".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let in_range = |c: u32| (c as usize) > i && (c as usize) < nodes.len();
                    if *feature as usize >= dim || !threshold.is_finite() || !in_range(*left) || !in_range(*right) {
                        return Err(Error::Bundle(format!("invalid split node {i}")));
                    }
                }
                TreeNode::Leaf { histogram } => {
                    if histogram.len() != n_classes
                        || histogram.iter().any(|h| !h.is_finite() || *h < 0.0)
                        || histogram.iter().sum::<f64>() <= 0.0
                    {
                        return Err(Error::Bundle(format!("invalid leaf node {i}")));
                    }
                }
            }
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf(&self, x: &DocumentVector) -> &[f64] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(*feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                TreeNode::Leaf { histogram } => return histogram,
            }
        }
    }

    pub fn depth(&self) -> usize {
        // children always follow their parent, so one forward pass suffices
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let TreeNode::Split { left, right, .. } = node {
                depth[*left as usize] = depth[i] + 1;
                depth[*right as usize] = depth[i] + 1;
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    dim: usize,
    n_classes: usize,
    trees: Vec<DecisionTree>,
    pub params: ForestParams,
}

impl ForestModel {
    pub fn from_trees(dim: usize, n_classes: usize, trees: Vec<DecisionTree>, params: ForestParams) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Bundle("forest has no trees".into()));
        }
        Ok(ForestModel {
            dim,
            n_classes,
            trees,
            params,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Mean over trees of the normalized leaf distribution.
    pub fn scores(&self, x: &DocumentVector) -> Vec<f64> {
        let mut scores = vec![0.0; self.n_classes];
        for tree in &self.trees {
            let leaf = tree.leaf(x);
            let total: f64 = leaf.iter().sum();
            for (s, h) in scores.iter_mut().zip(leaf) {
                *s += h / total;
            }
        }
        let n = self.trees.len() as f64;
        scores.iter_mut().for_each(|s| *s /= n);
        scores
    }
}

pub fn train_forest(
    vectors: &[DocumentVector],
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<ForestModel> {
    let dim = check_training_set(vectors, labels, n_classes)?;
    if params.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    if params.max_depth == Some(0) {
        return Err(Error::Config("max_depth must be at least 1 when set".into()));
    }
    let class_weights = params.class_weight.weights(labels, n_classes);
    let data = TrainData {
        vectors,
        labels,
        n_classes,
        dim,
        class_weights: &class_weights,
    };
    let trees: Vec<DecisionTree> = (0..params.n_trees)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(k as u64));
            grow_tree(&data, params, &mut rng)
        })
        .collect();
    ForestModel::from_trees(dim, n_classes, trees, *params)
}

struct TrainData<'a> {
    vectors: &'a [DocumentVector],
    labels: &'a [usize],
    n_classes: usize,
    dim: usize,
    class_weights: &'a [f64],
}

struct Candidate {
    impurity: f64,
    feature: u32,
    threshold: f64,
}

struct Pending {
    node: usize,
    samples: Vec<u32>,
    depth: usize,
}

fn grow_tree(data: &TrainData<'_>, params: &ForestParams, rng: &mut ChaCha8Rng) -> DecisionTree {
    let n = data.vectors.len();
    let mut weight = vec![0.0f64; n];
    if params.bootstrap {
        for _ in 0..n {
            weight[rng.gen_range(0..n)] += 1.0;
        }
    } else {
        weight.iter_mut().for_each(|w| *w = 1.0);
    }
    for (w, &y) in weight.iter_mut().zip(data.labels) {
        *w *= data.class_weights[y];
    }

    let root: Vec<u32> = (0..n as u32).filter(|&i| weight[i as usize] > 0.0).collect();
    let mtry = params.max_features.resolve(data.dim);
    let mut nodes = vec![TreeNode::Leaf { histogram: Vec::new() }];
    let mut stack = vec![Pending {
        node: 0,
        samples: root,
        depth: 0,
    }];

    while let Some(Pending { node, samples, depth }) = stack.pop() {
        let hist = histogram(data, &weight, &samples);
        let pure = hist.iter().filter(|&&h| h > 0.0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || depth_capped || samples.len() < 2 || data.dim == 0 {
            None
        } else {
            find_split(data, &weight, &samples, &hist, mtry, rng)
        };
        let Some(split) = split else {
            nodes[node] = TreeNode::Leaf { histogram: hist };
            continue;
        };
        let (left, right): (Vec<u32>, Vec<u32>) = samples
            .iter()
            .partition(|&&i| data.vectors[i as usize].get(split.feature as usize) <= split.threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        let left_id = nodes.len();
        nodes.push(TreeNode::Leaf { histogram: Vec::new() });
        nodes.push(TreeNode::Leaf { histogram: Vec::new() });
        nodes[node] = TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: left_id as u32,
            right: left_id as u32 + 1,
        };
        stack.push(Pending {
            node: left_id + 1,
            samples: right,
            depth: depth + 1,
        });
        stack.push(Pending {
            node: left_id,
            samples: left,
            depth: depth + 1,
        });
    }
    DecisionTree { nodes }
}

fn histogram(data: &TrainData<'_>, weight: &[f64], samples: &[u32]) -> Vec<f64> {
    let mut h = vec![0.0; data.n_classes];
    for &i in samples {
        h[data.labels[i as usize]] += weight[i as usize];
    }
    h
}

fn gini_mass(hist: &[f64]) -> (f64, f64) {
    let total: f64 = hist.iter().sum();
    if total <= 0.0 {
        return (0.0, 0.0);
    }
    let sum_sq: f64 = hist.iter().map(|h| h * h).sum();
    (total - sum_sq / total, total)
}

/// Nonzero values of one feature within a node: (value, class, weight).
type Column = Vec<(f64, usize, f64)>;

fn find_split(
    data: &TrainData<'_>,
    weight: &[f64],
    samples: &[u32],
    hist: &[f64],
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Candidate> {
    let candidates: Vec<u32> = index::sample(rng, data.dim, mtry).into_iter().map(|f| f as u32).collect();
    let slot: HashMap<u32, usize> = candidates.iter().enumerate().map(|(k, &f)| (f, k)).collect();
    let mut columns: Vec<Column> = vec![Vec::new(); candidates.len()];
    for &i in samples {
        let (y, w) = (data.labels[i as usize], weight[i as usize]);
        for &(f, v) in data.vectors[i as usize].entries() {
            if v != 0.0 {
                if let Some(&k) = slot.get(&f) {
                    columns[k].push((v, y, w));
                }
            }
        }
    }

    let mut best: Option<Candidate> = None;
    for (k, column) in columns.iter_mut().enumerate() {
        if let Some(c) = best_threshold(column, hist, samples.len(), candidates[k]) {
            if best.as_ref().is_none_or(|b| c.impurity < b.impurity) {
                best = Some(c);
            }
        }
    }
    if best.is_some() {
        return best;
    }

    // None of the sampled features varies here; fall back to the other
    // features present in the node, in random order.
    let mut present: HashMap<u32, Column> = HashMap::new();
    for &i in samples {
        let (y, w) = (data.labels[i as usize], weight[i as usize]);
        for &(f, v) in data.vectors[i as usize].entries() {
            if v != 0.0 && !slot.contains_key(&f) {
                present.entry(f).or_default().push((v, y, w));
            }
        }
    }
    let mut order: Vec<u32> = present.keys().copied().collect();
    order.sort_unstable();
    order.shuffle(rng);
    for f in order {
        let mut column = present.remove(&f).unwrap();
        if let Some(c) = best_threshold(&mut column, hist, samples.len(), f) {
            return Some(c);
        }
    }
    None
}

/// Best Gini split on one feature. Samples absent from `column` have value 0.
fn best_threshold(column: &mut Column, hist: &[f64], n_samples: usize, feature: u32) -> Option<Candidate> {
    if column.is_empty() {
        return None;
    }
    let n_classes = hist.len();
    let mut zero_hist = hist.to_vec();
    for &(_, y, w) in column.iter() {
        zero_hist[y] -= w;
    }
    let zeros_present = column.len() < n_samples;
    if zeros_present {
        column.push((0.0, usize::MAX, 0.0));
    }
    column.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut left = vec![0.0; n_classes];
    let mut best: Option<Candidate> = None;
    let mut i = 0;
    while i < column.len() {
        let value = column[i].0;
        while i < column.len() && column[i].0 == value {
            let (_, y, w) = column[i];
            if y == usize::MAX {
                for (l, z) in left.iter_mut().zip(&zero_hist) {
                    *l += z.max(0.0);
                }
            } else {
                left[y] += w;
            }
            i += 1;
        }
        if i == column.len() {
            break;
        }
        let next = column[i].0;
        let right: Vec<f64> = hist.iter().zip(&left).map(|(h, l)| (h - l).max(0.0)).collect();
        let (gl, _) = gini_mass(&left);
        let (gr, _) = gini_mass(&right);
        let impurity = gl + gr;
        if best.as_ref().is_none_or(|b| impurity < b.impurity) {
            let mut threshold = value + (next - value) / 2.0;
            if threshold >= next {
                threshold = value;
            }
            best = Some(Candidate {
                impurity,
                feature,
                threshold,
            });
        }
    }
    best
}
