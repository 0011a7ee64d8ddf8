//! Machine prediction of venture success.
//!
//! CART classification trees (Gini criterion), bootstrap random forests with
//! impurity-decrease feature importance, and two baselines: logistic
//! regression fitted by gradient descent and Bernoulli naive Bayes.
//! All features are carried as `f64`; a [`FeatureKind`] per column decides
//! whether splits are thresholds or category-equality tests.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::schema::{FeatureRow, Taxonomy};
use crate::seed;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnError {
    #[error("label list is empty")]
    EmptyLabels,
    #[error("dataset needs at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("dataset has no features")]
    ZeroWidth,
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training needs both classes present")]
    SingleClass,
    #[error("label {0} is not 0 or 1")]
    InvalidLabel(u8),
    #[error("feature `{0}` is not binary")]
    NonBinaryFeature(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("model document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// 0/1 indicator; split at 0.5.
    Binary,
    /// Unordered codes; split by equality with one code.
    Categorical,
    /// Ordered reals; split at midpoints between observed values.
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub feature_names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
}

impl LabeledDataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<u8>,
        feature_names: Vec<String>,
        kinds: Vec<FeatureKind>,
    ) -> Result<Self, LearnError> {
        let width = feature_names.len();
        if kinds.len() != width {
            return Err(LearnError::InvalidParam(format!(
                "{} feature kinds for {width} features",
                kinds.len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(LearnError::InvalidParam(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for r in &rows {
            if r.len() != width {
                return Err(LearnError::WidthMismatch { expected: width, got: r.len() });
            }
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(LearnError::InvalidLabel(bad));
        }
        Ok(Self { rows, labels, feature_names, kinds })
    }

    /// One-hot rows with one binary feature per characteristic.
    pub fn from_feature_rows(
        taxonomy: &Taxonomy,
        rows: &[FeatureRow],
        labels: Vec<u8>,
    ) -> Result<Self, LearnError> {
        let data = rows.iter().map(|r| r.bits.iter().map(|&b| f64::from(b)).collect()).collect();
        let width = taxonomy.width();
        Self::new(data, labels, taxonomy.feature_names(), vec![FeatureKind::Binary; width])
    }

    /// Component-type memberships, one categorical feature per component.
    pub fn from_memberships(
        names: Vec<String>,
        rows: &[Vec<u32>],
        labels: Vec<u8>,
    ) -> Result<Self, LearnError> {
        let data = rows.iter().map(|r| r.iter().map(|&v| f64::from(v)).collect()).collect();
        let width = names.len();
        Self::new(data, labels, names, vec![FeatureKind::Categorical; width])
    }

    pub fn numeric(names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self, LearnError> {
        let width = names.len();
        Self::new(rows, labels, names, vec![FeatureKind::Numeric; width])
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn has_both_classes(&self) -> bool {
        let p = self.positives();
        p > 0 && p < self.len()
    }

    /// Rows at `indices`, duplicates allowed.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            kinds: self.kinds.clone(),
        }
    }

    /// Stable content hash used in training manifests.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for (row, label) in self.rows.iter().zip(&self.labels) {
            for v in row {
                h.update(v.to_le_bytes());
            }
            h.update([*label]);
        }
        hex::encode(h.finalize())
    }
}

fn gini_from_counts(positives: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = positives as f64 / n as f64;
    1.0 - p * p - (1.0 - p) * (1.0 - p)
}

/// `1 - sum_c p_c^2` over a binary label multiset.
pub fn gini_impurity(labels: &[u8]) -> Result<f64, LearnError> {
    if labels.is_empty() {
        return Err(LearnError::EmptyLabels);
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    Ok(gini_from_counts(pos, labels.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitRule {
    /// `x <= t` goes left.
    Threshold(f64),
    /// `x == v` goes left.
    Equals(f64),
}

impl SplitRule {
    pub fn goes_left(&self, x: f64) -> bool {
        match *self {
            SplitRule::Threshold(t) => x <= t,
            SplitRule::Equals(v) => x == v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        positives: usize,
        negatives: usize,
    },
    Split {
        feature: usize,
        rule: SplitRule,
        left: usize,
        right: usize,
        samples: usize,
        impurity: f64,
        /// Impurity decrease weighted by the node's share of the training sample.
        weighted_decrease: f64,
    },
}

impl Node {
    pub fn leaf_probability(positives: usize, negatives: usize) -> f64 {
        let n = positives + negatives;
        if n == 0 {
            0.5
        } else {
            positives as f64 / n as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Features examined per split; `None` examines all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self { max_depth: None, min_leaf: 1, max_features: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
    pub width: usize,
    pub depth: usize,
    pub n_samples: usize,
    pub kinds: Vec<FeatureKind>,
}

/// Minimum impurity decrease that counts as an improvement.
const MIN_GAIN: f64 = 1e-12;

struct Candidate {
    feature: usize,
    rule: SplitRule,
    gain: f64,
}

fn best_split_for_feature(ds: &LabeledDataset, idx: &[usize], feature: usize, parent: f64) -> Option<Candidate> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| ds.labels[i] == 1).count();
    let mut best: Option<Candidate> = None;
    let mut consider = |rule: SplitRule, left_n: usize, left_pos: usize| {
        if left_n == 0 || left_n == n {
            return;
        }
        let right_n = n - left_n;
        let right_pos = total_pos - left_pos;
        let child = (left_n as f64 * gini_from_counts(left_pos, left_n)
            + right_n as f64 * gini_from_counts(right_pos, right_n))
            / n as f64;
        let gain = parent - child;
        if best.as_ref().is_none_or(|b| gain > b.gain + MIN_GAIN) {
            best = Some(Candidate { feature, rule, gain });
        }
    };
    match ds.kinds[feature] {
        FeatureKind::Categorical => {
            // value -> (count, positives), ascending by value
            let mut counts: BTreeMap<u64, (f64, usize, usize)> = BTreeMap::new();
            for &i in idx {
                let v = ds.rows[i][feature];
                let e = counts.entry(ordered_key(v)).or_insert((v, 0, 0));
                e.1 += 1;
                e.2 += usize::from(ds.labels[i] == 1);
            }
            if counts.len() < 2 {
                return None;
            }
            let take = if counts.len() == 2 { 1 } else { counts.len() };
            for &(v, cnt, pos) in counts.values().take(take) {
                consider(SplitRule::Equals(v), cnt, pos);
            }
        }
        FeatureKind::Binary | FeatureKind::Numeric => {
            let mut pairs: Vec<(f64, u8)> = idx.iter().map(|&i| (ds.rows[i][feature], ds.labels[i])).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_n = 0;
            let mut left_pos = 0;
            for w in 0..pairs.len() - 1 {
                left_n += 1;
                left_pos += usize::from(pairs[w].1 == 1);
                let (a, b) = (pairs[w].0, pairs[w + 1].0);
                if a < b {
                    let t = if ds.kinds[feature] == FeatureKind::Binary && a == 0.0 && b == 1.0 {
                        0.5
                    } else {
                        a + (b - a) / 2.0
                    };
                    consider(SplitRule::Threshold(t), left_n, left_pos);
                }
            }
        }
    }
    best
}

/// Total order key for f64 values used as map keys.
fn ordered_key(v: f64) -> u64 {
    let bits = v.to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

struct Grower<'a, R: Rng> {
    ds: &'a LabeledDataset,
    params: TreeParams,
    rng: Option<&'a mut R>,
    nodes: Vec<Node>,
    root_n: usize,
    depth: usize,
}

impl<R: Rng> Grower<'_, R> {
    fn grow(&mut self, idx: &[usize], depth: usize) -> usize {
        self.depth = self.depth.max(depth);
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.ds.labels[i] == 1).count();
        let node_id = self.nodes.len();
        self.nodes.push(Node::Leaf { positives: pos, negatives: n - pos });

        let impurity = gini_from_counts(pos, n);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if impurity == 0.0 || !depth_ok || n < 2 * self.params.min_leaf.max(1) {
            return node_id;
        }

        let width = self.ds.width();
        let features: Vec<usize> = match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < width => {
                let mut f = index::sample(rng, width, m).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..width).collect(),
        };
        let mut best: Option<Candidate> = None;
        for f in features {
            if let Some(c) = best_split_for_feature(self.ds, idx, f, impurity) {
                if best.as_ref().is_none_or(|b| c.gain > b.gain + MIN_GAIN) {
                    best = Some(c);
                }
            }
        }
        let Some(best) = best.filter(|b| b.gain > MIN_GAIN) else {
            return node_id;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| best.rule.goes_left(self.ds.rows[i][best.feature]));
        if left_idx.len() < self.params.min_leaf || right_idx.len() < self.params.min_leaf {
            return node_id;
        }
        let left = self.grow(&left_idx, depth + 1);
        let right = self.grow(&right_idx, depth + 1);
        self.nodes[node_id] = Node::Split {
            feature: best.feature,
            rule: best.rule,
            left,
            right,
            samples: n,
            impurity,
            weighted_decrease: best.gain * n as f64 / self.root_n as f64,
        };
        node_id
    }
}

fn grow_tree<R: Rng>(ds: &LabeledDataset, idx: &[usize], params: TreeParams, rng: Option<&mut R>) -> Tree {
    let mut g = Grower { ds, params, rng, nodes: Vec::new(), root_n: idx.len(), depth: 0 };
    g.grow(idx, 0);
    Tree { nodes: g.nodes, width: ds.width(), depth: g.depth, n_samples: idx.len(), kinds: ds.kinds.clone() }
}

/// Greedy CART fit with the Gini criterion.
pub fn cart_fit(ds: &LabeledDataset, params: &TreeParams) -> Result<Tree, LearnError> {
    if ds.width() == 0 {
        return Err(LearnError::ZeroWidth);
    }
    if ds.len() < 2 {
        return Err(LearnError::TooFewRows { needed: 2, got: ds.len() });
    }
    let idx: Vec<usize> = (0..ds.len()).collect();
    let params = TreeParams { max_features: None, ..*params };
    Ok(grow_tree::<rand_chacha::ChaCha8Rng>(ds, &idx, params, None))
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &Node {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split { feature, rule, left, right, .. } => {
                    id = if rule.goes_left(row[*feature]) { *left } else { *right };
                }
                leaf => return leaf,
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    fn accumulate_importance(&self, into: &mut [f64]) {
        for node in &self.nodes {
            if let Node::Split { feature, weighted_decrease, .. } = node {
                into[*feature] += weighted_decrease;
            }
        }
    }
}

/// Probabilistic binary classifier over fixed-width rows.
pub trait Predictor {
    fn width(&self) -> usize;

    fn proba_unchecked(&self, row: &[f64]) -> f64;

    /// Probability of the positive class.
    fn predict_proba(&self, row: &[f64]) -> Result<f64, LearnError> {
        if row.len() != self.width() {
            return Err(LearnError::WidthMismatch { expected: self.width(), got: row.len() });
        }
        Ok(self.proba_unchecked(row))
    }
}

impl Predictor for Tree {
    fn width(&self) -> usize {
        self.width
    }

    fn proba_unchecked(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            Node::Leaf { positives, negatives } => Node::leaf_probability(*positives, *negatives),
            Node::Split { .. } => unreachable!("leaf_for returns leaves"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub seed: u64,
    /// Features examined per split; `None` means `ceil(sqrt(width))`.
    pub max_features: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl ForestParams {
    /// Defaults: 1000 trees, `ceil(sqrt(width))` features per split, fully grown.
    pub fn new(seed: u64) -> Self {
        Self { n_trees: 1000, seed, max_features: None, max_depth: None, min_leaf: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub seed: u64,
    pub max_features: usize,
    /// Bootstrap sample (row indices) per tree.
    pub bootstrap: Vec<Vec<u32>>,
    pub width: usize,
    pub feature_names: Vec<String>,
}

pub fn forest_fit(ds: &LabeledDataset, params: &ForestParams) -> Result<Forest, LearnError> {
    if ds.width() == 0 {
        return Err(LearnError::ZeroWidth);
    }
    if ds.len() < 2 {
        return Err(LearnError::TooFewRows { needed: 2, got: ds.len() });
    }
    if !ds.has_both_classes() {
        return Err(LearnError::SingleClass);
    }
    if params.n_trees == 0 {
        return Err(LearnError::InvalidParam("n_trees must be at least 1".into()));
    }
    let width = ds.width();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
        .clamp(1, width);
    let tree_params =
        TreeParams { max_depth: params.max_depth, min_leaf: params.min_leaf, max_features: Some(max_features) };
    let n = ds.len();
    let fitted: Vec<(Tree, Vec<u32>)> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(params.seed, t as u64);
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let tree = grow_tree(ds, &sample, tree_params, Some(&mut rng));
            (tree, sample.into_iter().map(|i| i as u32).collect())
        })
        .collect();
    let (trees, bootstrap) = fitted.into_iter().unzip();
    Ok(Forest {
        trees,
        n_trees: params.n_trees,
        seed: params.seed,
        max_features,
        bootstrap,
        width,
        feature_names: ds.feature_names.clone(),
    })
}

impl Predictor for Forest {
    fn width(&self) -> usize {
        self.width
    }

    fn proba_unchecked(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.proba_unchecked(row)).sum::<f64>() / self.trees.len() as f64
    }
}

impl Forest {
    /// Out-of-bag accuracy at threshold 0.5, over rows left out of at least one tree.
    pub fn oob_accuracy(&self, ds: &LabeledDataset) -> Option<f64> {
        let mut in_bag = vec![vec![false; ds.len()]; self.trees.len()];
        for (t, sample) in self.bootstrap.iter().enumerate() {
            for &i in sample {
                in_bag[t][i as usize] = true;
            }
        }
        let mut scored = 0usize;
        let mut correct = 0usize;
        for (i, row) in ds.rows.iter().enumerate() {
            let probs: Vec<f64> = self
                .trees
                .iter()
                .enumerate()
                .filter(|(t, _)| !in_bag[*t][i])
                .map(|(_, tree)| tree.proba_unchecked(row))
                .collect();
            if probs.is_empty() {
                continue;
            }
            let p = probs.iter().sum::<f64>() / probs.len() as f64;
            scored += 1;
            correct += usize::from(u8::from(p >= 0.5) == ds.labels[i]);
        }
        (scored > 0).then(|| correct as f64 / scored as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
    /// No tree contained a split; all weights are zero.
    pub degenerate: bool,
}

impl ImportanceVector {
    /// `(name, weight)` pairs sorted by descending weight, ties by feature order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut pairs: Vec<(usize, f64)> = self.weights.iter().copied().enumerate().collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        pairs.into_iter().map(|(i, w)| (self.names[i].clone(), w)).collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.weights[i])
    }
}

/// Mean decrease in impurity: per feature, summed weighted decreases over all
/// nodes, averaged over trees, normalized to sum to one.
pub fn feature_importance(forest: &Forest) -> ImportanceVector {
    let mut totals = vec![0.0; forest.width];
    for tree in &forest.trees {
        tree.accumulate_importance(&mut totals);
    }
    for v in &mut totals {
        *v /= forest.trees.len() as f64;
    }
    let sum: f64 = totals.iter().sum();
    let degenerate = sum <= 0.0;
    if !degenerate {
        for v in &mut totals {
            *v /= sum;
        }
    }
    ImportanceVector { names: forest.feature_names.clone(), weights: totals, degenerate }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self { learning_rate: 0.5, epochs: 2000, l2: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logistic {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub loss: f64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

/// Mean log-loss plus `l2/2 * |w|^2`, with its gradient.
pub fn logistic_loss_gradient(model: &Logistic, ds: &LabeledDataset, l2: f64) -> LossGradient {
    let n = ds.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for (row, &y) in ds.rows.iter().zip(&ds.labels) {
        let z = model.bias + row.iter().zip(&model.weights).map(|(x, w)| x * w).sum::<f64>();
        let y = f64::from(y);
        // -[y log s(z) + (1-y) log(1 - s(z))] = softplus(z) - y z
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (g, x) in gw.iter_mut().zip(row) {
            *g += r * x;
        }
        gb += r;
    }
    let reg: f64 = model.weights.iter().map(|w| w * w).sum::<f64>() * l2 / 2.0;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g = *g / n + l2 * w;
    }
    LossGradient { loss: loss / n + reg, weights: gw, bias: gb / n }
}

impl Logistic {
    pub fn zeros(width: usize) -> Self {
        Self { weights: vec![0.0; width], bias: 0.0 }
    }

    pub fn fit(ds: &LabeledDataset, params: &LogisticParams) -> Result<Self, LearnError> {
        if ds.width() == 0 {
            return Err(LearnError::ZeroWidth);
        }
        if !ds.has_both_classes() {
            return Err(LearnError::SingleClass);
        }
        let mut model = Self::zeros(ds.width());
        for _ in 0..params.epochs {
            let g = logistic_loss_gradient(&model, ds, params.l2);
            for (w, gw) in model.weights.iter_mut().zip(&g.weights) {
                *w -= params.learning_rate * gw;
            }
            model.bias -= params.learning_rate * g.bias;
        }
        Ok(model)
    }
}

impl Predictor for Logistic {
    fn width(&self) -> usize {
        self.weights.len()
    }

    fn proba_unchecked(&self, row: &[f64]) -> f64 {
        sigmoid(self.bias + row.iter().zip(&self.weights).map(|(x, w)| x * w).sum::<f64>())
    }
}

/// Bernoulli naive Bayes with add-one smoothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub log_prior: [f64; 2],
    /// `p_one[c][j]` = P(x_j = 1 | class c).
    pub p_one: [Vec<f64>; 2],
}

impl NaiveBayes {
    pub fn fit(ds: &LabeledDataset) -> Result<Self, LearnError> {
        if ds.width() == 0 {
            return Err(LearnError::ZeroWidth);
        }
        if !ds.has_both_classes() {
            return Err(LearnError::SingleClass);
        }
        for j in 0..ds.width() {
            if ds.rows.iter().any(|r| r[j] != 0.0 && r[j] != 1.0) {
                return Err(LearnError::NonBinaryFeature(ds.feature_names[j].clone()));
            }
        }
        let mut counts = [0usize; 2];
        let mut ones = [vec![0usize; ds.width()], vec![0usize; ds.width()]];
        for (row, &y) in ds.rows.iter().zip(&ds.labels) {
            let c = usize::from(y);
            counts[c] += 1;
            for (o, x) in ones[c].iter_mut().zip(row) {
                *o += usize::from(*x == 1.0);
            }
        }
        let n = ds.len() as f64;
        let log_prior = [
            ((counts[0] as f64 + 1.0) / (n + 2.0)).ln(),
            ((counts[1] as f64 + 1.0) / (n + 2.0)).ln(),
        ];
        let p_one = [0, 1].map(|c| {
            ones[c].iter().map(|&o| (o as f64 + 1.0) / (counts[c] as f64 + 2.0)).collect::<Vec<_>>()
        });
        Ok(Self { log_prior, p_one })
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        self.log_prior[c]
            + row
                .iter()
                .zip(&self.p_one[c])
                .map(|(x, p)| if *x == 1.0 { p.ln() } else { (1.0 - p).ln() })
                .sum::<f64>()
    }
}

impl Predictor for NaiveBayes {
    fn width(&self) -> usize {
        self.p_one[0].len()
    }

    fn proba_unchecked(&self, row: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, row) - self.log_joint(0, row))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Logistic,
    NaiveBayes,
}

/// A fitted model of any supported family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "snake_case")]
pub enum TrainedModel {
    Cart(Tree),
    RandomForest(Forest),
    Logistic(Logistic),
    NaiveBayes(NaiveBayes),
}

impl TrainedModel {
    pub fn family(&self) -> &'static str {
        match self {
            TrainedModel::Cart(_) => "cart",
            TrainedModel::RandomForest(_) => "random_forest",
            TrainedModel::Logistic(_) => "logistic",
            TrainedModel::NaiveBayes(_) => "naive_bayes",
        }
    }

    fn inner(&self) -> &dyn Predictor {
        match self {
            TrainedModel::Cart(m) => m,
            TrainedModel::RandomForest(m) => m,
            TrainedModel::Logistic(m) => m,
            TrainedModel::NaiveBayes(m) => m,
        }
    }
}

impl Predictor for TrainedModel {
    fn width(&self) -> usize {
        self.inner().width()
    }

    fn proba_unchecked(&self, row: &[f64]) -> f64 {
        self.inner().proba_unchecked(row)
    }
}

pub fn fit_baseline(kind: BaselineKind, ds: &LabeledDataset) -> Result<TrainedModel, LearnError> {
    match kind {
        BaselineKind::Logistic => Ok(TrainedModel::Logistic(Logistic::fit(ds, &LogisticParams::default())?)),
        BaselineKind::NaiveBayes => Ok(TrainedModel::NaiveBayes(NaiveBayes::fit(ds)?)),
    }
}

/// Something that can be trained on a fold. New model families plug in here.
pub trait Learner: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, ds: &LabeledDataset) -> Result<TrainedModel, LearnError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Cart(TreeParams),
    RandomForest(ForestParams),
    Logistic(LogisticParams),
    NaiveBayes,
}

impl Learner for ModelSpec {
    fn name(&self) -> &str {
        match self {
            ModelSpec::Cart(_) => "cart",
            ModelSpec::RandomForest(_) => "random_forest",
            ModelSpec::Logistic(_) => "logistic",
            ModelSpec::NaiveBayes => "naive_bayes",
        }
    }

    fn fit(&self, ds: &LabeledDataset) -> Result<TrainedModel, LearnError> {
        match self {
            ModelSpec::Cart(p) => {
                if !ds.has_both_classes() {
                    return Err(LearnError::SingleClass);
                }
                Ok(TrainedModel::Cart(cart_fit(ds, p)?))
            }
            ModelSpec::RandomForest(p) => Ok(TrainedModel::RandomForest(forest_fit(ds, p)?)),
            ModelSpec::Logistic(p) => Ok(TrainedModel::Logistic(Logistic::fit(ds, p)?)),
            ModelSpec::NaiveBayes => Ok(TrainedModel::NaiveBayes(NaiveBayes::fit(ds)?)),
        }
    }
}

pub const MODEL_FORMAT: &str = "bmguide-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format: String,
    pub format_version: u32,
    pub feature_names: Vec<String>,
    #[serde(flatten)]
    pub model: TrainedModel,
}

impl ModelDocument {
    pub fn new(model: TrainedModel, feature_names: Vec<String>) -> Self {
        Self { format: MODEL_FORMAT.into(), format_version: MODEL_FORMAT_VERSION, feature_names, model }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let doc: Self = serde_json::from_str(text).map_err(|e| LearnError::Document(e.to_string()))?;
        if doc.format != MODEL_FORMAT || doc.format_version != MODEL_FORMAT_VERSION {
            return Err(LearnError::Document(format!(
                "unsupported format {} v{}",
                doc.format, doc.format_version
            )));
        }
        Ok(doc)
    }

    /// SHA-256 of the serialized document.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}
