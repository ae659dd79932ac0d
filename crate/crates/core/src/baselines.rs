//! Comparison models and the uniform [`Model`] envelope.
//!
//! Logistic regression here is a sigmoid-link regression on the min-max
//! scaled yield, trained on binary cross-entropy. The SVM is a linear
//! epsilon-insensitive regressor trained by subgradient descent. The forest
//! is bagged CART regression trees with variance-reduction splits.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::ingest::Normalizer;
use crate::nn::Network;
use crate::rng::{derive_seed, permutation, SplitMix64};
use crate::schema::{encode_features, AgroRecord, Crop, NUM_FEATURES, SCHEMA_VERSION};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

fn check_training_set(features: &[Vec<f64>], targets: &[f64]) -> Result<usize, ModelError> {
    if features.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    if features.len() != targets.len() {
        return Err(ModelError::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    let d = features[0].len();
    if let Some(bad) = features.iter().find(|x| x.len() != d) {
        return Err(ModelError::DimensionMismatch { expected: d, got: bad.len() });
    }
    Ok(d)
}

/// Mini-batches of a seeded per-epoch shuffle.
fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    permutation(n, derive_seed(seed, &format!("epoch/{epoch}")))
        .chunks(batch_size.max(1))
        .map(<[usize]>::to_vec)
        .collect()
}

// ---------------------------------------------------------------------------
// Logistic regression

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim], bias: 0.0 }
    }

    /// Output in `(0, 1)`, on the normalized target scale.
    pub fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(dot(&self.weights, x) + self.bias)
    }

    /// Mean binary cross-entropy against soft targets in `[0, 1]`.
    pub fn loss(&self, features: &[Vec<f64>], targets: &[f64]) -> f64 {
        let total: f64 = features
            .iter()
            .zip(targets)
            .map(|(x, &y)| {
                let z = dot(&self.weights, x) + self.bias;
                // log(1 + e^z) - y z, stable for large |z|
                let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                softplus - y * z
            })
            .sum();
        total / targets.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, epochs: 200, batch_size: 32, seed: 0 }
    }
}

/// Returns the model and the training loss after each epoch.
pub fn train_logistic(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &LogisticConfig,
) -> Result<(LogisticModel, Vec<f64>), ModelError> {
    let d = check_training_set(features, targets)?;
    if !(cfg.learning_rate > 0.0) {
        return Err(ModelError::InvalidHyperparameter("learning_rate must be > 0".into()));
    }
    let mut model = LogisticModel::zeros(d);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        for batch in epoch_batches(features.len(), cfg.batch_size, cfg.seed, epoch) {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for &i in &batch {
                let err = model.predict(&features[i]) - targets[i];
                gw.iter_mut().zip(&features[i]).for_each(|(g, x)| *g += err * x);
                gb += err;
            }
            let step = cfg.learning_rate / batch.len() as f64;
            model.weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= step * g);
            model.bias -= step * gb;
        }
        losses.push(model.loss(features, targets));
    }
    Ok((model, losses))
}

// ---------------------------------------------------------------------------
// Linear epsilon-insensitive SVM regression

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
    pub c: f64,
}

impl SvmModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `0.5 |w|^2 / n + C * mean(max(0, |w.x + b - y| - epsilon))`
    pub fn objective(&self, features: &[Vec<f64>], targets: &[f64]) -> f64 {
        let n = targets.len() as f64;
        let hinge: f64 = features
            .iter()
            .zip(targets)
            .map(|(x, &y)| ((self.predict(x) - y).abs() - self.epsilon).max(0.0))
            .sum();
        0.5 * dot(&self.weights, &self.weights) / n + self.c * hinge / n
    }

    /// Subgradient of the per-example tube loss with respect to the prediction.
    pub fn residual_subgradient(&self, residual: f64) -> f64 {
        if residual.abs() <= self.epsilon {
            0.0
        } else {
            residual.signum()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub epsilon: f64,
    pub c: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self { epsilon: 0.01, c: 1.0, learning_rate: 0.05, epochs: 200, batch_size: 32, seed: 0 }
    }
}

/// Returns the model and the objective after each epoch.
pub fn train_svm(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &SvmConfig,
) -> Result<(SvmModel, Vec<f64>), ModelError> {
    let d = check_training_set(features, targets)?;
    if !(cfg.epsilon > 0.0) || !(cfg.c >= 0.0) || !(cfg.learning_rate > 0.0) {
        return Err(ModelError::InvalidHyperparameter(
            "svm needs epsilon > 0, C >= 0 and learning_rate > 0".into(),
        ));
    }
    let n = features.len() as f64;
    let mut model = SvmModel { weights: vec![0.0; d], bias: 0.0, epsilon: cfg.epsilon, c: cfg.c };
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        // Subgradient steps only settle with a shrinking step size.
        let lr = cfg.learning_rate / ((epoch + 1) as f64).sqrt();
        for batch in epoch_batches(features.len(), cfg.batch_size, cfg.seed, epoch) {
            let mut gw: Vec<f64> = model.weights.iter().map(|w| w / n).collect();
            let mut gb = 0.0;
            let scale = cfg.c / batch.len() as f64;
            for &i in &batch {
                let s = model.residual_subgradient(model.predict(&features[i]) - targets[i]);
                if s != 0.0 {
                    gw.iter_mut().zip(&features[i]).for_each(|(g, x)| *g += scale * s * x);
                    gb += scale * s;
                }
            }
            model.weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g);
            model.bias -= lr * gb;
        }
        history.push(model.objective(features, targets));
    }
    Ok((model, history))
}

// ---------------------------------------------------------------------------
// CART regression trees and the forest

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
}

struct TreeBuilder<'a> {
    features: &'a [Vec<f64>],
    targets: &'a [f64],
    cfg: &'a TreeConfig,
    rng: SplitMix64,
    dim: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    child_sse: f64,
    left_len: usize,
}

impl TreeBuilder<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let sum: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        TreeNode::Leaf { value: sum / idx.len() as f64, samples: idx.len() }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let k = self.cfg.features_per_split.min(self.dim);
        let mut all: Vec<usize> = (0..self.dim).collect();
        for i in 0..k {
            let j = i + self.rng.below(self.dim - i);
            all.swap(i, j);
        }
        let mut chosen = all[..k].to_vec();
        chosen.sort_unstable();
        chosen
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let m = idx.len();
        let min_leaf = self.cfg.min_leaf.max(1);
        if m < 2 * min_leaf {
            return None;
        }
        let first = self.targets[idx[0]];
        if idx.iter().all(|&i| self.targets[i] == first) {
            return None;
        }
        let total: f64 = idx.iter().map(|&i| self.targets[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.targets[i] * self.targets[i]).sum();
        let parent_sse = total_sq - total * total / m as f64;
        let slack = 1e-12 * parent_sse.abs();

        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(m);
        for f in self.candidate_features() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.features[i][f], self.targets[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut sum_l, mut sq_l) = (0.0, 0.0);
            for k in 1..m {
                let (xp, yp) = pairs[k - 1];
                sum_l += yp;
                sq_l += yp * yp;
                let xk = pairs[k].0;
                if xp == xk || k < min_leaf || m - k < min_leaf {
                    continue;
                }
                let (nl, nr) = (k as f64, (m - k) as f64);
                let sum_r = total - sum_l;
                let sq_r = total_sq - sq_l;
                let child = (sq_l - sum_l * sum_l / nl) + (sq_r - sum_r * sum_r / nr);
                let improves_parent = parent_sse - child > slack;
                let beats_best = best.as_ref().map_or(true, |b| child < b.child_sse - slack);
                if improves_parent && beats_best {
                    let mut threshold = 0.5 * (xp + xk);
                    if threshold >= xk {
                        threshold = xp;
                    }
                    best = Some(BestSplit { feature: f, threshold, child_sse: child, left_len: k });
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: &mut [usize], depth: usize) -> TreeNode {
        if self.cfg.max_depth.is_some_and(|d| depth >= d) {
            return self.leaf(idx);
        }
        let Some(split) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let f = split.feature;
        idx.sort_by(|&a, &b| self.features[a][f].total_cmp(&self.features[b][f]));
        let (left, right) = idx.split_at_mut(split.left_len);
        debug_assert!(left.iter().all(|&i| self.features[i][f] <= split.threshold));
        TreeNode::Split {
            feature: f,
            threshold: split.threshold,
            left: Box::new(self.grow(left, depth + 1)),
            right: Box::new(self.grow(right, depth + 1)),
        }
    }
}

fn build_on_indices(
    features: &[Vec<f64>],
    targets: &[f64],
    mut idx: Vec<usize>,
    cfg: &TreeConfig,
    seed: u64,
) -> TreeNode {
    let mut builder = TreeBuilder {
        features,
        targets,
        cfg,
        rng: SplitMix64::new(seed),
        dim: features[0].len(),
    };
    builder.grow(&mut idx, 0)
}

/// Grows one regression tree over every sample. Ties between equally good
/// splits go to the lowest feature index, then the lowest threshold.
pub fn build_tree(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &TreeConfig,
    seed: u64,
) -> Result<TreeNode, ModelError> {
    check_training_set(features, targets).map_err(|e| match e {
        ModelError::EmptyTrainingSet => ModelError::EmptySample,
        other => other,
    })?;
    validate_tree_config(cfg, features[0].len())?;
    Ok(build_on_indices(features, targets, (0..features.len()).collect(), cfg, seed))
}

fn validate_tree_config(cfg: &TreeConfig, dim: usize) -> Result<(), ModelError> {
    if cfg.min_leaf == 0 {
        return Err(ModelError::InvalidHyperparameter("min_leaf must be >= 1".into()));
    }
    if cfg.features_per_split == 0 || cfg.features_per_split > dim {
        return Err(ModelError::InvalidHyperparameter(format!(
            "features_per_split must be in [1, {dim}]"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub features_per_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: Some(12),
            min_leaf: 5,
            features_per_split: NUM_FEATURES.div_ceil(3),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn tree_config(&self) -> TreeConfig {
        TreeConfig {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            features_per_split: self.features_per_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub config: ForestConfig,
}

impl ForestModel {
    /// Mean of the tree predictions, summed in tree order.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Bagged trees. Tree `t` uses seed `derive_seed(seed, "tree/t")` for both
/// its bootstrap draw and its feature sampling, so the result does not
/// depend on thread scheduling.
pub fn train_forest(
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &ForestConfig,
) -> Result<ForestModel, ModelError> {
    check_training_set(features, targets)?;
    if cfg.n_trees == 0 {
        return Err(ModelError::InvalidHyperparameter("n_trees must be >= 1".into()));
    }
    let tree_cfg = cfg.tree_config();
    validate_tree_config(&tree_cfg, features[0].len())?;
    let n = features.len();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(cfg.seed, &format!("tree/{t}"));
            let mut rng = SplitMix64::new(seed);
            let idx = if cfg.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            build_on_indices(features, targets, idx, &tree_cfg, rng.next_u64())
        })
        .collect();
    Ok(ForestModel { trees, config: cfg.clone() })
}

// ---------------------------------------------------------------------------
// Uniform model envelope

/// The four compared methods, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dnn,
    Svm,
    Forest,
    Logistic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dnn, Method::Svm, Method::Forest, Method::Logistic];

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            Method::Dnn => "Deep Neural Network(DNN)",
            Method::Svm => "Support Vector Machine(SVM)",
            Method::Forest => "Random Forest",
            Method::Logistic => "Logistic Regression",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Method::Dnn => "dnn",
            Method::Svm => "svm",
            Method::Forest => "forest",
            Method::Logistic => "logistic",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dnn" => Ok(Method::Dnn),
            "svm" => Ok(Method::Svm),
            "forest" | "rf" | "random-forest" => Ok(Method::Forest),
            "logistic" | "lr" => Ok(Method::Logistic),
            other => Err(ModelError::InvalidHyperparameter(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", content = "payload", rename_all = "lowercase")]
pub enum ModelKind {
    Dnn(Network),
    Logistic(LogisticModel),
    Svm(SvmModel),
    Forest(ForestModel),
}

impl ModelKind {
    pub fn method(&self) -> Method {
        match self {
            ModelKind::Dnn(_) => Method::Dnn,
            ModelKind::Logistic(_) => Method::Logistic,
            ModelKind::Svm(_) => Method::Svm,
            ModelKind::Forest(_) => Method::Forest,
        }
    }

    fn raw(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(match self {
            ModelKind::Dnn(net) => net.predict(x)?,
            ModelKind::Logistic(m) => m.predict(x),
            ModelKind::Svm(m) => m.predict(x),
            ModelKind::Forest(m) => m.predict(x),
        })
    }
}

/// How a model's training rows were selected, so its held-out rows can be
/// recovered later.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub train_ratio: f64,
    pub split_seed: u64,
}

/// A trained predictor with the normalization it was trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub schema_version: u32,
    pub crop: Option<Crop>,
    pub model: ModelKind,
    pub normalizer: Normalizer,
    pub training: Option<TrainingInfo>,
}

impl Model {
    pub fn new(model: ModelKind, normalizer: Normalizer) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            crop: None,
            model,
            normalizer,
            training: None,
        }
    }

    pub fn method(&self) -> Method {
        self.model.method()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Prediction in t/ha for a normalized 46-value feature vector. The raw
/// output is clamped to `[0, 1]` before denormalization.
pub fn predict_model(model: &Model, x: &[f64]) -> Result<f64, ModelError> {
    if x.len() != NUM_FEATURES {
        return Err(ModelError::DimensionMismatch { expected: NUM_FEATURES, got: x.len() });
    }
    let raw = model.model.raw(x)?;
    Ok(model.normalizer.denormalize_target(raw.clamp(0.0, 1.0)))
}

/// Encodes, normalizes and predicts a raw record.
pub fn predict_record(model: &Model, record: &AgroRecord) -> Result<f64, ModelError> {
    let fv = encode_features(record)?;
    predict_model(model, &model.normalizer.normalize_features(fv.values()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normalizer(tmin: f64, tmax: f64) -> Normalizer {
        Normalizer {
            feature_min: vec![0.0; NUM_FEATURES],
            feature_max: vec![1.0; NUM_FEATURES],
            target_min: tmin,
            target_max: tmax,
        }
    }

    #[test]
    fn logistic_zero_model() {
        let m = LogisticModel::zeros(NUM_FEATURES);
        assert_eq!(m.predict(&[0.3; NUM_FEATURES]), 0.5);
        let model = Model::new(ModelKind::Logistic(m), normalizer(0.0, 10.0));
        assert_eq!(predict_model(&model, &[0.7; NUM_FEATURES]).unwrap(), 5.0);
    }

    #[test]
    fn svm_zero_model_clamps_then_denormalizes() {
        let svm = SvmModel { weights: vec![0.0; NUM_FEATURES], bias: 0.0, epsilon: 0.05, c: 1.0 };
        let model = Model::new(ModelKind::Svm(svm), normalizer(2.0, 4.0));
        assert_eq!(predict_model(&model, &[0.5; NUM_FEATURES]).unwrap(), 2.0);

        let high = SvmModel { weights: vec![0.0; NUM_FEATURES], bias: 3.0, epsilon: 0.05, c: 1.0 };
        let model = Model::new(ModelKind::Svm(high), normalizer(2.0, 4.0));
        assert_eq!(predict_model(&model, &[0.5; NUM_FEATURES]).unwrap(), 4.0);
    }

    #[test]
    fn predict_checks_dimension() {
        let model = Model::new(ModelKind::Logistic(LogisticModel::zeros(NUM_FEATURES)), normalizer(0.0, 1.0));
        assert!(matches!(
            predict_model(&model, &[0.0; 10]),
            Err(ModelError::DimensionMismatch { expected: 46, got: 10 })
        ));
    }

    #[test]
    fn constant_forest_predicts_denormalized_leaf() {
        let leaf = TreeNode::Leaf { value: 0.25, samples: 3 };
        let forest = ForestModel { trees: vec![leaf.clone(), leaf], config: ForestConfig::default() };
        let model = Model::new(ModelKind::Forest(forest), normalizer(2.0, 6.0));
        for v in [0.0, 0.4, 1.0] {
            assert_eq!(predict_model(&model, &[v; NUM_FEATURES]).unwrap(), 3.0);
        }
    }

    #[test]
    fn tube_subgradient() {
        let svm = SvmModel { weights: vec![], bias: 0.0, epsilon: 0.05, c: 1.0 };
        assert_eq!(svm.residual_subgradient(0.03), 0.0);
        assert_eq!(svm.residual_subgradient(-0.03), 0.0);
        assert_eq!(svm.residual_subgradient(0.2), 1.0);
        assert_eq!(svm.residual_subgradient(-0.2), -1.0);
    }

    #[test]
    fn two_point_tree() {
        let xs = vec![vec![0.0], vec![1.0]];
        let ys = vec![1.0, 5.0];
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: 1 };
        let tree = build_tree(&xs, &ys, &cfg, 0).unwrap();
        assert_eq!(tree.depth(), 1);
        match &tree {
            TreeNode::Split { feature, threshold, left, right } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                assert_eq!(**left, TreeNode::Leaf { value: 1.0, samples: 1 });
                assert_eq!(**right, TreeNode::Leaf { value: 5.0, samples: 1 });
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
    }

    #[test]
    fn constant_targets_make_a_leaf() {
        let xs: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let ys = vec![3.0; 10];
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: 2 };
        assert_eq!(build_tree(&xs, &ys, &cfg, 0).unwrap(), TreeNode::Leaf { value: 3.0, samples: 10 });
    }

    #[test]
    fn tie_goes_to_lowest_feature() {
        // Both features separate the targets identically.
        let xs = vec![vec![0.0, 10.0], vec![1.0, 11.0]];
        let ys = vec![0.0, 1.0];
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: 2 };
        match build_tree(&xs, &ys, &cfg, 99).unwrap() {
            TreeNode::Split { feature, .. } => assert_eq!(feature, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_leaf_respected() {
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let ys: Vec<f64> = (0..30).map(|i| (i % 7) as f64).collect();
        let cfg = TreeConfig { max_depth: None, min_leaf: 4, features_per_split: 1 };
        fn check(node: &TreeNode, min: usize) {
            match node {
                TreeNode::Leaf { samples, .. } => assert!(*samples >= min),
                TreeNode::Split { left, right, .. } => {
                    check(left, min);
                    check(right, min);
                }
            }
        }
        check(&build_tree(&xs, &ys, &cfg, 1).unwrap(), 4);
    }

    #[test]
    fn empty_inputs_rejected() {
        let cfg = TreeConfig { max_depth: None, min_leaf: 1, features_per_split: 1 };
        assert!(matches!(build_tree(&[], &[], &cfg, 0), Err(ModelError::EmptySample)));
        assert!(matches!(
            train_forest(&[], &[], &ForestConfig::default()),
            Err(ModelError::EmptyTrainingSet)
        ));
        assert!(matches!(
            train_logistic(&[], &[], &LogisticConfig::default()),
            Err(ModelError::EmptyTrainingSet)
        ));
        assert!(matches!(train_svm(&[], &[], &SvmConfig::default()), Err(ModelError::EmptyTrainingSet)));
    }

    #[test]
    fn method_names_and_parsing() {
        let names: Vec<_> = Method::ALL.iter().map(|m| m.display_name()).collect();
        assert_eq!(
            names,
            ["Deep Neural Network(DNN)", "Support Vector Machine(SVM)", "Random Forest", "Logistic Regression"]
        );
        for m in Method::ALL {
            assert_eq!(m.key().parse::<Method>().unwrap(), m);
        }
        assert!("knn".parse::<Method>().is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let model = Model::new(
            ModelKind::Svm(SvmModel { weights: vec![0.5; NUM_FEATURES], bias: 0.1, epsilon: 0.05, c: 1.0 }),
            normalizer(1.0, 3.0),
        );
        let text = model.to_json();
        assert!(text.contains("\"variant\": \"svm\""));
        assert!(text.contains("\"payload\""));
        assert_eq!(Model::from_json(&text).unwrap(), model);
    }
}
