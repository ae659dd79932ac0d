//! Feedforward regression network trained by back-propagation.
//!
//! Weights of layer `l` are stored row-major as a `fan_out x fan_in` matrix.
//! The loss for one example is `0.5 * (prediction - target)^2`; reported
//! MSE values are the plain mean of `(prediction - target)^2`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::NnError;
use crate::rng::{derive_seed, permutation, SplitMix64};

pub const DEFAULT_LAYER_SIZES: [usize; 5] = [46, 64, 32, 16, 1];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative given the pre-activation `z` and activation `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            other => Err(NnError::InvalidConfig(format!("unknown activation {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NetworkRepr {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct Network {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl TryFrom<NetworkRepr> for Network {
    type Error = NnError;

    fn try_from(r: NetworkRepr) -> Result<Self, Self::Error> {
        Network::from_parts(r.layer_sizes, r.hidden_activation, r.weights, r.biases)
    }
}

impl From<Network> for NetworkRepr {
    fn from(n: Network) -> Self {
        NetworkRepr {
            layer_sizes: n.layer_sizes,
            hidden_activation: n.hidden_activation,
            output_activation: n.output_activation,
            weights: n.weights,
            biases: n.biases,
        }
    }
}

fn check_sizes(layer_sizes: &[usize]) -> Result<(), NnError> {
    if layer_sizes.len() < 2 {
        return Err(NnError::InvalidArchitecture(
            "need at least an input and an output layer".into(),
        ));
    }
    if let Some(pos) = layer_sizes.iter().position(|&s| s == 0) {
        return Err(NnError::InvalidArchitecture(format!("layer {pos} has size 0")));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(NnError::InvalidArchitecture("output layer must have one unit".into()));
    }
    Ok(())
}

/// Glorot-uniform weights, zero biases.
pub fn init_network(layer_sizes: &[usize], hidden_activation: Activation, seed: u64) -> Result<Network, NnError> {
    check_sizes(layer_sizes)?;
    let mut rng = SplitMix64::new(seed);
    let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
    let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
    for pair in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        weights.push((0..fan_in * fan_out).map(|_| rng.uniform(-bound, bound)).collect());
        biases.push(vec![0.0; fan_out]);
    }
    Ok(Network {
        layer_sizes: layer_sizes.to_vec(),
        hidden_activation,
        output_activation: Activation::Identity,
        weights,
        biases,
    })
}

/// Values retained by a forward pass for the backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn prediction(&self) -> f64 {
        self.activations.last().unwrap()[0]
    }

    /// Smallest `|z|` over hidden pre-activations; used to avoid ReLU kinks.
    pub fn min_hidden_pre_activation(&self) -> f64 {
        let hidden = &self.pre_activations[..self.pre_activations.len() - 1];
        hidden
            .iter()
            .flatten()
            .fold(f64::INFINITY, |m, z| m.min(z.abs()))
    }
}

/// Per-layer parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Gradient of the input-to-first-hidden weights.
    pub fn input_to_hidden(&self) -> &[f64] {
        &self.weights[0]
    }

    /// Gradients of every weight matrix downstream of the first hidden layer.
    pub fn hidden_to_output(&self) -> &[Vec<f64>] {
        &self.weights[1..]
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
            .for_each(|x| *x *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|x| x.is_finite())
    }
}

impl Network {
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        hidden_activation: Activation,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
    ) -> Result<Self, NnError> {
        check_sizes(&layer_sizes)?;
        let n_layers = layer_sizes.len() - 1;
        if weights.len() != n_layers || biases.len() != n_layers {
            return Err(NnError::InvalidArchitecture(format!(
                "expected {n_layers} weight matrices and bias vectors"
            )));
        }
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            if weights[l].len() != pair[0] * pair[1] || biases[l].len() != pair[1] {
                return Err(NnError::InvalidArchitecture(format!("layer {l} has inconsistent shape")));
            }
        }
        if weights.iter().chain(&biases).flatten().any(|v| !v.is_finite()) {
            return Err(NnError::InvalidArchitecture("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            hidden_activation,
            output_activation: Activation::Identity,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.layer_sizes.len() - 2
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.weights.len() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardPass, NnError> {
        if x.len() != self.input_size() {
            return Err(NnError::DimensionMismatch {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.weights.len());
        activations.push(x.to_vec());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let input = activations.last().unwrap();
            let fan_in = input.len();
            let act = self.activation_for(l);
            let z: Vec<f64> = b
                .iter()
                .enumerate()
                .map(|(i, bias)| {
                    let row = &w[i * fan_in..(i + 1) * fan_in];
                    bias + row.iter().zip(input).map(|(wij, aj)| wij * aj).sum::<f64>()
                })
                .collect();
            let a = z.iter().map(|&zi| act.apply(zi)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardPass {
            activations,
            pre_activations,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, NnError> {
        Ok(self.forward(x)?.prediction())
    }

    /// Gradients of `0.5 * (prediction - target)^2` for one example.
    pub fn backward(&self, pass: &ForwardPass, target: f64) -> Result<Gradients, NnError> {
        if pass.activations.len() != self.weights.len() + 1 || pass.activations[0].len() != self.input_size() {
            return Err(NnError::DimensionMismatch {
                expected: self.weights.len() + 1,
                got: pass.activations.len(),
            });
        }
        let mut grads = Gradients::zeros_like(self);
        let last = self.weights.len() - 1;
        let out_z = pass.pre_activations[last][0];
        let out_a = pass.activations[last + 1][0];
        let mut delta = vec![(out_a - target) * self.output_activation.derivative(out_z, out_a)];

        for l in (0..=last).rev() {
            let input = &pass.activations[l];
            let fan_in = input.len();
            let gw = &mut grads.weights[l];
            for (i, &d) in delta.iter().enumerate() {
                let row = &mut gw[i * fan_in..(i + 1) * fan_in];
                row.iter_mut().zip(input).for_each(|(g, a)| *g = d * a);
            }
            grads.biases[l].copy_from_slice(&delta);
            if l == 0 {
                break;
            }
            let w = &self.weights[l];
            let act = self.activation_for(l - 1);
            let prev_z = &pass.pre_activations[l - 1];
            delta = (0..fan_in)
                .map(|j| {
                    let back: f64 = delta.iter().enumerate().map(|(i, d)| w[i * fan_in + j] * d).sum();
                    back * act.derivative(prev_z[j], input[j])
                })
                .collect();
        }
        Ok(grads)
    }

    /// Plain gradient step: every parameter moves by `-learning_rate * grad`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) {
        let params = self.weights.iter_mut().chain(self.biases.iter_mut());
        let updates = grads.weights.iter().chain(&grads.biases);
        for (p, g) in params.zip(updates) {
            p.iter_mut().zip(g).for_each(|(w, d)| *w -= learning_rate * d);
        }
    }

    fn loss(&self, x: &[f64], target: f64) -> Result<f64, NnError> {
        let r = self.predict(x)? - target;
        Ok(0.5 * r * r)
    }

    fn param_mut(&mut self, index: usize) -> &mut f64 {
        let mut k = index;
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            if k < v.len() {
                return &mut v[k];
            }
            k -= v.len();
        }
        panic!("parameter index {index} out of range");
    }

    /// Mean squared error over a set.
    pub fn mse(&self, features: &[Vec<f64>], targets: &[f64]) -> Result<f64, NnError> {
        let mut total = 0.0;
        for (x, &t) in features.iter().zip(targets) {
            let r = self.predict(x)? - t;
            total += r * r;
        }
        Ok(total / targets.len().max(1) as f64)
    }
}

/// Largest relative deviation between back-propagated gradients and central
/// differences `(L(p + eps) - L(p - eps)) / (2 eps)` over every parameter.
pub fn gradient_check(net: &Network, x: &[f64], target: f64, epsilon: f64) -> Result<f64, NnError> {
    if !(epsilon > 0.0) {
        return Err(NnError::InvalidConfig("epsilon must be > 0".into()));
    }
    let analytic = net.backward(&net.forward(x)?, target)?;
    let flat: Vec<f64> = analytic
        .weights
        .iter()
        .chain(&analytic.biases)
        .flatten()
        .copied()
        .collect();
    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (k, &a) in flat.iter().enumerate() {
        let original = *probe.param_mut(k);
        *probe.param_mut(k) = original + epsilon;
        let plus = probe.loss(x, target)?;
        *probe.param_mut(k) = original - epsilon;
        let minus = probe.loss(x, target)?;
        *probe.param_mut(k) = original;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let dev = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-12);
        worst = worst.max(dev);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Non-improving validation epochs tolerated before stopping.
    pub patience: usize,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            batch_size: 32,
            max_epochs: 200,
            patience: 20,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::InvalidConfig("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(NnError::InvalidConfig("validation_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    /// Monitored loss; equals `train_mse` when no validation rows were carved out.
    pub val_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossHistory {
    pub epochs: Vec<EpochLoss>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    /// `epoch,train_mse,val_mse` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "epoch,train_mse,val_mse")?;
        for e in &self.epochs {
            writeln!(w, "{},{},{}", e.epoch, e.train_mse, e.val_mse)?;
        }
        Ok(())
    }
}

/// Mini-batch SGD with validation-patience early stopping. Returns the
/// parameters of the best validation epoch.
pub fn train(
    mut net: Network,
    features: &[Vec<f64>],
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<(Network, LossHistory), NnError> {
    cfg.validate()?;
    if features.is_empty() {
        return Err(NnError::EmptyTrainingSet);
    }
    if features.len() != targets.len() {
        return Err(NnError::DimensionMismatch {
            expected: features.len(),
            got: targets.len(),
        });
    }
    if let Some(bad) = features.iter().find(|x| x.len() != net.input_size()) {
        return Err(NnError::DimensionMismatch {
            expected: net.input_size(),
            got: bad.len(),
        });
    }

    let n = features.len();
    let order = permutation(n, derive_seed(cfg.seed, "validation"));
    let mut n_val = (n as f64 * cfg.validation_fraction).floor() as usize;
    if n_val >= n {
        n_val = 0;
    }
    let (val_idx, train_idx) = order.split_at(n_val);
    let gather = |idx: &[usize]| -> (Vec<Vec<f64>>, Vec<f64>) {
        idx.iter().map(|&i| (features[i].clone(), targets[i])).unzip()
    };
    let (train_x, train_y) = gather(train_idx);
    let (val_x, val_y) = gather(val_idx);

    let mut history = LossHistory::default();
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 0..cfg.max_epochs {
        let order = permutation(train_x.len(), derive_seed(cfg.seed, &format!("epoch/{epoch}")));
        for batch in order.chunks(cfg.batch_size) {
            let mut sum = Gradients::zeros_like(&net);
            for &i in batch {
                let pass = net.forward(&train_x[i])?;
                sum.add_assign(&net.backward(&pass, train_y[i])?);
            }
            sum.scale(1.0 / batch.len() as f64);
            net.sgd_step(&sum, cfg.learning_rate);
        }

        let train_mse = net.mse(&train_x, &train_y)?;
        if !train_mse.is_finite() {
            return Err(NnError::DivergedLoss { epoch });
        }
        let val_mse = if val_x.is_empty() {
            train_mse
        } else {
            net.mse(&val_x, &val_y)?
        };
        history.epochs.push(EpochLoss {
            epoch,
            train_mse,
            val_mse,
        });

        if val_mse < best_loss {
            best_loss = val_mse;
            best = net.clone();
            history.best_epoch = epoch;
            stale = 0;
        } else {
            stale += 1;
            if stale > cfg.patience {
                break;
            }
        }
    }
    Ok((best, history))
}
