//! Dense feed-forward networks with exact analytic gradients.
//!
//! A network is a trunk of dense layers whose last activation is the embedding
//! f(x), plus one or two head stacks (Y and optionally E). Training is plain
//! mini-batch gradient descent with a seeded shuffle, so the result is a pure
//! function of (initial net, data, config).

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Rectifier,
}

impl Activation {
    fn apply(&self, z: &mut Array2<f64>) {
        if let Activation::Rectifier = self {
            z.mapv_inplace(|v| if v > 0.0 { v } else { 0.0 });
        }
    }

    /// Derivative from the post-activation value; subgradient at 0 is 0.
    fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Rectifier => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Rectifier => "rectifier",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Activation> {
        match tag {
            "identity" => Ok(Activation::Identity),
            "rectifier" => Ok(Activation::Rectifier),
            other => Err(Error::InvalidValue(format!("unknown activation '{other}'"))),
        }
    }
}

/// Weights are [out x in]; forward computes act(x W^T + b) over batch rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Seeded uniform init in +-sqrt(6 / (fan_in + fan_out)).
    pub fn init(out: usize, input: usize, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let bound = (6.0 / (input + out) as f64).sqrt();
        let weights = Array2::from_shape_fn((out, input), |_| rng.gen_range(-bound..bound));
        DenseLayer {
            weights,
            bias: Array1::zeros(out),
            activation,
        }
    }

    pub fn out_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn in_width(&self) -> usize {
        self.weights.ncols()
    }

    fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut z = x.dot(&self.weights.t()) + &self.bias;
        self.activation.apply(&mut z);
        z
    }
}

/// Gradient of one layer's parameters.
#[derive(Debug, Clone)]
pub struct LayerGrad {
    pub d_weights: Array2<f64>,
    pub d_bias: Array1<f64>,
}

/// Activations of one stack: `values[0]` is the input, `values[i]` is the
/// output of layer i-1.
#[derive(Debug, Clone)]
pub struct StackCache {
    pub values: Vec<Array2<f64>>,
}

impl StackCache {
    pub fn output(&self) -> &Array2<f64> {
        self.values.last().expect("non-empty cache")
    }
}

pub(crate) fn forward_stack(layers: &[DenseLayer], x: &Array2<f64>) -> StackCache {
    let mut values = Vec::with_capacity(layers.len() + 1);
    values.push(x.clone());
    for layer in layers {
        let next = layer.forward(values.last().unwrap());
        values.push(next);
    }
    StackCache { values }
}

/// Backpropagate `grad_out` (dL/d output) through a stack; returns per-layer
/// parameter gradients and dL/d input.
pub(crate) fn backward_stack(
    layers: &[DenseLayer],
    cache: &StackCache,
    grad_out: &Array2<f64>,
) -> (Vec<LayerGrad>, Array2<f64>) {
    let mut grads: Vec<LayerGrad> = Vec::with_capacity(layers.len());
    let mut grad = grad_out.clone();
    for (i, layer) in layers.iter().enumerate().rev() {
        let output = &cache.values[i + 1];
        let input = &cache.values[i];
        // dz = dL/da * act'(z), with act' read off the post-activation.
        let mut dz = grad;
        for (g, &a) in dz.iter_mut().zip(output.iter()) {
            *g *= layer.activation.derivative_from_output(a);
        }
        let d_weights = dz.t().dot(input);
        let d_bias = dz.sum_axis(Axis(0));
        grad = dz.dot(&layer.weights);
        grads.push(LayerGrad { d_weights, d_bias });
    }
    grads.reverse();
    (grads, grad)
}

fn apply_grads(layers: &mut [DenseLayer], grads: &[LayerGrad], lr: f64) {
    for (layer, g) in layers.iter_mut().zip(grads) {
        layer.weights.scaled_add(-lr, &g.d_weights);
        layer.bias.scaled_add(-lr, &g.d_bias);
    }
}

/// Shared trunk plus one or two head stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub trunk: Vec<DenseLayer>,
    pub head_y: Vec<DenseLayer>,
    pub head_e: Option<Vec<DenseLayer>>,
}

impl Network {
    /// Build a seeded network. `trunk_widths` runs input -> embedding (the
    /// last entry is the embedding width); each head maps the embedding to its
    /// output width through the listed intermediate widths.
    pub fn dense(
        trunk_widths: &[usize],
        head_y_widths: &[usize],
        head_e_widths: Option<&[usize]>,
        activation: Activation,
        seed: u64,
    ) -> Result<Network> {
        if trunk_widths.len() < 2 {
            return Err(Error::InvalidValue(
                "trunk needs at least input and embedding widths".into(),
            ));
        }
        if head_y_widths.is_empty() {
            return Err(Error::InvalidValue("Y head needs an output width".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let build = |widths: &[usize], input: usize, rng: &mut ChaCha8Rng| {
            let mut layers = Vec::new();
            let mut prev = input;
            for (i, &w) in widths.iter().enumerate() {
                // Head output layers are linear; hidden layers share the
                // trunk activation.
                let act = if i + 1 == widths.len() {
                    Activation::Identity
                } else {
                    activation
                };
                layers.push(DenseLayer::init(w, prev, act, rng));
                prev = w;
            }
            layers
        };
        let mut trunk = Vec::new();
        let mut prev = trunk_widths[0];
        for &w in &trunk_widths[1..] {
            trunk.push(DenseLayer::init(w, prev, activation, &mut rng));
            prev = w;
        }
        let embedding = prev;
        let head_y = build(head_y_widths, embedding, &mut rng);
        let head_e = head_e_widths.map(|ws| build(ws, embedding, &mut rng));
        Ok(Network {
            trunk,
            head_y,
            head_e,
        })
    }

    pub fn input_width(&self) -> usize {
        self.trunk[0].in_width()
    }

    pub fn embedding_width(&self) -> usize {
        self.trunk.last().expect("non-empty trunk").out_width()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_width() {
            return Err(Error::ShapeMismatch(format!(
                "input width {} vs network input {}",
                x.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    /// Full forward pass; returns the embedding and each head's output.
    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardPass> {
        self.check_input(x)?;
        let trunk = forward_stack(&self.trunk, x);
        let head_y = forward_stack(&self.head_y, trunk.output());
        let head_e = self
            .head_e
            .as_ref()
            .map(|h| forward_stack(h, trunk.output()));
        Ok(ForwardPass {
            trunk,
            head_y,
            head_e,
        })
    }

    /// Trunk output only (the embedding map f).
    pub fn embed(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(forward_stack(&self.trunk, x).output().clone())
    }

    pub(crate) fn trunk_forward(&self, x: &Array2<f64>) -> Result<StackCache> {
        self.check_input(x)?;
        Ok(forward_stack(&self.trunk, x))
    }

    pub(crate) fn trunk_backward(
        &self,
        cache: &StackCache,
        grad_embedding: &Array2<f64>,
    ) -> Vec<LayerGrad> {
        backward_stack(&self.trunk, cache, grad_embedding).0
    }

    pub(crate) fn apply_trunk_grads(&mut self, grads: &[LayerGrad], lr: f64) {
        apply_grads(&mut self.trunk, grads, lr);
    }

    /// Flattened parameter vector (trunk, head_y, head_e; weights row-major,
    /// then bias, per layer).
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in self.all_layers() {
            out.extend(layer.weights.iter().copied());
            out.extend(layer.bias.iter().copied());
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let needed: usize = self
            .all_layers()
            .map(|l| l.weights.len() + l.bias.len())
            .sum();
        if params.len() != needed {
            return Err(Error::ShapeMismatch(format!(
                "{} params given, network has {}",
                params.len(),
                needed
            )));
        }
        let mut it = params.iter();
        for layer in self.all_layers_mut() {
            for w in layer.weights.iter_mut() {
                *w = *it.next().unwrap();
            }
            for b in layer.bias.iter_mut() {
                *b = *it.next().unwrap();
            }
        }
        Ok(())
    }

    fn all_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk
            .iter()
            .chain(self.head_y.iter())
            .chain(self.head_e.iter().flatten())
    }

    fn all_layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.trunk
            .iter_mut()
            .chain(self.head_y.iter_mut())
            .chain(self.head_e.iter_mut().flatten())
    }

    /// Serialize to the checkpoint text format (bit-exact round trip: every
    /// f64 is written as the hex of its bit pattern).
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "explemb-checkpoint v1 trunk={} head_y={} head_e={}",
            self.trunk.len(),
            self.head_y.len(),
            self.head_e.as_ref().map(|h| h.len() as i64).unwrap_or(-1)
        );
        let dump = |section: &str, layers: &[DenseLayer], s: &mut String| {
            for (i, l) in layers.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "layer {section} {i} {} {} {}",
                    l.out_width(),
                    l.in_width(),
                    l.activation.tag()
                );
                for &w in l.weights.iter() {
                    let _ = writeln!(s, "{:016x}", w.to_bits());
                }
                for &b in l.bias.iter() {
                    let _ = writeln!(s, "{:016x}", b.to_bits());
                }
            }
        };
        dump("trunk", &self.trunk, &mut s);
        dump("head_y", &self.head_y, &mut s);
        if let Some(h) = &self.head_e {
            dump("head_e", h, &mut s);
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Network> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::InvalidValue("empty checkpoint".into()))?;
        let bad = |m: &str| Error::InvalidValue(format!("bad checkpoint: {m}"));
        if !header.starts_with("explemb-checkpoint v1 ") {
            return Err(bad("unknown header"));
        }
        let mut counts = [0i64; 3];
        for (i, key) in ["trunk=", "head_y=", "head_e="].iter().enumerate() {
            let field = header
                .split_whitespace()
                .find(|t| t.starts_with(key))
                .ok_or_else(|| bad("missing section count"))?;
            counts[i] = field[key.len()..]
                .parse()
                .map_err(|_| bad("unparsable section count"))?;
        }
        let mut read_section = |n: i64| -> Result<Vec<DenseLayer>> {
            let mut layers = Vec::new();
            for _ in 0..n {
                let head = lines.next().ok_or_else(|| bad("truncated"))?;
                let parts: Vec<&str> = head.split_whitespace().collect();
                if parts.len() != 6 || parts[0] != "layer" {
                    return Err(bad("malformed layer line"));
                }
                let out: usize = parts[3].parse().map_err(|_| bad("layer width"))?;
                let input: usize = parts[4].parse().map_err(|_| bad("layer width"))?;
                let activation = Activation::from_tag(parts[5])?;
                let read_f64 = |lines: &mut std::str::Lines| -> Result<f64> {
                    let l = lines.next().ok_or_else(|| bad("truncated values"))?;
                    let bits = u64::from_str_radix(l.trim(), 16).map_err(|_| bad("hex value"))?;
                    Ok(f64::from_bits(bits))
                };
                let mut weights = Array2::zeros((out, input));
                for w in weights.iter_mut() {
                    *w = read_f64(&mut lines)?;
                }
                let mut bias = Array1::zeros(out);
                for b in bias.iter_mut() {
                    *b = read_f64(&mut lines)?;
                }
                layers.push(DenseLayer {
                    weights,
                    bias,
                    activation,
                });
            }
            Ok(layers)
        };
        let trunk = read_section(counts[0])?;
        let head_y = read_section(counts[1])?;
        let head_e = if counts[2] >= 0 {
            Some(read_section(counts[2])?)
        } else {
            None
        };
        if trunk.is_empty() {
            return Err(bad("empty trunk"));
        }
        Ok(Network {
            trunk,
            head_y,
            head_e,
        })
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_checkpoint())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load_checkpoint(path: &Path) -> Result<Network> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        Network::from_checkpoint(&text)
    }
}

/// Cached activations of a full forward pass.
pub struct ForwardPass {
    pub trunk: StackCache,
    pub head_y: StackCache,
    pub head_e: Option<StackCache>,
}

impl ForwardPass {
    pub fn embedding(&self) -> &Array2<f64> {
        self.trunk.output()
    }

    pub fn y_output(&self) -> &Array2<f64> {
        self.head_y.output()
    }

    pub fn e_output(&self) -> Option<&Array2<f64>> {
        self.head_e.as_ref().map(|c| c.output())
    }
}

/// Mean over all entries of the squared difference.
pub fn loss_mse(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mse {:?} vs {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    Ok(pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

fn grad_mse(pred: &Array2<f64>, target: &Array2<f64>) -> Array2<f64> {
    let n = pred.len() as f64;
    (pred - target).mapv(|d| 2.0 * d / n)
}

/// Mean over the batch of -log softmax(logits)[target], with max-subtraction.
pub fn loss_cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> Result<f64> {
    if logits.nrows() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows vs {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    let n_classes = logits.ncols();
    let mut total = 0.0;
    for (row, &t) in logits.rows().into_iter().zip(targets) {
        if t >= n_classes {
            return Err(Error::InvalidValue(format!(
                "target class {t} out of range 0..{n_classes}"
            )));
        }
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += -(row[t] - max - log_sum);
    }
    Ok(total / targets.len() as f64)
}

fn grad_cross_entropy(logits: &Array2<f64>, targets: &[usize]) -> Array2<f64> {
    let n = targets.len() as f64;
    let mut grad = Array2::zeros(logits.dim());
    for ((mut grow, row), &t) in grad
        .rows_mut()
        .into_iter()
        .zip(logits.rows())
        .zip(targets)
    {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (j, g) in grow.iter_mut().enumerate() {
            let softmax = exps[j] / sum;
            *g = (softmax - if j == t { 1.0 } else { 0.0 }) / n;
        }
    }
    grad
}

/// Target for one head: regression values or class indices.
#[derive(Debug, Clone)]
pub enum HeadTarget {
    Regression(Array2<f64>),
    Classes(Vec<usize>),
}

impl HeadTarget {
    pub fn len(&self) -> usize {
        match self {
            HeadTarget::Regression(m) => m.nrows(),
            HeadTarget::Classes(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn select(&self, rows: &[usize]) -> HeadTarget {
        match self {
            HeadTarget::Regression(m) => {
                let mut out = Array2::zeros((rows.len(), m.ncols()));
                for (r, &i) in rows.iter().enumerate() {
                    out.row_mut(r).assign(&m.row(i));
                }
                HeadTarget::Regression(out)
            }
            HeadTarget::Classes(c) => HeadTarget::Classes(rows.iter().map(|&i| c[i]).collect()),
        }
    }

    fn loss(&self, pred: &Array2<f64>) -> Result<f64> {
        match self {
            HeadTarget::Regression(t) => loss_mse(pred, t),
            HeadTarget::Classes(t) => loss_cross_entropy(pred, t),
        }
    }

    fn grad(&self, pred: &Array2<f64>) -> Array2<f64> {
        match self {
            HeadTarget::Regression(t) => grad_mse(pred, t),
            HeadTarget::Classes(t) => grad_cross_entropy(pred, t),
        }
    }
}

/// Which heads the training loss covers.
#[derive(Debug, Clone)]
pub enum LossSpec {
    YOnly(HeadTarget),
    EOnly(HeadTarget),
    Multitask {
        y: HeadTarget,
        e: HeadTarget,
        lambda: f64,
    },
}

impl LossSpec {
    fn len(&self) -> usize {
        match self {
            LossSpec::YOnly(t) | LossSpec::EOnly(t) => t.len(),
            LossSpec::Multitask { y, .. } => y.len(),
        }
    }

    fn select(&self, rows: &[usize]) -> LossSpec {
        match self {
            LossSpec::YOnly(t) => LossSpec::YOnly(t.select(rows)),
            LossSpec::EOnly(t) => LossSpec::EOnly(t.select(rows)),
            LossSpec::Multitask { y, e, lambda } => LossSpec::Multitask {
                y: y.select(rows),
                e: e.select(rows),
                lambda: *lambda,
            },
        }
    }
}

/// loss_Y + lambda * loss_E with per-head loss kinds chosen by the targets.
pub fn loss_multitask(
    out_y: &Array2<f64>,
    target_y: &HeadTarget,
    out_e: &Array2<f64>,
    target_e: &HeadTarget,
    lambda: f64,
) -> Result<f64> {
    Ok(target_y.loss(out_y)? + lambda * target_e.loss(out_e)?)
}

/// All parameter gradients of one backward pass.
pub struct Gradients {
    pub trunk: Vec<LayerGrad>,
    pub head_y: Vec<LayerGrad>,
    pub head_e: Vec<LayerGrad>,
}

/// Forward + exact analytic backward pass for the given loss; returns the
/// loss value and every parameter gradient.
pub fn backward(net: &Network, x_batch: &Array2<f64>, spec: &LossSpec) -> Result<(f64, Gradients)> {
    let pass = net.forward(x_batch)?;
    let zero_like = |layers: &[DenseLayer]| {
        layers
            .iter()
            .map(|l| LayerGrad {
                d_weights: Array2::zeros(l.weights.dim()),
                d_bias: Array1::zeros(l.bias.len()),
            })
            .collect::<Vec<_>>()
    };

    let (loss, grad_embedding, gy, ge) = match spec {
        LossSpec::YOnly(t) => {
            let loss = t.loss(pass.y_output())?;
            let (gy, ge_grad) = backward_stack(&net.head_y, &pass.head_y, &t.grad(pass.y_output()));
            (loss, ge_grad, gy, zero_like(net.head_e.as_deref().unwrap_or(&[])))
        }
        LossSpec::EOnly(t) => {
            let head_e = net
                .head_e
                .as_ref()
                .ok_or_else(|| Error::InvalidValue("network has no E head".into()))?;
            let cache_e = pass.head_e.as_ref().unwrap();
            let loss = t.loss(cache_e.output())?;
            let (ge, grad_emb) = backward_stack(head_e, cache_e, &t.grad(cache_e.output()));
            (loss, grad_emb, zero_like(&net.head_y), ge)
        }
        LossSpec::Multitask { y, e, lambda } => {
            let head_e = net
                .head_e
                .as_ref()
                .ok_or_else(|| Error::InvalidValue("network has no E head".into()))?;
            let cache_e = pass.head_e.as_ref().unwrap();
            let loss = loss_multitask(pass.y_output(), y, cache_e.output(), e, *lambda)?;
            let (gy, grad_emb_y) =
                backward_stack(&net.head_y, &pass.head_y, &y.grad(pass.y_output()));
            let grad_e_out = e.grad(cache_e.output()).mapv(|g| g * lambda);
            let (ge, grad_emb_e) = backward_stack(head_e, cache_e, &grad_e_out);
            (loss, grad_emb_y + grad_emb_e, gy, ge)
        }
    };
    let trunk = backward_stack(&net.trunk, &pass.trunk, &grad_embedding).0;
    Ok((
        loss,
        Gradients {
            trunk,
            head_y: gy,
            head_e: ge,
        },
    ))
}

/// Mini-batch gradient-descent settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Overrides the learning rate on trunk (embedding) layers when set.
    pub trunk_learning_rate: Option<f64>,
    /// Multi-task loss weight on the E head.
    pub lambda: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if self.learning_rate < 0.0 || self.trunk_learning_rate.is_some_and(|r| r < 0.0) {
            return Err(Error::Config("learning rates must be >= 0".into()));
        }
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 64,
            learning_rate: 1e-3,
            trunk_learning_rate: None,
            lambda: 1.0,
            seed: 0,
        }
    }
}

/// Seeded epoch shuffle shared by `train` and pairwise training.
pub(crate) fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    // Fisher-Yates
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        idx.swap(i, j);
    }
    idx
}

/// Train by plain mini-batch gradient descent; returns the trained network
/// and the per-epoch mean training loss.
pub fn train(
    net: &Network,
    x: &Array2<f64>,
    spec: &LossSpec,
    config: &TrainConfig,
) -> Result<(Network, Vec<f64>)> {
    config.validate()?;
    if x.nrows() != spec.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} samples vs {} targets",
            x.nrows(),
            spec.len()
        )));
    }
    let mut net = net.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let trunk_lr = config.trunk_learning_rate.unwrap_or(config.learning_rate);
    let mut trajectory = Vec::with_capacity(config.epochs);
    let n = x.nrows();
    for epoch in 0..config.epochs {
        let order = shuffled_indices(n, &mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.batch_size.min(n)) {
            let xb = {
                let mut b = Array2::zeros((chunk.len(), x.ncols()));
                for (r, &i) in chunk.iter().enumerate() {
                    b.row_mut(r).assign(&x.row(i));
                }
                b
            };
            let spec_b = spec.select(chunk);
            let (loss, grads) = backward(&net, &xb, &spec_b)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, loss });
            }
            apply_grads(&mut net.trunk, &grads.trunk, trunk_lr);
            apply_grads(&mut net.head_y, &grads.head_y, config.learning_rate);
            if let Some(h) = net.head_e.as_mut() {
                apply_grads(h, &grads.head_e, config.learning_rate);
            }
            epoch_loss += loss;
            batches += 1;
        }
        trajectory.push(epoch_loss / batches as f64);
    }
    Ok((net, trajectory))
}
