//! Feedforward mapping from compensated gaze to screen coordinates.
//!
//! Two flavours share one implementation: a regressor that outputs a pixel
//! position directly, and a classifier that outputs a probability per screen
//! block. Hidden layers are ReLU; the output layer is linear for regression
//! (trained on mean squared error with targets scaled into the unit square)
//! and softmax with cross-entropy for classification. Optimisation is plain
//! minibatch Adam.
//!
//! Training stops at whichever comes first: the task-specific quality gate
//! (loss under threshold with R² at target for regression, held-out accuracy
//! at target for classification) or the epoch cap.

use crate::calib::{CalibrationDataset, DatasetTargets};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What the output layer produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Regression,
    Classification,
}

/// Architecture of the mapping network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub output_kind: OutputKind,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidParams("layer widths must be positive".into()));
        }
        if self.hidden_dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidParams("hidden widths must be positive".into()));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }
}

/// One dense layer. Weights are row-major, one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.biases[o];
            for (w, xi) in row.iter().zip(x) {
                acc += w * xi;
            }
            out.push(acc);
        }
    }
}

/// Per-feature affine input transform applied ahead of the first layer.
/// Stays at identity unless a stored model supplies one.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for i in 0..self.mean.len() {
            out.push((x[i] - self.mean[i]) / self.std[i]);
        }
    }
}

/// Why training stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopRule {
    /// Regression gate: loss under threshold and R² at target.
    LossAndR2,
    /// Classification gate: evaluation accuracy at target.
    Accuracy,
    /// Ran out of epochs.
    EpochCap,
}

/// Outcome of a training run. Wall time is informational only and never
/// serialised, so saved models stay byte-identical across machines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    pub r_squared: Option<f64>,
    pub accuracy: Option<f64>,
    pub stop: StopRule,
    pub wall_ms: u128,
}

/// Network plus everything needed to reproduce its predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedNet {
    pub spec: NetworkSpec,
    pub layers: Vec<Layer>,
    pub input_norm: Standardizer,
    /// Screen dimensions regression targets were divided by during training.
    pub target_scale: Option<[f64; 2]>,
    pub report: Option<TrainReport>,
}

impl TrainedNet {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }
}

/// Builds a network with Glorot-uniform weights
/// (`limit = sqrt(6 / (fan_in + fan_out))`) and zero biases.
pub fn init_network(spec: NetworkSpec, seed: u64) -> Result<TrainedNet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = spec.dims();
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for w in dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
        layers.push(Layer { in_dim: fan_in, out_dim: fan_out, weights, biases: vec![0.0; fan_out] });
    }
    let input_dim = spec.input_dim;
    Ok(TrainedNet {
        spec,
        layers,
        input_norm: Standardizer::identity(input_dim),
        target_scale: None,
        report: None,
    })
}

fn relu(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v {
        *x /= sum;
    }
}

/// Runs the network. Regression outputs are rescaled back to pixels when a
/// target scale is recorded; classification outputs are the softmax
/// probabilities.
pub fn forward(net: &TrainedNet, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != net.spec.input_dim {
        return Err(Error::InvalidInput(format!(
            "input has {} components, network expects {}",
            input.len(),
            net.spec.input_dim
        )));
    }
    if input.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("input has non-finite component".into()));
    }
    let mut cur = Vec::with_capacity(net.spec.input_dim);
    net.input_norm.apply(input, &mut cur);
    let mut next = Vec::new();
    let last = net.layers.len() - 1;
    for (i, layer) in net.layers.iter().enumerate() {
        layer.affine(&cur, &mut next);
        if i < last {
            relu(&mut next);
        }
        std::mem::swap(&mut cur, &mut next);
    }
    match net.spec.output_kind {
        OutputKind::Regression => {
            if let Some(scale) = net.target_scale {
                for (v, s) in cur.iter_mut().zip(scale.iter()) {
                    *v *= s;
                }
            }
        }
        OutputKind::Classification => softmax_in_place(&mut cur),
    }
    Ok(cur)
}

/// Convenience wrapper for the cursor engine: a 6-component compensated
/// gaze in, a screen position in pixels out.
pub fn predict_screen_px(net: &TrainedNet, features: &[f64; 6]) -> Result<[f64; 2]> {
    if net.spec.output_kind != OutputKind::Regression || net.spec.output_dim != 2 {
        return Err(Error::NotReady("network is not a two-output screen regressor".into()));
    }
    if net.target_scale.is_none() {
        return Err(Error::NotReady("network has not been trained on screen targets".into()));
    }
    let out = forward(net, features)?;
    Ok([out[0], out[1]])
}

/// Hyperparameters for [`train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    /// Regression stop gate: training loss must fall below this...
    pub loss_threshold: f64,
    /// ...while R² on the training split reaches this.
    pub r2_target: f64,
    /// Classification stop gate on the evaluation split.
    pub accuracy_target: f64,
    /// Screen dimensions used to scale regression targets into [0, 1]².
    pub screen: [f64; 2],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 5000,
            batch_size: 32,
            loss_threshold: 1e-3,
            r2_target: 0.99,
            accuracy_target: 0.90,
            screen: [800.0, 600.0],
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidParams("learning rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b.is_finite() && (0.0..1.0).contains(&b)) {
                return Err(Error::InvalidParams(format!("{name} must lie in [0, 1)")));
            }
        }
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::InvalidParams("epsilon must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidParams("batch size must be positive".into()));
        }
        if self.screen[0] <= 0.0 || self.screen[1] <= 0.0 {
            return Err(Error::InvalidParams("screen dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// Gradient of the loss with respect to one layer's parameters, laid out
/// exactly like [`Layer`].
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrads {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerGrads {
    fn zeros_like(layer: &Layer) -> Self {
        LayerGrads { weights: vec![0.0; layer.weights.len()], biases: vec![0.0; layer.biases.len()] }
    }

    fn scale(&mut self, s: f64) {
        for w in &mut self.weights {
            *w *= s;
        }
        for b in &mut self.biases {
            *b *= s;
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamOptimizer {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: u64,
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
}

impl AdamOptimizer {
    pub fn new(cfg: &TrainConfig, layers: &[Layer]) -> Self {
        AdamOptimizer {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
            m: layers.iter().map(LayerGrads::zeros_like).collect(),
            v: layers.iter().map(LayerGrads::zeros_like).collect(),
        }
    }

    /// Applies one update. `grads` must be mean gradients over the batch.
    pub fn step(&mut self, layers: &mut [Layer], grads: &[LayerGrads]) {
        self.t += 1;
        let t = self.t as f64;
        let corr1 = 1.0 - self.beta1.powf(t);
        let corr2 = 1.0 - self.beta2.powf(t);
        for (li, layer) in layers.iter_mut().enumerate() {
            let g = &grads[li];
            let m = &mut self.m[li];
            let v = &mut self.v[li];
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / corr1;
                let v_hat = *v / corr2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            };
            for i in 0..layer.weights.len() {
                update(&mut layer.weights[i], g.weights[i], &mut m.weights[i], &mut v.weights[i]);
            }
            for i in 0..layer.biases.len() {
                update(&mut layer.biases[i], g.biases[i], &mut m.biases[i], &mut v.biases[i]);
            }
        }
    }
}

/// Target rows in the space the loss is computed in.
enum LossTargets {
    Values(Vec<Vec<f64>>),
    Labels(Vec<usize>),
}

fn loss_targets(net: &TrainedNet, data: &CalibrationDataset) -> Result<LossTargets> {
    match (net.spec.output_kind, data.targets()) {
        (OutputKind::Regression, DatasetTargets::Screen(t)) => {
            let scale = net.target_scale.unwrap_or([1.0, 1.0]);
            if net.spec.output_dim != 2 {
                return Err(Error::InvalidParams(
                    "screen regression needs a two-output network".into(),
                ));
            }
            Ok(LossTargets::Values(
                t.iter().map(|p| vec![p[0] / scale[0], p[1] / scale[1]]).collect(),
            ))
        }
        (OutputKind::Classification, DatasetTargets::Block(labels)) => {
            for &l in labels {
                if l as usize >= net.spec.output_dim {
                    return Err(Error::InvalidInput(format!(
                        "label {l} outside the network's {} classes",
                        net.spec.output_dim
                    )));
                }
            }
            Ok(LossTargets::Labels(labels.iter().map(|&l| l as usize).collect()))
        }
        _ => Err(Error::InvalidInput(
            "dataset target kind does not match the network output kind".into(),
        )),
    }
}

struct ForwardScratch {
    /// Post-activation values per layer, starting with the normalised input.
    acts: Vec<Vec<f64>>,
}

impl ForwardScratch {
    fn new(net: &TrainedNet) -> Self {
        let mut acts = vec![Vec::new(); net.layers.len() + 1];
        for (i, d) in net.spec.dims().iter().enumerate() {
            acts[i].reserve(*d);
        }
        ForwardScratch { acts }
    }
}

/// Runs a standardised input through the network, keeping every layer's
/// post-activation output. The final layer stays in loss space: linear for
/// regression, softmax probabilities for classification.
fn forward_training(net: &TrainedNet, input: &[f64], scratch: &mut ForwardScratch) {
    net.input_norm.apply(input, &mut scratch.acts[0]);
    let last = net.layers.len() - 1;
    for i in 0..net.layers.len() {
        let (prev, rest) = scratch.acts.split_at_mut(i + 1);
        net.layers[i].affine(&prev[i], &mut rest[0]);
        if i < last {
            relu(&mut rest[0]);
        } else if net.spec.output_kind == OutputKind::Classification {
            softmax_in_place(&mut rest[0]);
        }
    }
}

fn sample_loss(kind: OutputKind, output: &[f64], target: &LossTargets, row: usize) -> f64 {
    match (kind, target) {
        (OutputKind::Regression, LossTargets::Values(t)) => {
            let t = &t[row];
            output.iter().zip(t).map(|(o, y)| (o - y) * (o - y)).sum::<f64>() / output.len() as f64
        }
        (OutputKind::Classification, LossTargets::Labels(l)) => {
            -(output[l[row]].max(1e-15)).ln()
        }
        _ => unreachable!("target kind checked at entry"),
    }
}

/// Derivative of the per-sample loss with respect to the output layer's
/// pre-activation. For MSE over a linear output that is `2 (o - y) / k`;
/// for softmax with cross-entropy it collapses to `p - onehot`.
fn output_delta(kind: OutputKind, output: &[f64], target: &LossTargets, row: usize, delta: &mut Vec<f64>) {
    delta.clear();
    match (kind, target) {
        (OutputKind::Regression, LossTargets::Values(t)) => {
            let t = &t[row];
            let k = output.len() as f64;
            for (o, y) in output.iter().zip(t) {
                delta.push(2.0 * (o - y) / k);
            }
        }
        (OutputKind::Classification, LossTargets::Labels(l)) => {
            delta.extend_from_slice(output);
            delta[l[row]] -= 1.0;
        }
        _ => unreachable!("target kind checked at entry"),
    }
}

fn accumulate_sample_grads(
    net: &TrainedNet,
    scratch: &ForwardScratch,
    mut delta: Vec<f64>,
    grads: &mut [LayerGrads],
) -> Vec<f64> {
    let mut next_delta = Vec::new();
    for li in (0..net.layers.len()).rev() {
        let layer = &net.layers[li];
        let input = &scratch.acts[li];
        let g = &mut grads[li];
        for o in 0..layer.out_dim {
            let d = delta[o];
            g.biases[o] += d;
            let row = &mut g.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (w, xi) in row.iter_mut().zip(input) {
                *w += d * xi;
            }
        }
        if li == 0 {
            break;
        }
        next_delta.clear();
        next_delta.resize(layer.in_dim, 0.0);
        for o in 0..layer.out_dim {
            let d = delta[o];
            let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            for (nd, w) in next_delta.iter_mut().zip(row) {
                *nd += d * w;
            }
        }
        // ReLU gate: units that were clamped pass no gradient.
        for (nd, a) in next_delta.iter_mut().zip(input) {
            if *a <= 0.0 {
                *nd = 0.0;
            }
        }
        std::mem::swap(&mut delta, &mut next_delta);
    }
    delta
}

/// Mean loss of the network on a dataset, in training space (scaled targets
/// for regression, cross-entropy for classification).
pub fn loss_on(net: &TrainedNet, data: &CalibrationDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData("loss over an empty dataset".into()));
    }
    check_dims(net, data)?;
    let targets = loss_targets(net, data)?;
    let mut scratch = ForwardScratch::new(net);
    let mut total = 0.0;
    for (row, input) in data.inputs().iter().enumerate() {
        forward_training(net, input, &mut scratch);
        total += sample_loss(net.spec.output_kind, scratch.acts.last().unwrap(), &targets, row);
    }
    Ok(total / data.len() as f64)
}

/// Mean full-batch gradient of [`loss_on`] with respect to every parameter.
pub fn loss_gradients(net: &TrainedNet, data: &CalibrationDataset) -> Result<Vec<LayerGrads>> {
    if data.is_empty() {
        return Err(Error::EmptyData("gradients over an empty dataset".into()));
    }
    check_dims(net, data)?;
    let targets = loss_targets(net, data)?;
    let mut grads: Vec<LayerGrads> = net.layers.iter().map(LayerGrads::zeros_like).collect();
    let mut scratch = ForwardScratch::new(net);
    let mut delta = Vec::new();
    for row in 0..data.len() {
        forward_training(net, &data.inputs()[row], &mut scratch);
        output_delta(net.spec.output_kind, scratch.acts.last().unwrap(), &targets, row, &mut delta);
        delta = accumulate_sample_grads(net, &scratch, delta, &mut grads);
    }
    let inv = 1.0 / data.len() as f64;
    for g in &mut grads {
        g.scale(inv);
    }
    Ok(grads)
}

fn check_dims(net: &TrainedNet, data: &CalibrationDataset) -> Result<()> {
    if data.input_dim() != net.spec.input_dim {
        return Err(Error::InvalidInput(format!(
            "dataset rows have {} components, network expects {}",
            data.input_dim(),
            net.spec.input_dim
        )));
    }
    Ok(())
}

/// Coefficient of determination, pooled over output components with
/// per-component means. Errors when the targets have no variance.
pub fn r_squared(preds: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    if preds.is_empty() || preds.len() != targets.len() {
        return Err(Error::InvalidInput("prediction and target row counts differ".into()));
    }
    let dim = targets[0].len();
    let n = targets.len() as f64;
    let mut means = vec![0.0; dim];
    for t in targets {
        for (m, v) in means.iter_mut().zip(t) {
            *m += v;
        }
    }
    for m in &mut means {
        *m /= n;
    }
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        for k in 0..dim {
            ss_res += (p[k] - t[k]) * (p[k] - t[k]);
            ss_tot += (t[k] - means[k]) * (t[k] - means[k]);
        }
    }
    if ss_tot == 0.0 {
        return Err(Error::Undefined("R² needs targets with non-zero variance".into()));
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// Fraction of rows whose argmax class matches the label. Ties resolve to
/// the lowest class index.
pub fn evaluate_classifier(net: &TrainedNet, data: &CalibrationDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyData("accuracy over an empty dataset".into()));
    }
    check_dims(net, data)?;
    let labels = match data.targets() {
        DatasetTargets::Block(l) => l,
        DatasetTargets::Screen(_) => {
            return Err(Error::InvalidInput("accuracy needs block labels".into()))
        }
    };
    let mut hits = 0usize;
    for (input, &label) in data.inputs().iter().zip(labels) {
        let probs = forward(net, input)?;
        let mut best = 0usize;
        for (i, p) in probs.iter().enumerate() {
            if *p > probs[best] {
                best = i;
            }
        }
        if best == label as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Trains the network with minibatch Adam.
///
/// Inputs reach the first layer through whatever normaliser the network
/// already carries (identity for a freshly initialised one; gaze direction
/// components are bounded and share a scale, and centring them costs the
/// regressor its accuracy between the calibration points). `eval` supplies
/// the held-out split the classification stop gate is measured on (falling
/// back to the training data when absent). With `max_epochs == 0` the
/// network comes back untouched and the report flags the epoch cap.
pub fn train(
    mut net: TrainedNet,
    data: &CalibrationDataset,
    eval: Option<&CalibrationDataset>,
    cfg: &TrainConfig,
) -> Result<TrainedNet> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData("training needs at least one row".into()));
    }
    check_dims(&net, data)?;
    if let Some(e) = eval {
        check_dims(&net, e)?;
    }
    let started = std::time::Instant::now();

    if cfg.max_epochs == 0 {
        let final_loss = loss_on(&net, data)?;
        net.report = Some(TrainReport {
            epochs: 0,
            final_loss,
            r_squared: None,
            accuracy: None,
            stop: StopRule::EpochCap,
            wall_ms: started.elapsed().as_millis(),
        });
        return Ok(net);
    }

    if net.spec.output_kind == OutputKind::Regression {
        net.target_scale = Some(cfg.screen);
    }
    let targets = loss_targets(&net, data)?;

    let mut optimizer = AdamOptimizer::new(cfg, &net.layers);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut scratch = ForwardScratch::new(&net);
    let mut grads: Vec<LayerGrads> = net.layers.iter().map(LayerGrads::zeros_like).collect();
    let mut delta = Vec::new();

    let mut epochs_run = 0usize;
    let mut stop = StopRule::EpochCap;
    let mut last_loss = f64::NAN;
    let mut last_r2 = None;
    let mut last_acc = None;

    use rand::seq::SliceRandom;
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            for g in &mut grads {
                g.scale(0.0);
            }
            for &row in batch {
                forward_training(&net, &data.inputs()[row], &mut scratch);
                output_delta(
                    net.spec.output_kind,
                    scratch.acts.last().unwrap(),
                    &targets,
                    row,
                    &mut delta,
                );
                delta = accumulate_sample_grads(&net, &scratch, delta, &mut grads);
            }
            let inv = 1.0 / batch.len() as f64;
            for g in &mut grads {
                g.scale(inv);
            }
            optimizer.step(&mut net.layers, &grads);
        }

        epochs_run = epoch;
        last_loss = loss_on(&net, data)?;
        if !last_loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch });
        }
        match net.spec.output_kind {
            OutputKind::Regression => {
                if last_loss < cfg.loss_threshold {
                    let r2 = training_r2(&net, data)?;
                    last_r2 = Some(r2);
                    if r2 >= cfg.r2_target {
                        stop = StopRule::LossAndR2;
                        break;
                    }
                }
            }
            OutputKind::Classification => {
                let acc = evaluate_classifier(&net, eval.unwrap_or(data))?;
                last_acc = Some(acc);
                if acc >= cfg.accuracy_target {
                    stop = StopRule::Accuracy;
                    break;
                }
            }
        }
    }

    if stop == StopRule::EpochCap && net.spec.output_kind == OutputKind::Regression {
        last_r2 = Some(training_r2(&net, data)?);
    }
    net.report = Some(TrainReport {
        epochs: epochs_run,
        final_loss: last_loss,
        r_squared: last_r2,
        accuracy: last_acc,
        stop,
        wall_ms: started.elapsed().as_millis(),
    });
    Ok(net)
}

fn training_r2(net: &TrainedNet, data: &CalibrationDataset) -> Result<f64> {
    let scale = net.target_scale.unwrap_or([1.0, 1.0]);
    let targets: Vec<Vec<f64>> = match data.targets() {
        DatasetTargets::Screen(t) => {
            t.iter().map(|p| vec![p[0] / scale[0], p[1] / scale[1]]).collect()
        }
        DatasetTargets::Block(_) => {
            return Err(Error::InvalidInput("R² is a regression metric".into()))
        }
    };
    let mut scratch = ForwardScratch::new(net);
    let mut preds = Vec::with_capacity(data.len());
    for input in data.inputs() {
        forward_training(net, input, &mut scratch);
        preds.push(scratch.acts.last().unwrap().clone());
    }
    r_squared(&preds, &targets)
}
