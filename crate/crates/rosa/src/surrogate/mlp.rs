//! From-scratch multilayer perceptron surrogate: ReLU hidden layers, per-OC
//! output links (logistic for probabilities, affine otherwise), trained with
//! minibatch gradient descent using adaptive per-parameter step sizes, an
//! internal holdout split and best-snapshot early stopping.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::RosaError;
use crate::mc::TrainingSet;
use crate::model::{OcKind, OcSchema, OcVector, ParameterSpace, Scenario};
use crate::rng::substream;
use crate::surrogate::Surrogate;
use crate::Result;

const STREAM_INIT: u64 = 0x494e4954;
const STREAM_SHUFFLE: u64 = 0x53485546;
const STREAM_ENSEMBLE: u64 = 0x454e534d;

/// Training hyperparameters. The validation gate, not these, is the
/// acceptance arbiter; defaults are conventional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub holdout_frac: f64,
    /// Decoupled weight decay (biases exempt); regularizes fits on noisy
    /// Monte Carlo targets.
    pub weight_decay: f64,
    /// Exponential moving average of the weights (0 disables). The EMA net
    /// is what is monitored and returned; it smooths over minibatch noise.
    pub ema_decay: f64,
    /// Geometric per-epoch learning-rate decay toward this final value.
    pub learning_rate_final: Option<f64>,
    /// Number of prediction-averaged members (1 = single network).
    pub ensemble: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![8, 64, 64],
            max_epochs: 2000,
            batch_size: 32,
            learning_rate: 0.005,
            patience: 100,
            holdout_frac: 0.1,
            weight_decay: 0.0,
            ema_decay: 0.0,
            learning_rate_final: None,
            ensemble: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Link {
    /// Prediction = sigmoid(raw); guarantees [0, 1].
    Logistic,
    /// Prediction = offset + scale * raw.
    Affine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Head {
    link: Link,
    offset: f64,
    scale: f64,
    /// Multiplier on this output's squared residual. Affine targets are
    /// already range-normalized; logistic targets are weighted by the
    /// inverse squared target range so narrow probability OCs contribute
    /// comparable gradients in multi-OC fits.
    #[serde(default = "unit_weight")]
    loss_weight: f64,
}

fn unit_weight() -> f64 {
    1.0
}

impl Head {
    fn apply(&self, raw: f64) -> f64 {
        match self.link {
            Link::Logistic => sigmoid(raw),
            Link::Affine => self.offset + self.scale * raw,
        }
    }

    /// Map an observed OC value to the training target in raw space; for the
    /// logistic link training compares in prediction space instead.
    fn target(&self, y: f64) -> f64 {
        match self.link {
            Link::Logistic => y,
            Link::Affine => {
                if self.scale > 0.0 {
                    (y - self.offset) / self.scale
                } else {
                    0.0
                }
            }
        }
    }

    /// Residual and d(residual^2)/d(raw) for one output.
    fn residual_and_grad(&self, raw: f64, target: f64) -> (f64, f64) {
        match self.link {
            Link::Logistic => {
                let p = sigmoid(raw);
                let res = p - target;
                (res, 2.0 * res * p * (1.0 - p))
            }
            Link::Affine => {
                let res = raw - target;
                (res, 2.0 * res)
            }
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dense layer, weights row-major (out x in).
#[derive(Debug, Clone, Serialize, Deserialize)]
struct Layer {
    weights: Vec<f64>,
    biases: Vec<f64>,
    inputs: usize,
    outputs: usize,
}

impl Layer {
    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
            out.push(z);
        }
    }
}

/// Record of how the model was fitted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_train_loss: f64,
    pub best_holdout_loss: f64,
    pub seed: u64,
}

/// Fitted MLP surrogate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    space: ParameterSpace,
    schema: OcSchema,
    widths: Vec<usize>,
    layers: Vec<Layer>,
    heads: Vec<Head>,
    input_lo: Vec<f64>,
    input_hi: Vec<f64>,
    /// Additional ensemble members; predictions average over all nets.
    #[serde(default)]
    extra_members: Vec<Vec<Layer>>,
    pub record: TrainingRecord,
}

impl Mlp {
    /// Fit on Monte Carlo training estimates.
    ///
    /// Rows are canonically ordered before the seed-driven shuffle, so
    /// permuting the input rows does not change the fitted model. With
    /// `cfg.ensemble > 1`, independently initialized members are trained on
    /// the same data and predictions are averaged; the averaging cancels a
    /// large part of the fit variance on noisy targets.
    pub fn fit(
        train: &TrainingSet,
        space: &ParameterSpace,
        schema: &OcSchema,
        cfg: &MlpConfig,
        seed: u64,
    ) -> Result<Self> {
        let mut model = Self::fit_single(train, space, schema, cfg, seed)?;
        for member in 1..cfg.ensemble.max(1) as u64 {
            let member_seed = substream(seed, &[STREAM_ENSEMBLE, member]).gen::<u64>();
            let peer = Self::fit_single(train, space, schema, cfg, member_seed)?;
            model.extra_members.push(peer.layers);
        }
        Ok(model)
    }

    fn fit_single(
        train: &TrainingSet,
        space: &ParameterSpace,
        schema: &OcSchema,
        cfg: &MlpConfig,
        seed: u64,
    ) -> Result<Self> {
        let n = train.len();
        if n < 10 {
            return Err(RosaError::Training(format!("insufficient data: {n} training rows")));
        }
        let d = space.dim();
        let r = schema.r();

        let heads: Vec<Head> = (0..r)
            .map(|oc| {
                let lo = train.oc_means.iter().map(|v| v.values[oc]).fold(f64::INFINITY, f64::min);
                let hi = train
                    .oc_means
                    .iter()
                    .map(|v| v.values[oc])
                    .fold(f64::NEG_INFINITY, f64::max);
                match schema.kinds[oc] {
                    OcKind::Probability => Head {
                        link: Link::Logistic,
                        offset: 0.0,
                        scale: 1.0,
                        // Range capped below so a near-constant OC cannot
                        // swamp the objective.
                        loss_weight: 1.0 / (hi - lo).clamp(0.05, 1.0).powi(2),
                    },
                    _ => Head {
                        link: Link::Affine,
                        offset: lo,
                        scale: hi - lo,
                        loss_weight: 1.0,
                    },
                }
            })
            .collect();

        let input_lo = space.lower().to_vec();
        let input_hi = space.upper().to_vec();
        let scale_input = |theta: &[f64]| -> Vec<f64> {
            theta
                .iter()
                .enumerate()
                .map(|(i, v)| (v - input_lo[i]) / (input_hi[i] - input_lo[i]))
                .collect()
        };

        // Canonical order, then seed-driven shuffle and holdout split.
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            train.scenarios[a]
                .theta
                .partial_cmp(&train.scenarios[b].theta)
                .expect("finite scenario coordinates")
        });
        let mut rng = substream(seed, &[STREAM_SHUFFLE]);
        order.shuffle(&mut rng);
        let holdout_n = ((n as f64 * cfg.holdout_frac) as usize).min(n / 2);
        let (train_idx, holdout_idx) = order.split_at(n - holdout_n);

        let xs: Vec<Vec<f64>> = train.scenarios.iter().map(|s| scale_input(&s.theta)).collect();
        let ts: Vec<Vec<f64>> = train
            .oc_means
            .iter()
            .map(|v| v.values.iter().zip(&heads).map(|(&y, h)| h.target(y)).collect())
            .collect();

        let mut widths = vec![d];
        widths.extend(&cfg.hidden);
        widths.push(r);
        let mut net = Net::random(&widths, seed);
        let mut optimizer = Adam::new(&net, cfg.learning_rate, cfg.weight_decay);

        let mut best = net.clone();
        let mut best_loss = f64::INFINITY;
        let mut best_epoch = 0;
        let mut since_best = 0;
        let mut train_loss = f64::INFINITY;
        let mut epochs_run = 0;

        let mut ema = net.clone();
        let mut batch_order: Vec<usize> = train_idx.to_vec();
        for epoch in 0..cfg.max_epochs {
            epochs_run = epoch + 1;
            if let Some(lr_final) = cfg.learning_rate_final {
                let frac = epoch as f64 / (cfg.max_epochs - 1).max(1) as f64;
                optimizer.lr = cfg.learning_rate * (lr_final / cfg.learning_rate).powf(frac);
            }
            let mut rng = substream(seed, &[STREAM_SHUFFLE, 1 + epoch as u64]);
            batch_order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in batch_order.chunks(cfg.batch_size) {
                let loss = net.train_batch(batch, &xs, &ts, &heads, &mut optimizer);
                if !loss.is_finite() {
                    return Err(RosaError::Training(format!(
                        "non-finite loss at epoch {epoch}"
                    )));
                }
                if cfg.ema_decay > 0.0 {
                    ema.blend_from(&net, cfg.ema_decay);
                }
                epoch_loss += loss * batch.len() as f64;
            }
            train_loss = epoch_loss / train_idx.len() as f64;

            let monitor_net = if cfg.ema_decay > 0.0 { &ema } else { &net };
            let monitor_idx = if holdout_idx.is_empty() { train_idx } else { holdout_idx };
            let monitored = monitor_net.mean_loss(monitor_idx, &xs, &ts, &heads);
            if monitored < best_loss {
                best_loss = monitored;
                best = monitor_net.clone();
                best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > cfg.patience {
                    break;
                }
            }
        }

        Ok(Mlp {
            space: space.clone(),
            schema: schema.clone(),
            widths,
            layers: best.layers,
            heads,
            input_lo,
            input_hi,
            extra_members: Vec::new(),
            record: TrainingRecord {
                epochs_run,
                best_epoch,
                final_train_loss: train_loss,
                best_holdout_loss: best_loss,
                seed,
            },
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    fn forward_net(&self, layers: &[Layer], theta: &[f64], scratch: &mut Scratch) -> Vec<f64> {
        scratch.a.clear();
        scratch.a.extend(theta.iter().enumerate().map(|(i, v)| {
            (v - self.input_lo[i]) / (self.input_hi[i] - self.input_lo[i])
        }));
        for (li, layer) in layers.iter().enumerate() {
            layer.forward(&scratch.a, &mut scratch.b);
            std::mem::swap(&mut scratch.a, &mut scratch.b);
            if li + 1 < layers.len() {
                for v in scratch.a.iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        scratch.a.iter().zip(&self.heads).map(|(&raw, h)| h.apply(raw)).collect()
    }

    fn forward_point(&self, theta: &[f64], scratch: &mut Scratch) -> Vec<f64> {
        let mut out = self.forward_net(&self.layers, theta, scratch);
        if !self.extra_members.is_empty() {
            for member in &self.extra_members {
                let peer = self.forward_net(member, theta, scratch);
                for (o, p) in out.iter_mut().zip(peer) {
                    *o += p;
                }
            }
            let n = (1 + self.extra_members.len()) as f64;
            for o in out.iter_mut() {
                *o /= n;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }
}

#[derive(Default)]
struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Surrogate for Mlp {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn schema(&self) -> &OcSchema {
        &self.schema
    }

    fn predict_batch(&self, thetas: &[Scenario]) -> Result<Vec<OcVector>> {
        for s in thetas {
            if s.dim() != self.space.dim() {
                return Err(RosaError::DimensionMismatch {
                    expected: self.space.dim(),
                    got: s.dim(),
                });
            }
        }
        Ok(thetas
            .par_iter()
            .map_init(Scratch::default, |scratch, s| {
                OcVector::new(self.forward_point(&s.theta, scratch))
            })
            .collect())
    }

    fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(self).expect("serializable model"));
        hex_digest(hasher)
    }
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Trainable network state; the fitted `Mlp` keeps only the best snapshot.
#[derive(Clone)]
struct Net {
    layers: Vec<Layer>,
}

impl Net {
    fn random(widths: &[usize], seed: u64) -> Self {
        let mut layers = Vec::new();
        for (li, pair) in widths.windows(2).enumerate() {
            let (inputs, outputs) = (pair[0], pair[1]);
            let mut rng = substream(seed, &[STREAM_INIT, li as u64]);
            // He initialization for the ReLU stack.
            let sd = (2.0 / inputs as f64).sqrt();
            let weights = (0..inputs * outputs)
                .map(|_| {
                    let u: f64 = rng.gen();
                    crate::designs::std_normal_quantile(u.clamp(1e-12, 1.0 - 1e-12)) * sd
                })
                .collect();
            layers.push(Layer {
                weights,
                biases: vec![0.0; outputs],
                inputs,
                outputs,
            });
        }
        Self { layers }
    }

    /// EMA update: self = decay * self + (1 - decay) * other.
    fn blend_from(&mut self, other: &Net, decay: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (w, v) in a.weights.iter_mut().zip(&b.weights) {
                *w = decay * *w + (1.0 - decay) * v;
            }
            for (w, v) in a.biases.iter_mut().zip(&b.biases) {
                *w = decay * *w + (1.0 - decay) * v;
            }
        }
    }

    /// Forward pass returning post-activation values per layer (the last
    /// entry holds raw outputs).
    fn forward(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (li, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.forward(acts.last().unwrap(), &mut z);
            if li + 1 < self.layers.len() {
                for v in z.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared loss in head space over the indexed rows.
    fn mean_loss(&self, idx: &[usize], xs: &[Vec<f64>], ts: &[Vec<f64>], heads: &[Head]) -> f64 {
        let mut total = 0.0;
        for &i in idx {
            let acts = self.forward(&xs[i]);
            let raw = acts.last().unwrap();
            for (o, head) in heads.iter().enumerate() {
                let (res, _) = head.residual_and_grad(raw[o], ts[i][o]);
                total += head.loss_weight * res * res;
            }
        }
        total / (idx.len() * heads.len()) as f64
    }

    /// One gradient step on a minibatch; returns the batch loss.
    fn train_batch(
        &mut self,
        batch: &[usize],
        xs: &[Vec<f64>],
        ts: &[Vec<f64>],
        heads: &[Head],
        optimizer: &mut Adam,
    ) -> f64 {
        let grads = self.batch_gradients(batch, xs, ts, heads);
        let loss = grads.loss;
        optimizer.step(&mut self.layers, &grads);
        loss
    }

    fn batch_gradients(
        &self,
        batch: &[usize],
        xs: &[Vec<f64>],
        ts: &[Vec<f64>],
        heads: &[Head],
    ) -> Gradients {
        let mut grads = Gradients::zeros(&self.layers);
        let norm = 1.0 / (batch.len() * heads.len()) as f64;
        let mut loss = 0.0;
        for &i in batch {
            let acts = self.forward(&xs[i]);
            let raw = acts.last().unwrap();
            // Output delta in raw space.
            let mut delta: Vec<f64> = raw
                .iter()
                .zip(heads)
                .enumerate()
                .map(|(o, (&z, head))| {
                    let (res, g) = head.residual_and_grad(z, ts[i][o]);
                    loss += head.loss_weight * res * res * norm;
                    head.loss_weight * g * norm
                })
                .collect();
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let gw = &mut grads.weights[li];
                let gb = &mut grads.biases[li];
                for o in 0..layer.outputs {
                    let d = delta[o];
                    gb[o] += d;
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, v) in row.iter_mut().zip(input) {
                        *g += d * v;
                    }
                }
                if li > 0 {
                    let mut prev = vec![0.0; layer.inputs];
                    for o in 0..layer.outputs {
                        let d = delta[o];
                        let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += d * w;
                        }
                    }
                    // ReLU gate on the previous layer's activations.
                    for (p, &a) in prev.iter_mut().zip(&acts[li]) {
                        if a <= 0.0 {
                            *p = 0.0;
                        }
                    }
                    delta = prev;
                }
            }
        }
        grads.loss = loss;
        grads
    }
}

struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    loss: f64,
}

impl Gradients {
    fn zeros(layers: &[Layer]) -> Self {
        Self {
            weights: layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            loss: 0.0,
        }
    }
}

/// Adam: adaptive per-parameter step sizes.
struct Adam {
    lr: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m_w: Vec<Vec<f64>>,
    v_w: Vec<Vec<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
}

impl Adam {
    fn new(net: &Net, lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m_w: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_w: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_b: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_b: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    fn step(&mut self, layers: &mut [Layer], grads: &Gradients) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for li in 0..layers.len() {
            // Decoupled decay on weights only.
            if self.weight_decay > 0.0 {
                for w in layers[li].weights.iter_mut() {
                    *w -= self.lr * self.weight_decay * *w;
                }
            }
            Self::update(
                &mut layers[li].weights,
                &grads.weights[li],
                &mut self.m_w[li],
                &mut self.v_w[li],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
            Self::update(
                &mut layers[li].biases,
                &grads.biases[li],
                &mut self.m_b[li],
                &mut self.v_b[li],
                self.lr,
                self.beta1,
                self.beta2,
                self.eps,
                bc1,
                bc2,
            );
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn update(
        params: &mut [f64],
        grads: &[f64],
        m: &mut [f64],
        v: &mut [f64],
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        bc1: f64,
        bc2: f64,
    ) {
        for i in 0..params.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

/// Compare backpropagated gradients against central finite differences
/// (step 1e-5) on `n_probes` randomly chosen parameters; returns the
/// maximum relative error.
pub fn gradient_check(
    mlp: &Mlp,
    probes: &[(Scenario, OcVector)],
    n_probes: usize,
    seed: u64,
) -> f64 {
    gradient_check_with_step(mlp, probes, n_probes, seed, 1e-5)
}

/// Gradient check with an explicit finite-difference step.
pub fn gradient_check_with_step(
    mlp: &Mlp,
    probes: &[(Scenario, OcVector)],
    n_probes: usize,
    seed: u64,
    step: f64,
) -> f64 {
    let xs: Vec<Vec<f64>> = probes
        .iter()
        .map(|(s, _)| {
            s.theta
                .iter()
                .enumerate()
                .map(|(i, v)| (v - mlp.input_lo[i]) / (mlp.input_hi[i] - mlp.input_lo[i]))
                .collect()
        })
        .collect();
    let ts: Vec<Vec<f64>> = probes
        .iter()
        .map(|(_, y)| y.values.iter().zip(&mlp.heads).map(|(&v, h)| h.target(v)).collect())
        .collect();
    let batch: Vec<usize> = (0..probes.len()).collect();

    let mut net = Net { layers: mlp.layers.clone() };
    let analytic = net.batch_gradients(&batch, &xs, &ts, &mlp.heads);

    let mut rng = substream(seed, &[0x47524144]);
    let mut max_rel = 0.0f64;
    for _ in 0..n_probes {
        let li = rng.gen_range(0..net.layers.len());
        let wi = rng.gen_range(0..net.layers[li].weights.len());
        let orig = net.layers[li].weights[wi];
        net.layers[li].weights[wi] = orig + step;
        let plus = net.mean_loss(&batch, &xs, &ts, &mlp.heads) * mlp.heads.len() as f64;
        net.layers[li].weights[wi] = orig - step;
        let minus = net.mean_loss(&batch, &xs, &ts, &mlp.heads) * mlp.heads.len() as f64;
        net.layers[li].weights[wi] = orig;
        // mean_loss normalizes by rows * heads; batch_gradients by the same,
        // so scale both to the per-row total before comparing.
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.weights[li][wi] * (batch.len() * mlp.heads.len()) as f64
            / batch.len() as f64
            * 1.0;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OcKind;
    use rand::Rng;

    fn toy_space(d: usize) -> ParameterSpace {
        ParameterSpace::new(
            (0..d).map(|i| format!("x{i}")).collect(),
            vec![0.0; d],
            vec![1.0; d],
        )
        .unwrap()
    }

    fn toy_training(n: usize, f: impl Fn(&[f64]) -> Vec<f64>, r: usize, seed: u64) -> TrainingSet {
        let mut rng = substream(seed, &[1]);
        let scenarios: Vec<Scenario> = (0..n)
            .map(|_| Scenario::new(vec![rng.gen::<f64>(), rng.gen::<f64>()]))
            .collect();
        let oc_means = scenarios.iter().map(|s| OcVector::new(f(&s.theta))).collect();
        TrainingSet { scenarios, oc_means, reps: 1, mc_se: vec![vec![0.0; r]; n] }
    }

    fn prob_schema() -> OcSchema {
        OcSchema::new(vec!["p".into()], vec![OcKind::Probability])
    }

    #[test]
    fn fits_smooth_probability_surface() {
        let space = toy_space(2);
        let train = toy_training(
            300,
            |x| vec![sigmoid(3.0 * (x[0] - 0.5) + 2.0 * (x[1] - 0.5))],
            1,
            2,
        );
        let cfg = MlpConfig { max_epochs: 400, patience: 60, ..Default::default() };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 1).unwrap();
        let preds = model.predict_batch(&train.scenarios).unwrap();
        let mse: f64 = preds
            .iter()
            .zip(&train.oc_means)
            .map(|(p, t)| (p.values[0] - t.values[0]).powi(2))
            .sum::<f64>()
            / train.len() as f64;
        assert!(mse < 1e-3, "training mse {mse}");
    }

    #[test]
    fn probability_predictions_stay_in_unit_interval() {
        let space = toy_space(2);
        let train = toy_training(100, |x| vec![x[0].clamp(0.0, 1.0)], 1, 3);
        let cfg = MlpConfig { max_epochs: 50, ..Default::default() };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 1).unwrap();
        let mut rng = substream(8, &[0]);
        let wild: Vec<Scenario> = (0..200)
            .map(|_| Scenario::new(vec![rng.gen::<f64>() * 2.0 - 0.5, rng.gen::<f64>()]))
            .collect();
        for p in model.predict_batch(&wild).unwrap() {
            assert!((0.0..=1.0).contains(&p.values[0]));
        }
    }

    #[test]
    fn fit_is_deterministic_and_permutation_invariant() {
        let space = toy_space(2);
        let train = toy_training(120, |x| vec![x[0] * x[1]], 1, 4);
        let cfg = MlpConfig { max_epochs: 30, ..Default::default() };
        let a = Mlp::fit(&train, &space, &prob_schema(), &cfg, 9).unwrap();
        let b = Mlp::fit(&train, &space, &prob_schema(), &cfg, 9).unwrap();
        assert_eq!(a.digest(), b.digest());

        // Reverse the row order: canonical sorting must make this a no-op.
        let mut reversed = train.clone();
        reversed.scenarios.reverse();
        reversed.oc_means.reverse();
        reversed.mc_se.reverse();
        let c = Mlp::fit(&reversed, &space, &prob_schema(), &cfg, 9).unwrap();
        assert_eq!(a.digest(), c.digest());
    }

    #[test]
    fn constant_target_predicts_constant() {
        let space = toy_space(2);
        let schema = OcSchema::new(vec!["n".into()], vec![OcKind::Count]);
        let train = toy_training(80, |_| vec![150.0], 1, 5);
        let cfg = MlpConfig { max_epochs: 20, ..Default::default() };
        let model = Mlp::fit(&train, &space, &schema, &cfg, 2).unwrap();
        let mut rng = substream(10, &[0]);
        let points: Vec<Scenario> =
            (0..50).map(|_| Scenario::new(vec![rng.gen(), rng.gen()])).collect();
        for p in model.predict_batch(&points).unwrap() {
            assert_eq!(p.values[0], 150.0);
        }
    }

    #[test]
    fn batch_equals_single_point_calls() {
        let space = toy_space(2);
        let train = toy_training(100, |x| vec![x[0]], 1, 6);
        let cfg = MlpConfig { max_epochs: 20, ..Default::default() };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 3).unwrap();
        let batch = model.predict_batch(&train.scenarios).unwrap();
        for (s, b) in train.scenarios.iter().zip(&batch) {
            assert_eq!(model.predict(s).unwrap(), *b);
        }
    }

    #[test]
    fn insufficient_data_is_an_error() {
        let space = toy_space(2);
        let train = toy_training(5, |x| vec![x[0]], 1, 7);
        let err = Mlp::fit(&train, &space, &prob_schema(), &MlpConfig::default(), 1).unwrap_err();
        assert!(matches!(err, RosaError::Training(_)));
    }

    #[test]
    fn json_round_trip_preserves_predictions() {
        let space = toy_space(2);
        let train = toy_training(100, |x| vec![x[0] + 0.1], 1, 8);
        let cfg = MlpConfig { max_epochs: 20, ..Default::default() };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 4).unwrap();
        let restored = Mlp::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(
            model.predict_batch(&train.scenarios).unwrap(),
            restored.predict_batch(&train.scenarios).unwrap()
        );
    }

    #[test]
    fn gradients_match_finite_differences() {
        let space = toy_space(2);
        let train = toy_training(60, |x| vec![sigmoid(x[0] - x[1])], 1, 9);
        let cfg = MlpConfig { max_epochs: 5, ..Default::default() };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 5).unwrap();
        let probes: Vec<(Scenario, OcVector)> = train
            .scenarios
            .iter()
            .take(16)
            .zip(&train.oc_means)
            .map(|(s, y)| (s.clone(), y.clone()))
            .collect();
        let err = gradient_check(&model, &probes, 120, 11);
        assert!(err < 1e-4, "max relative gradient error {err}");
    }

    #[test]
    fn gradient_check_small_at_multiple_steps() {
        let space = toy_space(2);
        let schema = OcSchema::new(vec!["n".into()], vec![OcKind::Count]);
        let train = toy_training(60, |x| vec![100.0 + 40.0 * x[0] * x[1]], 1, 10);
        let cfg = MlpConfig { max_epochs: 5, ..Default::default() };
        let model = Mlp::fit(&train, &space, &schema, &cfg, 6).unwrap();
        let probes: Vec<(Scenario, OcVector)> = train
            .scenarios
            .iter()
            .take(8)
            .zip(&train.oc_means)
            .map(|(s, y)| (s.clone(), y.clone()))
            .collect();
        // The loss is near-quadratic in any single weight, so central
        // differences are accurate at both step sizes; roundoff keeps the
        // fine step from strictly improving on the coarse one.
        let coarse = gradient_check_with_step(&model, &probes, 60, 12, 1e-3);
        let fine = gradient_check_with_step(&model, &probes, 60, 12, 1e-5);
        assert!(coarse < 1e-4, "coarse step max relative error {coarse}");
        assert!(fine < 1e-4, "fine step max relative error {fine}");
    }

    #[test]
    fn ensemble_averages_member_predictions() {
        let space = toy_space(2);
        let train = toy_training(120, |x| vec![sigmoid(x[0] + x[1] - 1.0)], 1, 13);
        let base = MlpConfig { max_epochs: 30, ..Default::default() };
        let members: Vec<Mlp> = std::iter::once(Mlp::fit(&train, &space, &prob_schema(), &base, 9).unwrap())
            .chain((1..3u64).map(|m| {
                let seed = substream(9, &[STREAM_ENSEMBLE, m]).gen::<u64>();
                Mlp::fit(&train, &space, &prob_schema(), &base, seed).unwrap()
            }))
            .collect();
        let cfg = MlpConfig { ensemble: 3, ..base };
        let model = Mlp::fit(&train, &space, &prob_schema(), &cfg, 9).unwrap();
        let preds = model.predict_batch(&train.scenarios).unwrap();
        let by_member: Vec<_> =
            members.iter().map(|m| m.predict_batch(&train.scenarios).unwrap()).collect();
        for (i, p) in preds.iter().enumerate() {
            let mean =
                by_member.iter().map(|b| b[i].values[0]).sum::<f64>() / members.len() as f64;
            assert!((p.values[0] - mean).abs() < 1e-12);
        }
        // Members genuinely differ (distinct init streams).
        assert_ne!(by_member[0], by_member[1]);
        // And the ensemble round-trips through JSON with its members intact.
        let restored = Mlp::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(preds, restored.predict_batch(&train.scenarios).unwrap());
    }
}
