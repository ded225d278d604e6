//! Mini-batch Adam on softmax cross-entropy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Activation, Network};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            learning_rate: 1e-4,
            batch_size: 32,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::InvalidSpec("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidSpec("learning_rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidSpec("batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.epsilon <= 0.0 {
            return Err(Error::InvalidSpec("Adam moments need beta in [0,1) and epsilon > 0".into()));
        }
        Ok(())
    }
}

/// Trains a copy of `net`. Pure in `(net, data, cfg)`.
pub fn train(net: &Network, data: &LabeledSet, cfg: &TrainConfig) -> Result<Network> {
    run(net, data, cfg, false)
}

/// Like [`train`], but prunable weights that are exactly zero stay zero.
pub fn fine_tune(net: &Network, data: &LabeledSet, cfg: &TrainConfig) -> Result<Network> {
    run(net, data, cfg, true)
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Moments {
    fn new(n: usize) -> Self {
        Moments {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

fn run(net: &Network, data: &LabeledSet, cfg: &TrainConfig, freeze_zeros: bool) -> Result<Network> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.features().cols() != net.input_width() {
        return Err(Error::Shape(format!(
            "dataset has {} features, network expects {}",
            data.features().cols(),
            net.input_width()
        )));
    }
    if data.classes() > net.output_width() {
        return Err(Error::Shape(format!(
            "{} classes but only {} outputs",
            data.classes(),
            net.output_width()
        )));
    }

    let mut net = net.clone();
    let frozen: Vec<Option<Vec<bool>>> = net
        .layers()
        .iter()
        .map(|l| (freeze_zeros && l.prunable).then(|| l.weights.values().iter().map(|w| *w == 0.0).collect()))
        .collect();
    let mut w_mom: Vec<Moments> = net.layers().iter().map(|l| Moments::new(l.weights.values().len())).collect();
    let mut b_mom: Vec<Moments> = net.layers().iter().map(|l| Moments::new(l.bias.len())).collect();

    let n_layers = net.layers().len();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = rng::stream(cfg.seed, "train", &[]);
    let mut step = 0i32;

    let mut grad_w: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.weights.values().len()]).collect();
    let mut grad_b: Vec<Vec<f64>> = net.layers().iter().map(|l| vec![0.0; l.bias.len()]).collect();

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad_w.iter_mut().for_each(|g| g.fill(0.0));
            grad_b.iter_mut().for_each(|g| g.fill(0.0));
            let scale = 1.0 / batch.len() as f64;

            for &r in batch {
                // acts[k] = input of layer k; acts[n_layers] = logits
                let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
                acts.push(data.features().row(r).to_vec());
                for (k, layer) in net.layers().iter().enumerate() {
                    let mut out = Vec::new();
                    super::dense_row(layer, &acts[k], &mut out);
                    if k + 1 != n_layers {
                        match net.activation() {
                            Activation::Relu => out.iter_mut().for_each(|v| *v = v.max(0.0)),
                        }
                    }
                    acts.push(out);
                }

                let mut delta = softmax(&acts[n_layers]);
                delta[data.labels()[r]] -= 1.0;
                delta.iter_mut().for_each(|d| *d *= scale);

                for k in (0..n_layers).rev() {
                    let layer = &net.layers()[k];
                    let cols = layer.outputs();
                    let input = &acts[k];
                    for (i, &x) in input.iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        let g = &mut grad_w[k][i * cols..(i + 1) * cols];
                        for (gv, d) in g.iter_mut().zip(&delta) {
                            *gv += x * d;
                        }
                    }
                    for (gb, d) in grad_b[k].iter_mut().zip(&delta) {
                        *gb += d;
                    }
                    if k > 0 {
                        let w = layer.weights.values();
                        let prev: Vec<f64> = (0..layer.inputs())
                            .map(|i| {
                                if input[i] <= 0.0 {
                                    return 0.0;
                                }
                                w[i * cols..(i + 1) * cols].iter().zip(&delta).map(|(a, b)| a * b).sum()
                            })
                            .collect();
                        delta = prev;
                    }
                }
            }

            step += 1;
            let bc1 = 1.0 - cfg.beta1.powi(step);
            let bc2 = 1.0 - cfg.beta2.powi(step);
            for k in 0..n_layers {
                let layer = &mut net.layers_mut()[k];
                adam_step(
                    layer.weights.values_mut(),
                    &grad_w[k],
                    &mut w_mom[k],
                    frozen[k].as_deref(),
                    cfg,
                    bc1,
                    bc2,
                );
                adam_step(&mut layer.bias, &grad_b[k], &mut b_mom[k], None, cfg, bc1, bc2);
            }
        }
    }
    Ok(net)
}

fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    mom: &mut Moments,
    frozen: Option<&[bool]>,
    cfg: &TrainConfig,
    bc1: f64,
    bc2: f64,
) {
    for j in 0..params.len() {
        if frozen.is_some_and(|f| f[j]) {
            continue;
        }
        let g = grads[j];
        mom.m[j] = cfg.beta1 * mom.m[j] + (1.0 - cfg.beta1) * g;
        mom.v[j] = cfg.beta2 * mom.v[j] + (1.0 - cfg.beta2) * g * g;
        let m_hat = mom.m[j] / bc1;
        let v_hat = mom.v[j] / bc2;
        params[j] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
