//! Dense feedforward networks: the fitness substrate for both pruning phases.
//!
//! Weights of layer `k` are stored as an `inputs × outputs` row-major
//! [`Tensor2`]. The canonical flattening of the prunable weight universe is
//! layer order, then row-major inside each layer; every [`BitMask`] and
//! importance vector in the crate follows it.

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use train::{fine_tune, train, TrainConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::mask::BitMask;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Tensor2 {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("tensor dimensions must be positive, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} tensor needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(format!("non-finite tensor value {v}")));
        }
        Ok(Tensor2 { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor2 {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Stacks equal-width rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Tensor2::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// New tensor holding the given rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Tensor2 {
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Tensor2 {
            rows: idx.len(),
            cols: self.cols,
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub name: String,
    pub weights: Tensor2,
    pub bias: Vec<f64>,
    pub prunable: bool,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weights.cols()
    }

    pub fn nonzero_count(&self) -> usize {
        self.weights.values().iter().filter(|w| **w != 0.0).count()
    }

    /// Fraction of exactly-zero weights, `1 - nonzero / |W|`.
    pub fn sparsity(&self) -> f64 {
        1.0 - self.nonzero_count() as f64 / self.weights.values().len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    activation: Activation,
}

impl Network {
    pub fn new(layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidSpec(format!(
                "a network needs at least 2 layers, got {}",
                layers.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::Shape(format!(
                    "layer `{}` outputs {} but `{}` expects {}",
                    pair[0].name,
                    pair[0].outputs(),
                    pair[1].name,
                    pair[1].inputs()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.outputs() {
                return Err(Error::Shape(format!("layer `{}` bias length {} != {}", l.name, l.bias.len(), l.outputs())));
            }
            if layers[..i].iter().any(|o| o.name == l.name) {
                return Err(Error::InvalidSpec(format!("duplicate layer name `{}`", l.name)));
            }
            if l.bias.iter().any(|b| !b.is_finite()) {
                return Err(Error::InvalidSpec(format!("non-finite bias in `{}`", l.name)));
            }
        }
        Ok(Network { layers, activation })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(Layer::outputs));
        w
    }

    pub fn layer(&self, name: &str) -> Option<&Layer> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn set_prunable(&mut self, name: &str, prunable: bool) -> Result<()> {
        let layer = self
            .layers
            .iter_mut()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::InvalidSpec(format!("no layer named `{name}`")))?;
        layer.prunable = prunable;
        Ok(())
    }

    pub fn prunable_layers(&self) -> impl Iterator<Item = &Layer> {
        self.layers.iter().filter(|l| l.prunable)
    }

    /// Total number of prunable weight slots, zero or not.
    pub fn prunable_size(&self) -> usize {
        self.prunable_layers().map(|l| l.weights.values().len()).sum()
    }

    /// `(min, max)` over all prunable weights.
    pub fn prunable_range(&self) -> Option<(f64, f64)> {
        self.prunable_layers()
            .flat_map(|l| l.weights.values().iter().copied())
            .fold(None, |acc, w| match acc {
                None => Some((w, w)),
                Some((lo, hi)) => Some((lo.min(w), hi.max(w))),
            })
    }

    /// Count of strictly nonzero weights over prunable layers; biases excluded.
    pub fn nonzero_count(&self) -> usize {
        self.prunable_layers().map(Layer::nonzero_count).sum()
    }

    /// Logits for each row of `batch`. Rows are computed independently.
    pub fn forward(&self, batch: &Tensor2) -> Result<Tensor2> {
        if batch.cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "batch has {} columns, network expects {}",
                batch.cols(),
                self.input_width()
            )));
        }
        let out_w = self.output_width();
        let mut out = Vec::with_capacity(batch.rows() * out_w);
        let mut scratch = Vec::new();
        for r in 0..batch.rows() {
            let logits = self.forward_row(batch.row(r), &mut scratch);
            out.extend_from_slice(&logits);
        }
        Ok(Tensor2 {
            rows: batch.rows(),
            cols: out_w,
            values: out,
        })
    }

    fn forward_row(&self, input: &[f64], scratch: &mut Vec<f64>) -> Vec<f64> {
        let mut act = input.to_vec();
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            dense_row(layer, &act, scratch);
            if k != last {
                match self.activation {
                    Activation::Relu => scratch.iter_mut().for_each(|v| *v = v.max(0.0)),
                }
            }
            std::mem::swap(&mut act, scratch);
        }
        act
    }

    /// Fraction of rows whose argmax logit equals the label; ties go to the
    /// lowest class index.
    pub fn accuracy(&self, data: &LabeledSet) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        if data.features().cols() != self.input_width() {
            return Err(Error::Shape(format!(
                "dataset has {} features, network expects {}",
                data.features().cols(),
                self.input_width()
            )));
        }
        let mut scratch = Vec::new();
        let correct = (0..data.len())
            .filter(|&r| argmax(&self.forward_row(data.features().row(r), &mut scratch)) == data.labels()[r])
            .count();
        Ok(correct as f64 / data.len() as f64)
    }

    /// Copy with every prunable weight `w` satisfying `th1 <= w <= th2` zeroed.
    pub fn apply_threshold(&self, th1: f64, th2: f64) -> Result<Network> {
        if th1.is_nan() || th2.is_nan() || th1 > th2 {
            return Err(Error::InvalidInterval { th1, th2 });
        }
        let mut out = self.clone();
        for layer in out.layers.iter_mut().filter(|l| l.prunable) {
            for w in layer.weights.values_mut() {
                if th1 <= *w && *w <= th2 {
                    *w = 0.0;
                }
            }
        }
        Ok(out)
    }

    /// Copy where the j-th nonzero prunable weight (canonical order) is zeroed
    /// iff bit j of `mask` is 0.
    pub fn apply_mask(&self, mask: &BitMask) -> Result<Network> {
        let expected = self.nonzero_count();
        if mask.len() != expected {
            return Err(Error::Shape(format!(
                "mask has {} bits, network has {} nonzero prunable weights",
                mask.len(),
                expected
            )));
        }
        let mut out = self.clone();
        let mut j = 0;
        for layer in out.layers.iter_mut().filter(|l| l.prunable) {
            for w in layer.weights.values_mut() {
                if *w != 0.0 {
                    if !mask.get(j) {
                        *w = 0.0;
                    }
                    j += 1;
                }
            }
        }
        Ok(out)
    }
}

fn dense_row(layer: &Layer, input: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend_from_slice(&layer.bias);
    let cols = layer.outputs();
    let w = layer.weights.values();
    for (i, &x) in input.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        let row = &w[i * cols..(i + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += x * wv;
        }
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate().skip(1) {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Randomly initialized network. Weights are uniform in `±sqrt(6 / fan_in)`,
/// biases zero, layers named `fc0, fc1, ...`; the first layer is not prunable.
pub fn init_network(widths: &[usize], seed: u64) -> Result<Network> {
    if widths.len() < 3 {
        return Err(Error::InvalidSpec(format!(
            "need at least 3 widths (2 layers), got {}",
            widths.len()
        )));
    }
    if widths.contains(&0) {
        return Err(Error::InvalidSpec("layer widths must be positive".into()));
    }
    let mut rng = rng::stream(seed, "init", &[]);
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for (k, pair) in widths.windows(2).enumerate() {
        let (fan_in, fan_out) = (pair[0], pair[1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        let values = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        layers.push(Layer {
            name: format!("fc{k}"),
            weights: Tensor2::new(fan_in, fan_out, values)?,
            bias: vec![0.0; fan_out],
            prunable: k != 0,
        });
    }
    Network::new(layers, Activation::Relu)
}
