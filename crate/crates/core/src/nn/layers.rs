use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::xavier_bound;
use crate::error::{Error, Result};

/// Negative-slope coefficient (the Keras default).
pub const LEAKY_ALPHA: f64 = 0.3;
/// Added to the target probability before the logarithm.
pub const CE_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Linear,
    LeakyRelu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

pub fn leaky_relu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_ALPHA * v
    }
}

pub fn leaky_relu_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        LEAKY_ALPHA
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Dense {
    pub fn zeros(input: usize, output: usize) -> Self {
        Dense { w: Array2::zeros((output, input)), b: Array1::zeros(output) }
    }

    pub fn init<R: Rng>(input: usize, output: usize, rng: &mut R) -> Self {
        let bound = xavier_bound(input, output);
        Dense { w: Array2::from_shape_fn((output, input), |_| rng.gen_range(-bound..=bound)), b: Array1::zeros(output) }
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    /// Batched pre-activation `x Wᵀ + b`.
    pub fn forward(&self, x: ArrayView2<f64>) -> Array2<f64> {
        x.dot(&self.w.t()) + &self.b
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&self, x: ArrayView2<f64>, d_out: ArrayView2<f64>, grads: &mut Dense) -> Array2<f64> {
        grads.w += &d_out.t().dot(&x);
        grads.b += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.w)
    }
}

/// `act(W x + b)` for a single vector.
pub fn dense_forward(
    w: ArrayView2<f64>,
    b: ArrayView1<f64>,
    x: ArrayView1<f64>,
    act: Activation,
) -> Result<Array1<f64>> {
    if w.ncols() != x.len() || w.nrows() != b.len() {
        return Err(Error::Dimension(format!(
            "dense {}×{} with bias {} applied to input {}",
            w.nrows(),
            w.ncols(),
            b.len(),
            x.len()
        )));
    }
    let y = w.dot(&x) + b;
    Ok(match act {
        Activation::Linear => y,
        Activation::LeakyRelu => y.mapv(leaky_relu),
    })
}

pub fn softmax(logits: ArrayView1<f64>) -> Result<Array1<f64>> {
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let e = logits.mapv(|v| (v - max).exp());
    let sum = e.sum();
    Ok(e / sum)
}

/// Row-wise max-shifted softmax; logits must be finite.
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

pub fn cross_entropy(probs: ArrayView1<f64>, target: usize) -> Result<f64> {
    let p = probs
        .get(target)
        .ok_or_else(|| Error::InvalidArgument(format!("target {target} out of range {}", probs.len())))?;
    Ok(-(p + CE_EPSILON).ln())
}

/// Inverted-dropout mask: survivors carry `1/(1-rate)`, dropped entries 0.
pub fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_fn((rows, cols), |_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

pub fn dropout(x: ArrayView2<f64>, rate: f64, seed: u64, mode: Mode) -> Result<Array2<f64>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("dropout rate {rate} not in [0,1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(x.to_owned());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(&x * &dropout_mask(x.nrows(), x.ncols(), rate, &mut rng))
}
