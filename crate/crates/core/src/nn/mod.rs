//! Small hand-differentiated neural building blocks.

mod adam;
mod batchnorm;
mod gradcheck;
mod gru;
mod layers;

pub use adam::{Adam, AdamConfig};
pub use batchnorm::{batch_norm_forward, BatchNorm, BatchNormCache, RunningStats, BN_EPSILON, BN_MOMENTUM};
pub use gradcheck::{gradient_check, relative_error, GradCheckReport, TensorCheck};
pub use gru::{bigru_forward, gru_forward, gru_step, GruParams, GruStepCache};
pub use layers::{
    cross_entropy, dense_forward, dropout, dropout_mask, leaky_relu, leaky_relu_grad, softmax, softmax_rows,
    Activation, Dense, Mode, CE_EPSILON, LEAKY_ALPHA,
};

/// Named flat views over a collection of trainable tensors.
pub trait ParamSet {
    fn names(&self) -> Vec<String>;
    fn slices(&self) -> Vec<&[f64]>;
    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn xavier_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
