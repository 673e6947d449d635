use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::Mode;
use crate::error::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
/// Weight kept on the old running statistic per training batch.
pub const BN_MOMENTUM: f64 = 0.99;

/// Trainable scale and shift.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl RunningStats {
    pub fn new(dim: usize) -> Self {
        RunningStats { mean: Array1::zeros(dim), var: Array1::ones(dim) }
    }
}

#[derive(Debug, Clone)]
pub struct BatchNormCache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
    train: bool,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm { gamma: Array1::ones(dim), beta: Array1::zeros(dim) }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(
        &self,
        x: ArrayView2<f64>,
        stats: &mut RunningStats,
        mode: Mode,
    ) -> Result<(Array2<f64>, BatchNormCache)> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension(format!("batch norm over {} features got {}", self.dim(), x.ncols())));
        }
        let (mean, var, train) = match mode {
            Mode::Train => {
                if x.nrows() < 2 {
                    return Err(Error::InvalidArgument(
                        "batch normalization needs at least 2 rows in training mode".into(),
                    ));
                }
                let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
                let var = x.var_axis(Axis(0), 0.0);
                stats.mean = &stats.mean * BN_MOMENTUM + &mean * (1.0 - BN_MOMENTUM);
                stats.var = &stats.var * BN_MOMENTUM + &var * (1.0 - BN_MOMENTUM);
                (mean, var, true)
            }
            Mode::Infer => (stats.mean.clone(), stats.var.clone(), false),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPSILON).sqrt());
        let normalized = (&x - &mean) * &inv_std;
        let y = &normalized * &self.gamma + &self.beta;
        Ok((y, BatchNormCache { normalized, inv_std, train }))
    }

    /// Accumulates `dγ`, `dβ` into `grads` and returns `dL/dx`.
    pub fn backward(&self, cache: &BatchNormCache, d_out: ArrayView2<f64>, grads: &mut BatchNorm) -> Array2<f64> {
        let xhat = &cache.normalized;
        grads.gamma += &(&d_out * xhat).sum_axis(Axis(0));
        grads.beta += &d_out.sum_axis(Axis(0));
        let dxhat = &d_out * &self.gamma;
        if !cache.train {
            return dxhat * &cache.inv_std;
        }
        let n = d_out.nrows() as f64;
        let sum_dxhat = dxhat.sum_axis(Axis(0));
        let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
        let inner = &dxhat * n - &sum_dxhat - &(xhat * &sum_dxhat_xhat);
        inner * &(&cache.inv_std / n)
    }
}

/// Free-function form over explicit parameters and statistics.
pub fn batch_norm_forward(
    x: ArrayView2<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
    stats: &mut RunningStats,
    mode: Mode,
) -> Result<Array2<f64>> {
    let bn = BatchNorm { gamma: gamma.clone(), beta: beta.clone() };
    bn.forward(x, stats, mode).map(|(y, _)| y)
}
