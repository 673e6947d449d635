//! Central finite-difference verification of analytic gradients.

use std::fmt;

use super::ParamSet;

/// Denominator floor so that two vanishing gradients compare as equal.
const REL_FLOOR: f64 = 1e-8;

/// `|a - n| / max(|a|, |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    pub fn failures(&self) -> Vec<&TensorCheck> {
        self.tensors.iter().filter(|t| !t.passed).collect()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for t in &self.tensors {
            writeln!(
                f,
                "{:<6} {:<28} n={:<7} max_rel={:.3e} at {}",
                if t.passed { "ok" } else { "FAIL" },
                t.name,
                t.entries,
                t.max_rel_error,
                t.worst_index
            )?;
        }
        Ok(())
    }
}

/// Compares `analytic` against `(L(θ+h) - L(θ-h)) / 2h` for every entry of
/// every tensor in `params`.
pub fn gradient_check<P, F>(params: &P, analytic: &P, mut loss: F, step: f64, tolerance: f64) -> GradCheckReport
where
    P: ParamSet + Clone,
    F: FnMut(&P) -> f64,
{
    let names = params.names();
    let grads: Vec<Vec<f64>> = analytic.slices().iter().map(|s| s.to_vec()).collect();
    let mut probe = params.clone();
    let mut tensors = Vec::with_capacity(names.len());
    for (ti, name) in names.into_iter().enumerate() {
        let n = grads[ti].len();
        let mut worst = (0.0, 0);
        for j in 0..n {
            let orig = probe.slices()[ti][j];
            probe.slices_mut()[ti][j] = orig + step;
            let plus = loss(&probe);
            probe.slices_mut()[ti][j] = orig - step;
            let minus = loss(&probe);
            probe.slices_mut()[ti][j] = orig;
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grads[ti][j], numeric);
            if err > worst.0 || err.is_nan() {
                worst = (err, j);
            }
        }
        tensors.push(TensorCheck {
            name,
            entries: n,
            max_rel_error: worst.0,
            worst_index: worst.1,
            passed: worst.0 < tolerance,
        });
    }
    GradCheckReport { tolerance, tensors }
}
