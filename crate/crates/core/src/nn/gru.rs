//! Gated recurrent unit with hand-derived backpropagation through time.
//!
//! Gates, per row of a batch:
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! h~ = tanh(W_h x + U_h (r ⊙ h) + b_h)
//! h' = (1 - z) ⊙ h + z ⊙ h~
//! ```
//!
//! The three gate blocks are stacked row-wise in `w`, `u` and `b` in the
//! order z, r, h.

use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::{sigmoid, xavier_bound};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// `3H × input_dim`
    pub w: Array2<f64>,
    /// `3H × H`
    pub u: Array2<f64>,
    /// `3H`
    pub b: Array1<f64>,
}

/// Everything one step needs to run backwards.
#[derive(Debug, Clone)]
pub struct GruStepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    candidate: Array2<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        GruParams {
            w: Array2::zeros((3 * hidden, input_dim)),
            u: Array2::zeros((3 * hidden, hidden)),
            b: Array1::zeros(3 * hidden),
        }
    }

    /// Xavier-uniform matrices, zero biases.
    pub fn init<R: Rng>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let bw = xavier_bound(input_dim, hidden);
        let bu = xavier_bound(hidden, hidden);
        GruParams {
            w: Array2::from_shape_fn((3 * hidden, input_dim), |_| rng.gen_range(-bw..=bw)),
            u: Array2::from_shape_fn((3 * hidden, hidden), |_| rng.gen_range(-bu..=bu)),
            b: Array1::zeros(3 * hidden),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.u.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    fn gate(&self, g: usize) -> (ArrayView2<'_, f64>, ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let h = self.hidden();
        let rows = g * h..(g + 1) * h;
        (self.w.slice(s![rows.clone(), ..]), self.u.slice(s![rows.clone(), ..]), self.b.slice(s![rows]))
    }

    /// One batched step: `x` is `B × input`, `h` is `B × H`.
    pub fn step(&self, x: ArrayView2<f64>, h: ArrayView2<f64>) -> (Array2<f64>, GruStepCache) {
        let (wz, uz, bz) = self.gate(0);
        let (wr, ur, br) = self.gate(1);
        let (wh, uh, bh) = self.gate(2);
        let z = (x.dot(&wz.t()) + h.dot(&uz.t()) + bz).mapv(sigmoid);
        let r = (x.dot(&wr.t()) + h.dot(&ur.t()) + br).mapv(sigmoid);
        let rh = &r * &h;
        let candidate = (x.dot(&wh.t()) + rh.dot(&uh.t()) + bh).mapv(f64::tanh);
        let h_next = &h + &(&z * &(&candidate - &h));
        let cache = GruStepCache { x: x.to_owned(), h_prev: h.to_owned(), z, r, candidate };
        (h_next, cache)
    }

    /// Backward through one step. Accumulates into `grads` and returns
    /// `(dL/dx, dL/dh_prev)`.
    pub fn step_backward(
        &self,
        cache: &GruStepCache,
        dh_next: ArrayView2<f64>,
        grads: &mut GruParams,
    ) -> (Array2<f64>, Array2<f64>) {
        let hid = self.hidden();
        let GruStepCache { x, h_prev, z, r, candidate } = cache;
        let (_, uz, _) = self.gate(0);
        let (_, ur, _) = self.gate(1);
        let (_, uh, _) = self.gate(2);

        let dz = &dh_next * &(candidate - h_prev);
        let dcand = &dh_next * z;
        let mut dh_prev = &dh_next * &z.mapv(|v| 1.0 - v);

        let da_h = &dcand * &candidate.mapv(|c| 1.0 - c * c);
        let rh = r * h_prev;
        let d_rh = da_h.dot(&uh);
        let dr = &d_rh * h_prev;
        dh_prev += &(&d_rh * r);

        let da_z = &dz * &z.mapv(|v| v * (1.0 - v));
        let da_r = &dr * &r.mapv(|v| v * (1.0 - v));
        dh_prev += &da_z.dot(&uz);
        dh_prev += &da_r.dot(&ur);

        {
            let mut gu = grads.u.slice_mut(s![0..hid, ..]);
            gu += &da_z.t().dot(h_prev);
        }
        {
            let mut gu = grads.u.slice_mut(s![hid..2 * hid, ..]);
            gu += &da_r.t().dot(h_prev);
        }
        {
            let mut gu = grads.u.slice_mut(s![2 * hid..3 * hid, ..]);
            gu += &da_h.t().dot(&rh);
        }
        let da = concatenate(Axis(1), &[da_z.view(), da_r.view(), da_h.view()]).expect("gate blocks share batch size");
        grads.w += &da.t().dot(x);
        grads.b += &da.sum_axis(Axis(0));
        let dx = da.dot(&self.w);
        (dx, dh_prev)
    }

    /// Runs a batched sequence (time-major list of `B × input`) from `h0`.
    pub fn forward_seq(&self, xs: &[Array2<f64>], h0: ArrayView2<f64>) -> (Vec<Array2<f64>>, Vec<GruStepCache>) {
        let mut h = h0.to_owned();
        let mut states = Vec::with_capacity(xs.len());
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (next, cache) = self.step(x.view(), h.view());
            states.push(next.clone());
            caches.push(cache);
            h = next;
        }
        (states, caches)
    }

    /// Backpropagation through time. `d_states[t]` is the upstream gradient on
    /// the state emitted at step `t` (zeros when unused). Returns per-step input
    /// gradients and the gradient on `h0`.
    pub fn backward_seq(
        &self,
        caches: &[GruStepCache],
        d_states: &[Array2<f64>],
        grads: &mut GruParams,
    ) -> (Vec<Array2<f64>>, Array2<f64>) {
        assert_eq!(caches.len(), d_states.len());
        let n = caches.len();
        let mut dxs = vec![Array2::zeros((0, 0)); n];
        let mut carry: Option<Array2<f64>> = None;
        for t in (0..n).rev() {
            let mut dh = d_states[t].clone();
            if let Some(c) = &carry {
                dh += c;
            }
            let (dx, dh_prev) = self.step_backward(&caches[t], dh.view(), grads);
            dxs[t] = dx;
            carry = Some(dh_prev);
        }
        let dh0 = carry.unwrap_or_else(|| Array2::zeros((0, self.hidden())));
        (dxs, dh0)
    }

    fn check_dims(&self, input: usize, hidden: usize) -> Result<()> {
        if input != self.input_dim() || hidden != self.hidden() {
            return Err(Error::Dimension(format!(
                "GRU expects input {} / hidden {}, got {input} / {hidden}",
                self.input_dim(),
                self.hidden()
            )));
        }
        Ok(())
    }
}

fn as_row(v: ArrayView1<f64>) -> ArrayView2<f64> {
    v.insert_axis(Axis(0))
}

/// Single-sequence, single-step convenience.
pub fn gru_step(p: &GruParams, x: ArrayView1<f64>, h_prev: ArrayView1<f64>) -> Result<Array1<f64>> {
    p.check_dims(x.len(), h_prev.len())?;
    let (h, _) = p.step(as_row(x), as_row(h_prev));
    Ok(h.row(0).to_owned())
}

/// Runs `seq` (`n × input`) from `h0`, returning every hidden state (`n × H`).
pub fn gru_forward(p: &GruParams, seq: ArrayView2<f64>, h0: ArrayView1<f64>) -> Result<Array2<f64>> {
    p.check_dims(seq.ncols(), h0.len())?;
    if seq.nrows() == 0 {
        return Err(Error::Dimension("empty sequence".into()));
    }
    let mut out = Array2::zeros((seq.nrows(), p.hidden()));
    let mut h = h0.to_owned();
    for (t, x) in seq.rows().into_iter().enumerate() {
        let (next, _) = p.step(as_row(x), as_row(h.view()));
        h = next.row(0).to_owned();
        out.row_mut(t).assign(&h);
    }
    Ok(out)
}

/// Row `t` is `[forward state at t ; backward state at t]`, the backward
/// direction reading the sequence reversed. Both start from zero.
pub fn bigru_forward(fwd: &GruParams, bwd: &GruParams, seq: ArrayView2<f64>) -> Result<Array2<f64>> {
    if fwd.input_dim() != bwd.input_dim() || fwd.hidden() != bwd.hidden() {
        return Err(Error::Dimension("BiGRU directions disagree on shape".into()));
    }
    let hid = fwd.hidden();
    let n = seq.nrows();
    let f = gru_forward(fwd, seq, Array1::zeros(hid).view())?;
    let reversed = seq.slice(s![..;-1, ..]);
    let b = gru_forward(bwd, reversed, Array1::zeros(hid).view())?;
    let mut out = Array2::zeros((n, 2 * hid));
    out.slice_mut(s![.., ..hid]).assign(&f);
    out.slice_mut(s![.., hid..]).assign(&b.slice(s![..;-1, ..]));
    Ok(out)
}
