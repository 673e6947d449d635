//! Batched forward and backward passes through the captioner.
//!
//! ```text
//! [x ; e] ─ BiGRU(h1) ─ BN ─ drop ─ BiGRU(h2) ─ drop ─────────────┐ X'
//! partial ─ embed ─ GRU(hl) over the front-padded sequence ─ last ┤ C'
//!                                 [X' ; C'] ─ GRU(hd) ─ drop ─ dense ─ softmax
//! ```
//!
//! The acoustic input is a single timestep, so each BiGRU direction runs one
//! step from a zero state. The decoder GRU also runs one step from zero.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::nn::{dropout_mask, softmax_rows, BatchNormCache, GruStepCache, Mode, RunningStats, CE_EPSILON};
use crate::text::{PAD_ID, SOS_ID};

/// Dropout masks are drawn from this seed, in a fixed order, so repeated
/// training-mode passes with the same seed see identical masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Train { dropout_seed: u64 },
    Infer,
}

impl Pass {
    fn mode(self) -> Mode {
        match self {
            Pass::Train { .. } => Mode::Train,
            Pass::Infer => Mode::Infer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardCache {
    ac1: [GruStepCache; 2],
    bn: BatchNormCache,
    mask1: Option<Array2<f64>>,
    ac2: [GruStepCache; 2],
    mask2: Option<Array2<f64>>,
    tokens: Array2<usize>,
    ling: Vec<GruStepCache>,
    dec: GruStepCache,
    mask3: Option<Array2<f64>>,
    dec_out: Array2<f64>,
    pub probs: Array2<f64>,
}

fn apply_mask(x: Array2<f64>, mask: &Option<Array2<f64>>) -> Array2<f64> {
    match mask {
        Some(m) => x * m,
        None => x,
    }
}

fn zeros(rows: usize, cols: usize) -> Array2<f64> {
    Array2::zeros((rows, cols))
}

fn check_tokens(tokens: ArrayView2<usize>, vocab: usize) -> Result<()> {
    if tokens.ncols() == 0 {
        return Err(Error::Dimension("partial captions have zero length".into()));
    }
    if let Some(&t) = tokens.iter().find(|&&t| t >= vocab) {
        return Err(Error::InvalidArgument(format!("token id {t} outside vocabulary of {vocab}")));
    }
    Ok(())
}

/// Encoder output plus what backward needs: both BiGRU caches, the batch
/// norm cache and the two dropout masks.
type AcousticParts =
    (Array2<f64>, [GruStepCache; 2], BatchNormCache, Option<Array2<f64>>, [GruStepCache; 2], Option<Array2<f64>>);

/// Acoustic encoder: `B × (F+K)` → `B × 2h2`.
fn acoustic(
    p: &ModelParams,
    c: &ModelConfig,
    a: ArrayView2<f64>,
    stats: &mut RunningStats,
    pass: Pass,
    rng: &mut Option<ChaCha8Rng>,
) -> Result<AcousticParts> {
    if a.ncols() != c.acoustic_input_dim() {
        return Err(Error::Dimension(format!(
            "acoustic input has {} columns, model expects {}",
            a.ncols(),
            c.acoustic_input_dim()
        )));
    }
    let b = a.nrows();
    let mut mask = |cols: usize| rng.as_mut().map(|r| dropout_mask(b, cols, c.dropout, r));

    let h1 = c.bigru1_cells;
    let (f1, cf1) = p.ac1_fwd.step(a, zeros(b, h1).view());
    let (b1, cb1) = p.ac1_bwd.step(a, zeros(b, h1).view());
    let joined = concatenate(Axis(1), &[f1.view(), b1.view()]).expect("same batch");
    let (normed, bn) = p.bn.forward(joined.view(), stats, pass.mode())?;
    let mask1 = mask(2 * h1);
    let d1 = apply_mask(normed, &mask1);

    let h2 = c.bigru2_cells;
    let (f2, cf2) = p.ac2_fwd.step(d1.view(), zeros(b, h2).view());
    let (b2, cb2) = p.ac2_bwd.step(d1.view(), zeros(b, h2).view());
    let joined = concatenate(Axis(1), &[f2.view(), b2.view()]).expect("same batch");
    let mask2 = mask(2 * h2);
    Ok((apply_mask(joined, &mask2), [cf1, cb1], bn, mask1, [cf2, cb2], mask2))
}

/// Linguistic encoder: final GRU state over the embedded token rows.
fn linguistic(p: &ModelParams, c: &ModelConfig, tokens: ArrayView2<usize>) -> (Array2<f64>, Vec<GruStepCache>) {
    let b = tokens.nrows();
    let xs: Vec<Array2<f64>> =
        tokens.columns().into_iter().map(|col| p.embedding.select(Axis(0), &col.to_vec())).collect();
    let (states, caches) = p.ling.forward_seq(&xs, zeros(b, c.ling_gru_cells).view());
    (states.last().expect("non-empty sequence").clone(), caches)
}

/// Full forward pass. `acoustic_in` is `B × (F+K)`; `tokens` is `B × L`
/// with every row front-padded to the same length.
pub fn forward(
    p: &ModelParams,
    c: &ModelConfig,
    stats: &mut RunningStats,
    acoustic_in: ArrayView2<f64>,
    tokens: ArrayView2<usize>,
    pass: Pass,
) -> Result<ForwardCache> {
    if acoustic_in.nrows() != tokens.nrows() || tokens.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "batch has {} acoustic rows and {} token rows",
            acoustic_in.nrows(),
            tokens.nrows()
        )));
    }
    check_tokens(tokens, c.vocab_size)?;
    let mut rng = match pass {
        Pass::Train { dropout_seed } if c.dropout > 0.0 => Some(ChaCha8Rng::seed_from_u64(dropout_seed)),
        _ => None,
    };
    let (x_enc, ac1, bn, mask1, ac2, mask2) = acoustic(p, c, acoustic_in, stats, pass, &mut rng)?;
    let (c_enc, ling) = linguistic(p, c, tokens);
    let b = tokens.nrows();
    let cat = concatenate(Axis(1), &[x_enc.view(), c_enc.view()]).expect("same batch");
    let (hd, dec) = p.dec.step(cat.view(), zeros(b, c.dec_gru_cells).view());
    let mask3 = rng.as_mut().map(|r| dropout_mask(b, c.dec_gru_cells, c.dropout, r));
    let dec_out = apply_mask(hd, &mask3);
    let logits = p.out.forward(dec_out.view());
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(ForwardCache {
        ac1,
        bn,
        mask1,
        ac2,
        mask2,
        tokens: tokens.to_owned(),
        ling,
        dec,
        mask3,
        dec_out,
        probs: softmax_rows(logits.view()),
    })
}

/// Mean cross-entropy over the batch.
pub fn batch_loss(probs: &Array2<f64>, targets: &[usize]) -> f64 {
    targets.iter().enumerate().map(|(i, &t)| -(probs[[i, t]] + CE_EPSILON).ln()).sum::<f64>() / targets.len() as f64
}

/// Gradients of the mean cross-entropy with respect to every parameter,
/// including the `<pad>` embedding row (callers pin it separately).
pub fn backward(p: &ModelParams, c: &ModelConfig, cache: &ForwardCache, targets: &[usize]) -> Result<ModelParams> {
    let b = cache.probs.nrows();
    if targets.len() != b {
        return Err(Error::Dimension(format!("{} targets for a batch of {b}", targets.len())));
    }
    if let Some(&t) = targets.iter().find(|&&t| t >= c.vocab_size) {
        return Err(Error::InvalidArgument(format!("target {t} outside vocabulary")));
    }
    let mut g = ModelParams::zeros(c);

    let mut d_logits = cache.probs.clone();
    for (i, &t) in targets.iter().enumerate() {
        d_logits[[i, t]] -= 1.0;
    }
    d_logits /= b as f64;

    let d_dec_out = p.out.backward(cache.dec_out.view(), d_logits.view(), &mut g.out);
    let d_hd = apply_mask(d_dec_out, &cache.mask3);
    let (d_cat, _) = p.dec.step_backward(&cache.dec, d_hd.view(), &mut g.dec);
    let xw = c.acoustic_encoding_dim();
    let d_x_enc = d_cat.slice(s![.., ..xw]).to_owned();
    let d_c_enc = d_cat.slice(s![.., xw..]).to_owned();

    // linguistic branch
    let steps = cache.ling.len();
    let mut d_states = vec![zeros(b, c.ling_gru_cells); steps];
    d_states[steps - 1] = d_c_enc;
    let (d_xs, _) = p.ling.backward_seq(&cache.ling, &d_states, &mut g.ling);
    for (t, dx) in d_xs.iter().enumerate() {
        for (i, row) in dx.rows().into_iter().enumerate() {
            let tok = cache.tokens[[i, t]];
            let mut target = g.embedding.row_mut(tok);
            target += &row;
        }
    }

    // acoustic branch
    let h2 = c.bigru2_cells;
    let d_joined2 = apply_mask(d_x_enc, &cache.mask2);
    let (dxf, _) = p.ac2_fwd.step_backward(&cache.ac2[0], d_joined2.slice(s![.., ..h2]), &mut g.ac2_fwd);
    let (dxb, _) = p.ac2_bwd.step_backward(&cache.ac2[1], d_joined2.slice(s![.., h2..]), &mut g.ac2_bwd);
    let d_normed = apply_mask(dxf + dxb, &cache.mask1);
    let d_joined1 = p.bn.backward(&cache.bn, d_normed.view(), &mut g.bn);
    let h1 = c.bigru1_cells;
    p.ac1_fwd.step_backward(&cache.ac1[0], d_joined1.slice(s![.., ..h1]), &mut g.ac1_fwd);
    p.ac1_bwd.step_backward(&cache.ac1[1], d_joined1.slice(s![.., h1..]), &mut g.ac1_bwd);
    Ok(g)
}

/// Left-pads `partial` with `<pad>` to `len`. The partial must start with
/// `<sos>` and fit.
pub fn front_pad(partial: &[usize], len: usize) -> Result<Vec<usize>> {
    if partial.first() != Some(&SOS_ID) {
        return Err(Error::InvalidArgument("partial caption must start with <sos>".into()));
    }
    if partial.len() > len {
        return Err(Error::InvalidArgument(format!(
            "partial caption of {} tokens exceeds padded length {len}",
            partial.len()
        )));
    }
    let mut out = vec![PAD_ID; len - partial.len()];
    out.extend_from_slice(partial);
    Ok(out)
}
