use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};

use super::network::{forward, front_pad, Pass};
use super::params::Captioner;
use crate::error::{Error, Result};
use crate::nn::softmax;
use crate::text::{WordVocabulary, EOS_ID, SOS_ID};

fn row(v: ArrayView1<f64>) -> Array2<f64> {
    v.insert_axis(Axis(0)).to_owned()
}

/// `X'` for one clip in inference mode. `input` is `features ⊕ events`.
pub fn encode_acoustic(model: &Captioner, input: ArrayView1<f64>) -> Result<Array1<f64>> {
    let c = &model.config;
    let p = &model.params;
    if input.len() != c.acoustic_input_dim() {
        return Err(Error::Dimension(format!(
            "acoustic input has {} values, model expects {}",
            input.len(),
            c.acoustic_input_dim()
        )));
    }
    let a = row(input);
    let z1 = Array2::zeros((1, c.bigru1_cells));
    let (f1, _) = p.ac1_fwd.step(a.view(), z1.view());
    let (b1, _) = p.ac1_bwd.step(a.view(), z1.view());
    let joined = concatenate(Axis(1), &[f1.view(), b1.view()]).expect("same batch");
    let mut stats = model.bn_stats.clone();
    let (normed, _) = p.bn.forward(joined.view(), &mut stats, crate::nn::Mode::Infer)?;
    let z2 = Array2::zeros((1, c.bigru2_cells));
    let (f2, _) = p.ac2_fwd.step(normed.view(), z2.view());
    let (b2, _) = p.ac2_bwd.step(normed.view(), z2.view());
    Ok(concatenate(Axis(0), &[f2.row(0), b2.row(0)]).expect("1-D concat"))
}

/// `C'` for a partial caption front-padded to `len` tokens.
pub fn encode_linguistic_padded(model: &Captioner, partial: &[usize], len: usize) -> Result<Array1<f64>> {
    let p = &model.params;
    let padded = front_pad(partial, len)?;
    if let Some(&t) = padded.iter().find(|&&t| t >= model.config.vocab_size) {
        return Err(Error::InvalidArgument(format!("token id {t} outside vocabulary")));
    }
    let mut h = Array2::zeros((1, model.config.ling_gru_cells));
    for &t in &padded {
        let x = row(p.embedding.row(t));
        h = p.ling.step(x.view(), h.view()).0;
    }
    Ok(h.row(0).to_owned())
}

/// `C'` at the model's configured padded length.
pub fn encode_linguistic(model: &Captioner, partial: &[usize]) -> Result<Array1<f64>> {
    encode_linguistic_padded(model, partial, model.config.partial_len())
}

/// Next-word distribution from the two encodings.
pub fn decode_step(model: &Captioner, x_enc: ArrayView1<f64>, c_enc: ArrayView1<f64>) -> Result<Array1<f64>> {
    let c = &model.config;
    if x_enc.len() != c.acoustic_encoding_dim() || c_enc.len() != c.ling_gru_cells {
        return Err(Error::Dimension(format!(
            "decoder expects {} + {} inputs, got {} + {}",
            c.acoustic_encoding_dim(),
            c.ling_gru_cells,
            x_enc.len(),
            c_enc.len()
        )));
    }
    let cat = concatenate(Axis(0), &[x_enc, c_enc]).expect("1-D concat");
    let (hd, _) = model.params.dec.step(row(cat.view()).view(), Array2::zeros((1, c.dec_gru_cells)).view());
    let logits = model.params.out.forward(hd.view());
    softmax(logits.row(0))
}

/// Index of the largest probability; the lowest index wins ties.
pub fn argmax(probs: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding from `<sos>` until `<eos>` or `max_caption_len` words.
/// Returns word ids without the markers.
pub fn greedy_caption(model: &Captioner, input: ArrayView1<f64>) -> Result<Vec<usize>> {
    let x_enc = encode_acoustic(model, input)?;
    let mut partial = vec![SOS_ID];
    while partial.len() <= model.config.max_caption_len {
        let c_enc = encode_linguistic(model, &partial)?;
        let next = argmax(decode_step(model, x_enc.view(), c_enc.view())?.view());
        if next == EOS_ID {
            break;
        }
        partial.push(next);
    }
    Ok(partial[1..].to_vec())
}

pub fn greedy_caption_words(model: &Captioner, vocab: &WordVocabulary, input: ArrayView1<f64>) -> Result<Vec<String>> {
    if vocab.len() != model.config.vocab_size {
        return Err(Error::Dimension(format!(
            "vocabulary has {} words, model was built for {}",
            vocab.len(),
            model.config.vocab_size
        )));
    }
    Ok(greedy_caption(model, input)?.into_iter().map(|id| vocab.word(id).to_string()).collect())
}

/// Next-word probabilities for a batch of clips sharing one partial caption
/// length, via the batched graph in inference mode.
pub fn batch_probabilities(model: &Captioner, inputs: &Array2<f64>, tokens: &Array2<usize>) -> Result<Array2<f64>> {
    let mut stats = model.bn_stats.clone();
    let cache = forward(&model.params, &model.config, &mut stats, inputs.view(), tokens.view(), Pass::Infer)?;
    Ok(cache.probs)
}

/// Every `(prefix, next word)` pair of an encoded caption, prefixes starting
/// at `<sos>` and targets running through `<eos>`.
pub fn expand_training_samples(ids: &[usize]) -> Vec<(Vec<usize>, usize)> {
    (1..ids.len()).map(|i| (ids[..i].to_vec(), ids[i])).collect()
}
