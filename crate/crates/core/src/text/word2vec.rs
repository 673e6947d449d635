//! Skip-gram with negative sampling over the caption corpus.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Caption, EmbeddingSource, EmbeddingTable, WordVocabulary, PAD_ID};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub window: usize,
    pub dim: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig { window: 2, dim: 256, negatives: 5, epochs: 15, learning_rate: 0.025, seed: 1 }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Cumulative unigram^0.75 distribution for negative draws.
struct NegativeSampler {
    cumulative: Vec<f64>,
}

impl NegativeSampler {
    fn new(counts: &[u64]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NegativeSampler { cumulative }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// Trains vectors for every word of `vocab` on `captions` (markers included).
/// Words that never occur keep their seeded initialization; `<pad>` is zero.
pub fn train_word2vec(captions: &[Caption], vocab: &WordVocabulary, cfg: &Word2VecConfig) -> Result<EmbeddingTable> {
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
    }
    let sentences: Vec<Vec<usize>> =
        captions.iter().map(|c| vocab.encode(&c.tokens).into_iter().filter(|&i| i != PAD_ID).collect()).collect();
    let pairs_per_epoch: usize = sentences
        .iter()
        .map(|s| {
            (0..s.len())
                .map(|i| {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(s.len() - 1);
                    hi - lo
                })
                .sum::<usize>()
        })
        .sum();
    if pairs_per_epoch == 0 || cfg.window == 0 {
        return Err(Error::CorpusTooSmall("no (center, context) pair in corpus".into()));
    }

    let v = vocab.len();
    let d = cfg.dim;
    let mut counts = vec![0u64; v];
    for s in &sentences {
        for &w in s {
            counts[w] += 1;
        }
    }
    let sampler = NegativeSampler::new(&counts);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut input = Array2::from_shape_fn((v, d), |_| (rng.gen::<f64>() - 0.5) / d as f64);
    let mut output = Array2::<f64>::zeros((v, d));

    let total = (pairs_per_epoch * cfg.epochs) as f64;
    let mut seen = 0usize;
    let mut grad = vec![0.0; d];
    for _ in 0..cfg.epochs {
        for s in &sentences {
            for (i, &center) in s.iter().enumerate() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(s.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let lr = (cfg.learning_rate * (1.0 - seen as f64 / total)).max(cfg.learning_rate * 1e-4);
                    seen += 1;
                    grad.iter_mut().for_each(|g| *g = 0.0);
                    for k in 0..=cfg.negatives {
                        let (target, label) = if k == 0 {
                            (s[j], 1.0)
                        } else {
                            let t = sampler.draw(&mut rng);
                            if t == s[j] {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let dot = input.row(center).dot(&output.row(target));
                        let g = (label - sigmoid(dot)) * lr;
                        let center_row = input.row(center);
                        let mut out_row = output.row_mut(target);
                        for ((acc, o), c) in grad.iter_mut().zip(out_row.iter_mut()).zip(center_row.iter()) {
                            *acc += g * *o;
                            *o += g * c;
                        }
                    }
                    for (x, g) in input.row_mut(center).iter_mut().zip(&grad) {
                        *x += g;
                    }
                }
            }
        }
    }
    input.row_mut(PAD_ID).fill(0.0);
    if let Some(i) = input.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(EmbeddingTable { source: EmbeddingSource::Word2vec, vectors: input })
}
