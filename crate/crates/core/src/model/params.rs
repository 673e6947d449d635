use ndarray::{Array2, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::nn::{BatchNorm, Dense, GruParams, ParamSet, RunningStats};
use crate::text::{random_table, EmbeddingTable, PAD_ID};

/// Every trainable tensor of the captioner.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub ac1_fwd: GruParams,
    pub ac1_bwd: GruParams,
    pub bn: BatchNorm,
    pub ac2_fwd: GruParams,
    pub ac2_bwd: GruParams,
    pub ling: GruParams,
    pub dec: GruParams,
    pub out: Dense,
    /// `V × D`; row `<pad>` stays zero.
    pub embedding: Array2<f64>,
}

pub(crate) const EMBEDDING_TENSOR: &str = "embedding";

impl ModelParams {
    pub fn zeros(c: &ModelConfig) -> Self {
        let h1 = c.bigru1_cells;
        let h2 = c.bigru2_cells;
        let mut bn = BatchNorm::new(2 * h1);
        bn.gamma.fill(0.0);
        ModelParams {
            ac1_fwd: GruParams::zeros(c.acoustic_input_dim(), h1),
            ac1_bwd: GruParams::zeros(c.acoustic_input_dim(), h1),
            bn,
            ac2_fwd: GruParams::zeros(2 * h1, h2),
            ac2_bwd: GruParams::zeros(2 * h1, h2),
            ling: GruParams::zeros(c.embedding_dim, c.ling_gru_cells),
            dec: GruParams::zeros(2 * h2 + c.ling_gru_cells, c.dec_gru_cells),
            out: Dense::zeros(c.dec_gru_cells, c.vocab_size),
            embedding: Array2::zeros((c.vocab_size, c.embedding_dim)),
        }
    }

    /// Xavier-initialized weights; the embedding comes from `embedding` or,
    /// when absent, a seeded random table.
    pub fn init(c: &ModelConfig, embedding: Option<&EmbeddingTable>) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let h1 = c.bigru1_cells;
        let h2 = c.bigru2_cells;
        let mut p = ModelParams {
            ac1_fwd: GruParams::init(c.acoustic_input_dim(), h1, &mut rng),
            ac1_bwd: GruParams::init(c.acoustic_input_dim(), h1, &mut rng),
            bn: BatchNorm::new(2 * h1),
            ac2_fwd: GruParams::init(2 * h1, h2, &mut rng),
            ac2_bwd: GruParams::init(2 * h1, h2, &mut rng),
            ling: GruParams::init(c.embedding_dim, c.ling_gru_cells, &mut rng),
            dec: GruParams::init(2 * h2 + c.ling_gru_cells, c.dec_gru_cells, &mut rng),
            out: Dense::init(c.dec_gru_cells, c.vocab_size, &mut rng),
            embedding: Array2::zeros((0, 0)),
        };
        p.embedding = match embedding {
            Some(t) => {
                if t.vectors.dim() != (c.vocab_size, c.embedding_dim) {
                    return Err(Error::Dimension(format!(
                        "embedding table is {:?}, model wants {}×{}",
                        t.vectors.dim(),
                        c.vocab_size,
                        c.embedding_dim
                    )));
                }
                t.vectors.clone()
            }
            None => random_table(c.vocab_size, c.embedding_dim, c.seed ^ 0xe3b0_c442).vectors,
        };
        p.embedding.row_mut(PAD_ID).fill(0.0);
        Ok(p)
    }

    fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out = Vec::new();
        for (name, g) in self.grus() {
            out.push((format!("{name}.w"), g.w.as_slice().expect("standard layout")));
            out.push((format!("{name}.u"), g.u.as_slice().expect("standard layout")));
            out.push((format!("{name}.b"), g.b.as_slice().expect("standard layout")));
        }
        out.push(("bn.gamma".into(), self.bn.gamma.as_slice().expect("standard layout")));
        out.push(("bn.beta".into(), self.bn.beta.as_slice().expect("standard layout")));
        out.push(("out.w".into(), self.out.w.as_slice().expect("standard layout")));
        out.push(("out.b".into(), self.out.b.as_slice().expect("standard layout")));
        out.push((EMBEDDING_TENSOR.into(), self.embedding.as_slice().expect("standard layout")));
        out
    }

    fn grus(&self) -> [(&'static str, &GruParams); 6] {
        [
            ("ac1_fwd", &self.ac1_fwd),
            ("ac1_bwd", &self.ac1_bwd),
            ("ac2_fwd", &self.ac2_fwd),
            ("ac2_bwd", &self.ac2_bwd),
            ("ling", &self.ling),
            ("dec", &self.dec),
        ]
    }

    /// Tensor shapes in `names()` order, for checkpoint round trips.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for (_, g) in self.grus() {
            out.push(g.w.shape().to_vec());
            out.push(g.u.shape().to_vec());
            out.push(g.b.shape().to_vec());
        }
        out.push(self.bn.gamma.shape().to_vec());
        out.push(self.bn.beta.shape().to_vec());
        out.push(self.out.w.shape().to_vec());
        out.push(self.out.b.shape().to_vec());
        out.push(self.embedding.shape().to_vec());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }

    /// `self += other * scale`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            Zip::from(a).and(b).for_each(|x, &y| *x += scale * y);
        }
    }
}

impl ParamSet for ModelParams {
    fn names(&self) -> Vec<String> {
        self.tensors().into_iter().map(|(n, _)| n).collect()
    }

    fn slices(&self) -> Vec<&[f64]> {
        self.tensors().into_iter().map(|(_, s)| s).collect()
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for g in
            [&mut self.ac1_fwd, &mut self.ac1_bwd, &mut self.ac2_fwd, &mut self.ac2_bwd, &mut self.ling, &mut self.dec]
        {
            out.push(g.w.as_slice_mut().expect("standard layout"));
            out.push(g.u.as_slice_mut().expect("standard layout"));
            out.push(g.b.as_slice_mut().expect("standard layout"));
        }
        out.push(self.bn.gamma.as_slice_mut().expect("standard layout"));
        out.push(self.bn.beta.as_slice_mut().expect("standard layout"));
        out.push(self.out.w.as_slice_mut().expect("standard layout"));
        out.push(self.out.b.as_slice_mut().expect("standard layout"));
        out.push(self.embedding.as_slice_mut().expect("standard layout"));
        out
    }
}

/// Parameters, batch-norm statistics and the configuration that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct Captioner {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub bn_stats: RunningStats,
}

impl Captioner {
    pub fn param_count(&self) -> usize {
        self.params.param_count()
    }

    pub fn trainable_mask(&self) -> Vec<bool> {
        self.params.names().iter().map(|n| !(self.config.freeze_embeddings && n == EMBEDDING_TENSOR)).collect()
    }
}

/// Builds a freshly initialized captioner.
pub fn assemble_model(config: &ModelConfig, embedding: Option<&EmbeddingTable>) -> Result<Captioner> {
    config.validate()?;
    let params = ModelParams::init(config, embedding)?;
    Ok(Captioner { config: config.clone(), bn_stats: RunningStats::new(params.bn.dim()), params })
}

/// Closed-form count: a GRU direction has `3(in + h + 1)h` parameters.
pub fn expected_param_count(c: &ModelConfig) -> usize {
    let gru = |i: usize, h: usize| 3 * (i + h + 1) * h;
    let h1 = c.bigru1_cells;
    let h2 = c.bigru2_cells;
    2 * gru(c.acoustic_input_dim(), h1)
        + 2 * 2 * h1
        + 2 * gru(2 * h1, h2)
        + gru(c.embedding_dim, c.ling_gru_cells)
        + gru(2 * h2 + c.ling_gru_cells, c.dec_gru_cells)
        + (c.dec_gru_cells + 1) * c.vocab_size
        + c.vocab_size * c.embedding_dim
}
