use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, batch_loss, forward, Pass};
use super::params::Captioner;
use crate::data::{batch_order, TrainingSet};
use crate::error::{Error, Result};
use crate::nn::{Adam, ParamSet};
use crate::text::PAD_ID;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

impl EpochRecord {
    /// Validation loss when available, otherwise training loss.
    pub fn selection_loss(&self) -> f64 {
        self.val_loss.unwrap_or(self.train_loss)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_loss: f64,
}

/// 1-based position of the smallest finite loss; earliest wins ties.
pub fn select_best_epoch(losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &l) in losses.iter().enumerate() {
        if l.is_finite() && best.is_none_or(|(_, b)| l < b) {
            best = Some((i, l));
        }
    }
    best.map(|(i, _)| i + 1)
}

/// Mean per-token loss in inference mode.
pub fn evaluate_loss(model: &Captioner, set: &TrainingSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty set".into()));
    }
    let mut total = 0.0;
    let mut stats = model.bn_stats.clone();
    for ids in batch_order(set.len(), model.config.batch_size, None)? {
        let b = set.batch(&ids, model.config.partial_len())?;
        let cache = forward(&model.params, &model.config, &mut stats, b.inputs.view(), b.tokens.view(), Pass::Infer)?;
        total += batch_loss(&cache.probs, &b.targets) * ids.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Minibatch Adam training for `config.epochs` epochs. On return the model
/// holds the parameters of the best epoch (lowest validation loss, or
/// training loss without a validation set).
pub fn train(
    model: &mut Captioner,
    train_set: &TrainingSet,
    val_set: Option<&TrainingSet>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainReport> {
    model.config.validate()?;
    if train_set.len() < 2 {
        return Err(Error::InvalidArgument("training needs at least 2 samples for batch normalization".into()));
    }
    if train_set.inputs.ncols() != model.config.acoustic_input_dim() {
        return Err(Error::Dimension(format!(
            "training inputs have {} columns, model expects {}",
            train_set.inputs.ncols(),
            model.config.acoustic_input_dim()
        )));
    }
    let val_set = val_set.filter(|v| !v.is_empty());
    let cfg = model.config.clone();
    let shapes: Vec<usize> = model.params.slices().iter().map(|s| s.len()).collect();
    let mut adam = Adam::new(cfg.adam, &shapes);
    let trainable = model.trainable_mask();
    let embedding_tensor = shapes.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7261_696e);

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Captioner)> = None;
    for epoch in 1..=cfg.epochs {
        let shuffle_seed = cfg.shuffle.then(|| rng.gen::<u64>());
        let mut order = batch_order(train_set.len(), cfg.batch_size, shuffle_seed)?;
        // A lone trailing sample cannot be batch-normalized; fold it into
        // the previous batch.
        if order.len() > 1 && order.last().is_some_and(|b| b.len() == 1) {
            let last = order.pop().expect("non-empty");
            order.last_mut().expect("non-empty").extend(last);
        }
        let mut total = 0.0;
        for (bi, ids) in order.iter().enumerate() {
            let batch = train_set.batch(ids, cfg.partial_len())?;
            let pass = Pass::Train { dropout_seed: rng.gen() };
            let cache =
                forward(&model.params, &cfg, &mut model.bn_stats, batch.inputs.view(), batch.tokens.view(), pass)?;
            let loss = batch_loss(&cache.probs, &batch.targets);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(format!("epoch {epoch}, batch {bi}: loss {loss}")));
            }
            total += loss * ids.len() as f64;
            let mut grads = backward(&model.params, &cfg, &cache, &batch.targets)?;
            grads.embedding.row_mut(PAD_ID).fill(0.0);
            let g = grads.slices();
            adam.update(&mut model.params.slices_mut(), &g, Some(&trainable))?;
            debug_assert!(model.params.slices()[embedding_tensor][..cfg.embedding_dim].iter().all(|&v| v == 0.0));
        }
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss(format!("epoch {epoch}: parameters became non-finite")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: total / train_set.len() as f64,
            val_loss: val_set.map(|v| evaluate_loss(model, v)).transpose()?,
        };
        info!(
            "epoch {epoch}: train {:.5}{}",
            record.train_loss,
            record.val_loss.map(|v| format!(", val {v:.5}")).unwrap_or_default()
        );
        on_epoch(&record);
        let sel = record.selection_loss();
        if best.as_ref().is_none_or(|(_, b, _)| sel < *b) {
            best = Some((epoch, sel, model.clone()));
        }
        history.push(record);
    }
    let (best_epoch, best_loss) = match best {
        Some((e, l, m)) => {
            *model = m;
            (e, l)
        }
        None => (0, f64::NAN),
    };
    Ok(TrainReport { history, best_epoch, best_loss })
}
