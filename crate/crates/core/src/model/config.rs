use serde::{Deserialize, Serialize};

use crate::audio::{FeatureKind, DEFAULT_N_MELS, PRETRAINED_DIM};
use crate::error::{Error, Result};
use crate::events::AUDIOSET_CLASSES;
use crate::nn::AdamConfig;

/// How tagger output enters the acoustic encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventMode {
    /// No event input at all.
    None,
    /// All 527 probabilities, unthresholded.
    RawScores,
    /// Thresholded, tokenized one-hot vector.
    OneHot { threshold: f64 },
}

impl EventMode {
    pub fn label(&self) -> String {
        match self {
            EventMode::None => "none".into(),
            EventMode::RawScores => "raw".into(),
            EventMode::OneHot { threshold } => format!("t{threshold}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub acoustic_kind: FeatureKind,
    pub feature_dim: usize,
    pub event_mode: EventMode,
    pub event_dim: usize,
    pub bigru1_cells: usize,
    pub bigru2_cells: usize,
    pub ling_gru_cells: usize,
    pub dec_gru_cells: usize,
    pub embedding_dim: usize,
    pub vocab_size: usize,
    /// Longest generated caption, in words without markers.
    pub max_caption_len: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub freeze_embeddings: bool,
    pub shuffle: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            acoustic_kind: FeatureKind::Lma,
            feature_dim: DEFAULT_N_MELS,
            event_mode: EventMode::OneHot { threshold: 0.2 },
            event_dim: 0,
            bigru1_cells: 32,
            bigru2_cells: 64,
            ling_gru_cells: 128,
            dec_gru_cells: 128,
            embedding_dim: 256,
            vocab_size: 4,
            max_caption_len: 30,
            dropout: 0.5,
            batch_size: 64,
            epochs: 50,
            seed: 0,
            adam: AdamConfig::default(),
            freeze_embeddings: true,
            shuffle: true,
        }
    }
}

impl ModelConfig {
    /// Width of `features ⊕ events`.
    pub fn acoustic_input_dim(&self) -> usize {
        self.feature_dim + self.used_event_dim()
    }

    pub fn used_event_dim(&self) -> usize {
        match self.event_mode {
            EventMode::None => 0,
            _ => self.event_dim,
        }
    }

    /// Padded length of a partial caption: `<sos>` plus up to `max_caption_len` words.
    pub fn partial_len(&self) -> usize {
        self.max_caption_len + 1
    }

    pub fn acoustic_encoding_dim(&self) -> usize {
        2 * self.bigru2_cells
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("feature_dim", self.feature_dim),
            ("bigru1_cells", self.bigru1_cells),
            ("bigru2_cells", self.bigru2_cells),
            ("ling_gru_cells", self.ling_gru_cells),
            ("dec_gru_cells", self.dec_gru_cells),
            ("embedding_dim", self.embedding_dim),
            ("max_caption_len", self.max_caption_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 4 {
            return Err(Error::InvalidArgument("vocabulary must hold the four special tokens".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout {} not in [0,1)", self.dropout)));
        }
        if self.acoustic_kind == FeatureKind::Pretrained && self.feature_dim != PRETRAINED_DIM {
            return Err(Error::Dimension(format!(
                "pretrained features are {PRETRAINED_DIM}-dim, config says {}",
                self.feature_dim
            )));
        }
        match self.event_mode {
            EventMode::None if self.event_dim != 0 => {
                return Err(Error::Dimension("event_mode none requires event_dim 0".into()))
            }
            EventMode::RawScores if self.event_dim != AUDIOSET_CLASSES => {
                return Err(Error::Dimension(format!(
                    "raw score events are {AUDIOSET_CLASSES}-dim, config says {}",
                    self.event_dim
                )))
            }
            EventMode::OneHot { threshold } if !(0.0..=1.0).contains(&threshold) => {
                return Err(Error::InvalidArgument(format!("threshold {threshold} not in [0,1]")))
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = ModelConfig { event_dim: 10, vocab_size: 20, ..Default::default() };
        ok.validate().unwrap();
        assert_eq!(ok.acoustic_input_dim(), 74);
        assert!(ModelConfig { event_mode: EventMode::None, event_dim: 3, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { event_mode: EventMode::RawScores, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { acoustic_kind: FeatureKind::Pretrained, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { dropout: 1.0, ..ok.clone() }.validate().is_err());
        assert!(ModelConfig { bigru1_cells: 0, ..ok.clone() }.validate().is_err());
        let none = ModelConfig { event_mode: EventMode::None, event_dim: 0, ..ok };
        none.validate().unwrap();
        assert_eq!(none.acoustic_input_dim(), 64);
    }

    #[test]
    fn json_round_trip() {
        let c = ModelConfig { event_mode: EventMode::OneHot { threshold: 0.3 }, ..Default::default() };
        let back: ModelConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
