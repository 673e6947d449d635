//! Audio captioning with acoustic features and tagged audio-event clues.
//!
//! The pipeline turns raw audio (or pretrained clip embeddings) plus
//! per-clip event-tagger scores into captions with a GRU encoder-decoder,
//! and scores the output with BLEU, METEOR, ROUGE-L and CIDEr.

pub mod audio;
pub mod data;
pub mod error;
pub mod events;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod tensor_io;
pub mod text;

pub use error::{Error, Result};
