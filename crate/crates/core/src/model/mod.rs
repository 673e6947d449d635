//! The captioning network: encoders, decoder, training and checkpoints.

mod checkpoint;
mod config;
mod inference;
mod network;
mod params;
mod train;

pub use checkpoint::{
    check_vocab_hash, load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointMeta,
};
pub use config::{EventMode, ModelConfig};
pub use inference::{
    argmax, batch_probabilities, decode_step, encode_acoustic, encode_linguistic, encode_linguistic_padded,
    expand_training_samples, greedy_caption, greedy_caption_words,
};
pub use network::{backward, batch_loss, forward, front_pad, ForwardCache, Pass};
pub use params::{assemble_model, expected_param_count, Captioner, ModelParams};
pub use train::{evaluate_loss, select_best_epoch, train, EpochRecord, TrainReport};
