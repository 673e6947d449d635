//! Manifests, supervised samples and mini-batches.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{expand_training_samples, front_pad};
use crate::text::{preprocess_caption, Caption, WordVocabulary, EOS, PAD_ID};

pub const CAPTIONS_PER_CLIP: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub clip_id: String,
    pub captions: Vec<String>,
}

/// `foo.wav` → `foo`; other names pass through.
pub fn clip_id_from_file_name(name: &str) -> String {
    name.strip_suffix(".wav").unwrap_or(name).to_string()
}

/// Reads a CSV with columns `file_name, caption_1 … caption_5`; trailing
/// caption columns and blank cells are optional, but every row needs one.
pub fn parse_manifest(reader: impl std::io::Read) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Manifest(format!("missing column {name:?}")))
    };
    let file_col = col("file_name")?;
    col("caption_1")?;
    let caption_cols: Vec<usize> = (1..=CAPTIONS_PER_CLIP).filter_map(|i| col(&format!("caption_{i}")).ok()).collect();
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let clip_id = clip_id_from_file_name(&field(file_col));
        if clip_id.is_empty() {
            return Err(Error::Manifest(format!("row {}: empty file name", line + 2)));
        }
        if !seen.insert(clip_id.clone()) {
            return Err(Error::Manifest(format!("duplicate clip {clip_id:?}")));
        }
        let captions: Vec<String> = caption_cols.iter().map(|&c| field(c)).filter(|c| !c.is_empty()).collect();
        if captions.is_empty() {
            return Err(Error::Manifest(format!("clip {clip_id:?} has no captions")));
        }
        rows.push(ManifestRow { clip_id, captions });
    }
    Ok(rows)
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(f)
}

/// Preprocesses every caption of every row.
pub fn manifest_captions(rows: &[ManifestRow]) -> Result<Vec<Caption>> {
    rows.iter().flat_map(|r| r.captions.iter().map(move |c| preprocess_caption(&r.clip_id, c))).collect()
}

/// One supervised pair: clip, prefix (starting at `<sos>`) and next word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub clip: usize,
    pub partial: Vec<usize>,
    pub target: usize,
}

/// Acoustic inputs (one row per clip, `features ⊕ events`) plus samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub clip_ids: Vec<String>,
    pub inputs: Array2<f64>,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Array2<f64>,
    /// `B × L`, front-padded with `<pad>`.
    pub tokens: Array2<usize>,
    /// 1 where `tokens` holds a real token, 0 on padding.
    pub mask: Array2<f64>,
    pub targets: Vec<usize>,
    pub sample_ids: Vec<usize>,
}

/// Expands captions into samples. Captions longer than `max_words` are cut
/// to their first `max_words` words before `<eos>`.
pub fn expand_dataset(
    inputs: &[(String, Vec<f64>)],
    captions: &[Caption],
    vocab: &WordVocabulary,
    max_words: usize,
) -> Result<TrainingSet> {
    let width = inputs.first().map_or(0, |(_, v)| v.len());
    let mut index = BTreeMap::new();
    let mut matrix = Array2::zeros((inputs.len(), width));
    for (i, (id, v)) in inputs.iter().enumerate() {
        if v.len() != width {
            return Err(Error::Dimension(format!("clip {id:?} input has {} values, expected {width}", v.len())));
        }
        if index.insert(id.clone(), i).is_some() {
            return Err(Error::Manifest(format!("duplicate clip {id:?}")));
        }
        matrix.row_mut(i).assign(&ndarray::ArrayView1::from(v.as_slice()));
    }
    let mut samples = Vec::new();
    for cap in captions {
        let clip = *index
            .get(&cap.clip_id)
            .ok_or_else(|| Error::Manifest(format!("caption for unknown clip {:?}", cap.clip_id)))?;
        let mut tokens = cap.tokens.clone();
        if tokens.len() > max_words + 2 {
            tokens.truncate(max_words + 1);
            tokens.push(EOS.to_string());
        }
        for (partial, target) in expand_training_samples(&vocab.encode(&tokens)) {
            samples.push(Sample { clip, partial, target });
        }
    }
    Ok(TrainingSet { clip_ids: inputs.iter().map(|(id, _)| id.clone()).collect(), inputs: matrix, samples })
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn batch(&self, sample_ids: &[usize], partial_len: usize) -> Result<Batch> {
        let b = sample_ids.len();
        let mut inputs = Array2::zeros((b, self.inputs.ncols()));
        let mut tokens = Array2::from_elem((b, partial_len), PAD_ID);
        let mut mask = Array2::zeros((b, partial_len));
        let mut targets = Vec::with_capacity(b);
        for (row, &s) in sample_ids.iter().enumerate() {
            let sample = &self.samples[s];
            inputs.row_mut(row).assign(&self.inputs.row(sample.clip));
            let padded = front_pad(&sample.partial, partial_len)?;
            for (t, &tok) in padded.iter().enumerate() {
                tokens[[row, t]] = tok;
            }
            for t in partial_len - sample.partial.len()..partial_len {
                mask[[row, t]] = 1.0;
            }
            targets.push(sample.target);
        }
        Ok(Batch { inputs, tokens, mask, targets, sample_ids: sample_ids.to_vec() })
    }
}

/// Sample indices grouped into batches, shuffled when `seed` is given.
pub fn batch_order(n: usize, batch_size: usize, seed: Option<u64>) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(order.chunks(batch_size).map(|c| c.to_vec()).collect())
}

pub fn make_batches(set: &TrainingSet, batch_size: usize, partial_len: usize, seed: Option<u64>) -> Result<Vec<Batch>> {
    batch_order(set.len(), batch_size, seed)?.iter().map(|ids| set.batch(ids, partial_len)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevSplit {
    pub seed: u64,
    pub train: Vec<String>,
    pub validation: Vec<String>,
}

/// Seeded split of the development clips into `train_size` training clips
/// and the remainder for validation. Both lists come back sorted.
pub fn split_dev(clip_ids: &[String], train_size: usize, seed: u64) -> Result<DevSplit> {
    let mut ids: Vec<String> = clip_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != clip_ids.len() {
        return Err(Error::Manifest("duplicate clip ids".into()));
    }
    if train_size > ids.len() {
        return Err(Error::InvalidArgument(format!("cannot take {train_size} training clips from {}", ids.len())));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut validation = ids.split_off(train_size);
    ids.sort();
    validation.sort();
    Ok(DevSplit { seed, train: ids, validation })
}
