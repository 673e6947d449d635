//! File-based workflow behind the command-line tool. Each command reads
//! what earlier commands left under the output directory, so steps can be
//! rerun, resumed and swept independently.
//!
//! ```text
//! <out>/features/<clip>.feat.act1   summary.json
//! <out>/events/t0.2/vocab.json      <clip>.onehot.act1
//! <out>/events/raw/<clip>.raw.act1
//! <out>/train/model.ckpt            history.json  loss_curve.csv  vocab.json  embedding.*
//! <out>/captions/<split>.jsonl
//! <out>/eval/<split>/metrics.json   metrics.txt
//! <out>/ablate/<label>/…            summary.csv
//! <out>/split/development.csv       validation.csv  split.json
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audio::{
    compute_log_mel, load_feature_vector, load_pretrained_vector, load_wav, save_feature_vector, temporal_average,
    FeatureKind, DEFAULT_WINDOW_MS,
};
use crate::data::{expand_dataset, load_manifest, manifest_captions, split_dev, DevSplit, ManifestRow, TrainingSet};
use crate::error::{Error, Result};
use crate::events::{build_event_vocabulary, encode_one_hot, load_event_scores, raw_score_vector, selected_tokens};
use crate::events::{EventScoreVector, EventVocabulary, AUDIOSET_CLASSES};
use crate::metrics::{evaluate, parse_instances, save_report, MetricReport};
use crate::model::{
    assemble_model, check_vocab_hash, greedy_caption_words, load_checkpoint, save_checkpoint, train, CheckpointMeta,
    EventMode, ModelConfig, TrainReport,
};
use crate::tensor_io::{self, Tensor};
use crate::text::{
    build_word_vocabulary, load_glove, random_table, train_word2vec, Caption, EmbeddingSource, EmbeddingTable,
    Word2VecConfig, WordVocabulary,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Development,
    Validation,
    Evaluation,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Development => "development",
            Split::Validation => "validation",
            Split::Evaluation => "evaluation",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "development" | "dev" => Ok(Split::Development),
            "validation" | "val" => Ok(Split::Validation),
            "evaluation" | "eval" => Ok(Split::Evaluation),
            other => Err(Error::InvalidArgument(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub development: PathBuf,
    pub validation: Option<PathBuf>,
    pub evaluation: Option<PathBuf>,
    /// `<clip>.wav` files for LMA extraction.
    pub audio_dir: PathBuf,
    /// `<clip>.act1` 2048-vectors for pretrained features.
    pub pretrained_dir: Option<PathBuf>,
    /// `<clip>.events.json` tagger outputs.
    pub scores_dir: PathBuf,
    /// GloVe text file.
    pub embedding_file: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Overrides for sharing features and events between runs.
    pub features_dir: Option<PathBuf>,
    pub events_dir: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            development: "development.csv".into(),
            validation: None,
            evaluation: None,
            audio_dir: "audio".into(),
            pretrained_dir: None,
            scores_dir: "scores".into(),
            embedding_file: None,
            out_dir: "runs".into(),
            features_dir: None,
            events_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureOptions {
    pub window_ms: f64,
    pub overlap: f64,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { window_ms: DEFAULT_WINDOW_MS, overlap: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingOptions {
    pub source: EmbeddingSource,
    /// `dim` and `seed` are taken from the model config.
    pub word2vec: Word2VecConfig,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        EmbeddingOptions { source: EmbeddingSource::Word2vec, word2vec: Word2VecConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationOptions {
    pub thresholds: Vec<f64>,
    pub embeddings: Vec<EmbeddingSource>,
    pub batch_sizes: Vec<usize>,
}

impl Default for AblationOptions {
    fn default() -> Self {
        AblationOptions {
            thresholds: vec![0.1, 0.2, 0.3, 0.7],
            embeddings: vec![EmbeddingSource::Word2vec],
            batch_sizes: vec![64, 128, 256],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub paths: Paths,
    pub features: FeatureOptions,
    pub embedding: EmbeddingOptions,
    /// Thresholds materialized by the `events` command.
    pub event_thresholds: Vec<f64>,
    pub ablation: AblationOptions,
    /// Training clips kept by `split-dev`; the rest become validation.
    pub split_train_size: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            paths: Paths::default(),
            features: FeatureOptions::default(),
            embedding: EmbeddingOptions::default(),
            event_thresholds: vec![0.1, 0.2, 0.3, 0.7],
            ablation: AblationOptions::default(),
            split_train_size: 2000,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Pretty JSON in declaration order, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config always serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn features_dir(&self) -> PathBuf {
        self.paths.features_dir.clone().unwrap_or_else(|| self.paths.out_dir.join("features"))
    }

    pub fn events_dir(&self) -> PathBuf {
        self.paths.events_dir.clone().unwrap_or_else(|| self.paths.out_dir.join("events"))
    }

    pub fn train_dir(&self) -> PathBuf {
        self.paths.out_dir.join("train")
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.train_dir().join("model.ckpt")
    }

    pub fn captions_path(&self, split: Split) -> PathBuf {
        self.paths.out_dir.join("captions").join(format!("{split}.jsonl"))
    }

    pub fn eval_dir(&self, split: Split) -> PathBuf {
        self.paths.out_dir.join("eval").join(split.name())
    }

    pub fn manifest(&self, split: Split) -> Option<&Path> {
        match split {
            Split::Development => Some(&self.paths.development),
            Split::Validation => self.paths.validation.as_deref(),
            Split::Evaluation => self.paths.evaluation.as_deref(),
        }
    }

    /// The split captions are scored on when none is named: evaluation if
    /// configured, then validation, then development.
    pub fn scoring_split(&self) -> Split {
        [Split::Evaluation, Split::Validation]
            .into_iter()
            .find(|&s| self.manifest(s).is_some())
            .unwrap_or(Split::Development)
    }

    fn event_dir(&self, mode: &EventMode) -> Option<PathBuf> {
        match mode {
            EventMode::None => None,
            m => Some(self.events_dir().join(m.label())),
        }
    }

    fn echo(&self, dir: &Path) -> Result<()> {
        self.save(&dir.join("config.json"))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn feature_path(dir: &Path, clip: &str) -> PathBuf {
    dir.join(format!("{clip}.feat.act1"))
}

fn score_path(dir: &Path, clip: &str) -> PathBuf {
    dir.join(format!("{clip}.events.json"))
}

fn event_vector_path(dir: &Path, mode: &EventMode, clip: &str) -> PathBuf {
    match mode {
        EventMode::RawScores => dir.join(format!("{clip}.raw.act1")),
        _ => dir.join(format!("{clip}.onehot.act1")),
    }
}

/// Stable 64-bit digest of a label (first eight bytes of SHA-256).
pub fn stable_hash(label: &str) -> u64 {
    let digest = Sha256::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

pub fn load_split(cfg: &RunConfig, split: Split) -> Result<Vec<ManifestRow>> {
    let path = cfg.manifest(split).ok_or_else(|| Error::InvalidArgument(format!("no {split} manifest configured")))?;
    load_manifest(path)
}

/// Every configured split, first occurrence of each clip kept.
fn all_rows(cfg: &RunConfig) -> Result<Vec<(Split, ManifestRow)>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for split in [Split::Development, Split::Validation, Split::Evaluation] {
        if cfg.manifest(split).is_none() {
            continue;
        }
        for row in load_split(cfg, split)? {
            if seen.insert(row.clip_id.clone()) {
                out.push((split, row));
            }
        }
    }
    Ok(out)
}

/// Runs `f` on every item in parallel; the error lists each failing clip.
fn per_clip<T: Send>(what: &'static str, ids: &[String], f: impl Fn(&str) -> Result<T> + Sync) -> Result<Vec<T>> {
    let results: Vec<Result<T>> = ids.par_iter().map(|id| f(id)).collect();
    let mut ok = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                warn!("{id}: {e}");
                failed.push(format!("{id} ({e})"));
            }
        }
    }
    if failed.is_empty() {
        Ok(ok)
    } else {
        Err(Error::Failed { what, items: failed })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipFailure {
    pub clip_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub kind: FeatureKind,
    pub dim: usize,
    pub clips: usize,
    pub written: usize,
    pub skipped: usize,
    pub failures: Vec<ClipFailure>,
}

fn extract_one(cfg: &RunConfig, clip: &str, dest: &Path) -> Result<()> {
    match cfg.model.acoustic_kind {
        FeatureKind::Lma => {
            let audio = load_wav(&cfg.paths.audio_dir.join(format!("{clip}.wav")))?;
            let mel = compute_log_mel(&audio, cfg.features.window_ms, cfg.features.overlap, cfg.model.feature_dim)?;
            save_feature_vector(dest, &temporal_average(&mel))
        }
        FeatureKind::Pretrained => {
            let dir = cfg
                .paths
                .pretrained_dir
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("pretrained features need paths.pretrained_dir".into()))?;
            let src = dir.join(format!("{clip}.act1"));
            load_pretrained_vector(&src)?;
            std::fs::copy(&src, dest).map(|_| ()).map_err(|e| Error::io(&src, e))
        }
    }
}

/// One feature file per clip across all configured splits. Existing files
/// are kept unless `force`. The summary is written even when clips fail.
pub fn cmd_features(cfg: &RunConfig, force: bool) -> Result<FeatureSummary> {
    let dir = cfg.features_dir();
    create_dir(&dir)?;
    let ids: Vec<String> = all_rows(cfg)?.into_iter().map(|(_, r)| r.clip_id).collect();
    let outcomes: Vec<Result<bool>> = ids
        .par_iter()
        .map(|id| {
            let dest = feature_path(&dir, id);
            if dest.exists() && !force {
                return Ok(false);
            }
            extract_one(cfg, id, &dest).map(|_| true)
        })
        .collect();
    let mut summary = FeatureSummary {
        kind: cfg.model.acoustic_kind,
        dim: cfg.model.feature_dim,
        clips: ids.len(),
        written: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for (id, o) in ids.iter().zip(outcomes) {
        match o {
            Ok(true) => summary.written += 1,
            Ok(false) => summary.skipped += 1,
            Err(e) => summary.failures.push(ClipFailure { clip_id: id.clone(), error: e.to_string() }),
        }
    }
    write_file(&dir.join("summary.json"), &serde_json::to_vec_pretty(&summary)?)?;
    cfg.echo(&dir)?;
    info!("features: {} written, {} skipped, {} failed", summary.written, summary.skipped, summary.failures.len());
    if !summary.failures.is_empty() {
        return Err(Error::Failed {
            what: "feature clip(s)",
            items: summary.failures.iter().map(|f| f.clip_id.clone()).collect(),
        });
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSummary {
    pub threshold: f64,
    pub k: usize,
    pub clips: usize,
}

fn read_event_vocab(dir: &Path) -> Result<EventVocabulary> {
    let path = dir.join("vocab.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    EventVocabulary::from_json(&serde_json::from_str(&text)?)
}

/// Per threshold: an event vocabulary built from the development clips and
/// a one-hot file for every clip. Raw 527-vectors are written too when the
/// model consumes raw scores.
pub fn cmd_events(cfg: &RunConfig, thresholds: &[f64], force: bool) -> Result<Vec<EventSummary>> {
    let mut ts: Vec<f64> = thresholds.to_vec();
    if let Some(t) = ts.iter().find(|t| !(0.0..=1.0).contains(*t)) {
        return Err(Error::InvalidArgument(format!("threshold {t} not in [0,1]")));
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();

    let rows = all_rows(cfg)?;
    let ids: Vec<String> = rows.iter().map(|(_, r)| r.clip_id.clone()).collect();
    let scores: Vec<EventScoreVector> =
        per_clip("event score file(s)", &ids, |id| load_event_scores(&score_path(&cfg.paths.scores_dir, id)))?;
    let is_dev: Vec<bool> = rows.iter().map(|(s, _)| *s == Split::Development).collect();

    let root = cfg.events_dir();
    let mut out = Vec::new();
    for t in ts {
        let mode = EventMode::OneHot { threshold: t };
        let dir = root.join(mode.label());
        if dir.join("vocab.json").exists() && !force {
            let k = read_event_vocab(&dir)?.len();
            out.push(EventSummary { threshold: t, k, clips: ids.len() });
            continue;
        }
        let tokens: Vec<Vec<String>> = scores.iter().map(|s| selected_tokens(s, t)).collect();
        let dev_tokens: Vec<Vec<String>> =
            tokens.iter().zip(&is_dev).filter(|(_, &d)| d).map(|(t, _)| t.clone()).collect();
        let vocab = build_event_vocabulary(&dev_tokens)?;
        create_dir(&dir)?;
        for (id, toks) in ids.iter().zip(&tokens) {
            let v = encode_one_hot(toks, &vocab);
            tensor_io::save(&event_vector_path(&dir, &mode, id), &Tensor::vector(v.to_f64()))?;
        }
        write_file(&dir.join("vocab.json"), &serde_json::to_vec_pretty(&vocab.to_json())?)?;
        info!("events t={t}: K={}", vocab.len());
        out.push(EventSummary { threshold: t, k: vocab.len(), clips: ids.len() });
    }
    if cfg.model.event_mode == EventMode::RawScores {
        let dir = root.join(EventMode::RawScores.label());
        create_dir(&dir)?;
        for (id, s) in ids.iter().zip(&scores) {
            let dest = event_vector_path(&dir, &EventMode::RawScores, id);
            if !dest.exists() || force {
                tensor_io::save(&dest, &Tensor::vector(raw_score_vector(s)?))?;
            }
        }
    }
    write_file(&root.join("summary.json"), &serde_json::to_vec_pretty(&out)?)?;
    cfg.echo(&root)?;
    Ok(out)
}

/// The event vocabulary a mode depends on, materializing it on first use.
fn prepare_events(cfg: &RunConfig, mode: &EventMode) -> Result<Option<EventVocabulary>> {
    match *mode {
        EventMode::None => Ok(None),
        EventMode::RawScores => {
            let dir = cfg.event_dir(mode).expect("raw mode has a directory");
            if !dir.exists() {
                let mut c = cfg.clone();
                c.model.event_mode = *mode;
                cmd_events(&c, &[], false)?;
            }
            Ok(None)
        }
        EventMode::OneHot { threshold } => {
            let dir = cfg.event_dir(mode).expect("one-hot mode has a directory");
            if !dir.join("vocab.json").exists() {
                info!("materializing events for t={threshold}");
                cmd_events(cfg, &[threshold], false)?;
            }
            read_event_vocab(&dir).map(Some)
        }
    }
}

/// `features ⊕ events` for each row, in row order.
pub fn clip_inputs(cfg: &RunConfig, model: &ModelConfig, rows: &[ManifestRow]) -> Result<Vec<(String, Vec<f64>)>> {
    let features = cfg.features_dir();
    let events = cfg.event_dir(&model.event_mode);
    let ids: Vec<String> = rows.iter().map(|r| r.clip_id.clone()).collect();
    let vectors = per_clip("input clip(s)", &ids, |id| {
        let mut v = load_feature_vector(&feature_path(&features, id), model.acoustic_kind, model.feature_dim)?.values;
        if let Some(dir) = &events {
            let e = tensor_io::load(&event_vector_path(dir, &model.event_mode, id))?;
            if e.rank() != 1 || e.data.len() != model.event_dim {
                return Err(Error::WrongLength { expected: model.event_dim, actual: e.data.len() });
            }
            v.extend(e.data);
        }
        Ok(v)
    })?;
    Ok(ids.into_iter().zip(vectors).collect())
}

pub fn build_embeddings(
    cfg: &RunConfig,
    model: &ModelConfig,
    captions: &[Caption],
    vocab: &WordVocabulary,
) -> Result<EmbeddingTable> {
    let table = match cfg.embedding.source {
        EmbeddingSource::Word2vec => {
            let w2v = Word2VecConfig { dim: model.embedding_dim, seed: model.seed, ..cfg.embedding.word2vec.clone() };
            train_word2vec(captions, vocab, &w2v)?
        }
        EmbeddingSource::Glove => {
            let path = cfg
                .paths
                .embedding_file
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("GloVe embeddings need paths.embedding_file".into()))?;
            load_glove(path, vocab, model.seed)?
        }
        EmbeddingSource::Random => random_table(vocab.len(), model.embedding_dim, model.seed),
    };
    if table.dim() != model.embedding_dim {
        return Err(Error::Dimension(format!(
            "embeddings are {}-dim, model expects {}",
            table.dim(),
            model.embedding_dim
        )));
    }
    Ok(table)
}

/// Vocabulary of the development captions: the word list every checkpoint
/// of this run is tied to.
pub fn run_vocabulary(cfg: &RunConfig) -> Result<(Vec<ManifestRow>, Vec<Caption>, WordVocabulary)> {
    let rows = load_split(cfg, Split::Development)?;
    let captions = manifest_captions(&rows)?;
    let vocab = build_word_vocabulary(&captions)?;
    Ok((rows, captions, vocab))
}

fn training_set(
    cfg: &RunConfig,
    model: &ModelConfig,
    rows: &[ManifestRow],
    vocab: &WordVocabulary,
) -> Result<TrainingSet> {
    let captions = manifest_captions(rows)?;
    let inputs = clip_inputs(cfg, model, rows)?;
    expand_dataset(&inputs, &captions, vocab, model.max_caption_len)
}

#[derive(Serialize)]
struct VocabFile<'a> {
    hash: String,
    words: &'a [String],
}

/// Trains on the development split (validation split, when configured,
/// picks the epoch) and writes the best checkpoint plus loss history.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport> {
    let (dev, captions, vocab) = run_vocabulary(cfg)?;
    let mut mc = cfg.model.clone();
    mc.vocab_size = vocab.len();
    let event_vocab = prepare_events(cfg, &mc.event_mode)?;
    mc.event_dim = match mc.event_mode {
        EventMode::None => 0,
        EventMode::RawScores => AUDIOSET_CLASSES,
        EventMode::OneHot { .. } => event_vocab.as_ref().map_or(0, |v| v.len()),
    };
    mc.validate()?;

    let table = build_embeddings(cfg, &mc, &captions, &vocab)?;
    let inputs = clip_inputs(cfg, &mc, &dev)?;
    let train_set = expand_dataset(&inputs, &captions, &vocab, mc.max_caption_len)?;
    let val_set = match cfg.manifest(Split::Validation) {
        Some(_) => Some(training_set(cfg, &mc, &load_split(cfg, Split::Validation)?, &vocab)?),
        None => None,
    };
    info!("training: {} samples, vocabulary {}, event dim {}", train_set.len(), vocab.len(), mc.event_dim);

    let mut model = assemble_model(&mc, Some(&table))?;
    let report = train(&mut model, &train_set, val_set.as_ref(), |_| {})?;

    let dir = cfg.train_dir();
    create_dir(&dir)?;
    let meta = CheckpointMeta {
        epoch: report.best_epoch,
        validation_loss: report.history[report.best_epoch - 1].val_loss,
        vocab_hash: vocab.hash(),
        event_vocab_hash: event_vocab.as_ref().map(|v| v.hash()),
    };
    save_checkpoint(&cfg.checkpoint_path(), &model, &meta)?;
    write_file(&dir.join("history.json"), &serde_json::to_vec_pretty(&report)?)?;
    let mut curve = csv::Writer::from_writer(Vec::new());
    curve.write_record(["epoch", "train_loss", "val_loss"])?;
    for r in &report.history {
        curve.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    let curve = curve.into_inner().map_err(|e| Error::io(dir.join("loss_curve.csv"), e.into_error()))?;
    write_file(&dir.join("loss_curve.csv"), &curve)?;
    let words = VocabFile { hash: vocab.hash(), words: vocab.words() };
    write_file(&dir.join("vocab.json"), &serde_json::to_vec_pretty(&words)?)?;
    table.save(&vocab, &dir.join("embedding"))?;
    let mut effective = cfg.clone();
    effective.model = mc;
    effective.echo(&dir)?;
    info!("best epoch {} (loss {:.5})", report.best_epoch, report.best_loss);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateLine {
    pub clip_id: String,
    pub candidate: String,
}

/// Greedy captions for every clip of `split`, one JSON object per line in
/// manifest order.
pub fn cmd_caption(cfg: &RunConfig, split: Split, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let ckpt = checkpoint.map(Path::to_path_buf).unwrap_or_else(|| cfg.checkpoint_path());
    let (model, meta) = load_checkpoint(&ckpt)?;
    let (_, _, vocab) = run_vocabulary(cfg)?;
    check_vocab_hash(&meta, &vocab.hash())?;
    if let EventMode::OneHot { .. } = model.config.event_mode {
        let ev = read_event_vocab(&cfg.event_dir(&model.config.event_mode).expect("one-hot mode has a directory"))?;
        if meta.event_vocab_hash.as_deref() != Some(ev.hash().as_str()) {
            return Err(Error::Checkpoint("event vocabulary differs from the one the model was trained with".into()));
        }
    }
    let rows = load_split(cfg, split)?;
    let inputs = clip_inputs(cfg, &model.config, &rows)?;
    let lines: Vec<String> = inputs
        .par_iter()
        .map(|(id, x)| {
            let words = greedy_caption_words(&model, &vocab, ndarray::ArrayView1::from(x.as_slice()))?;
            let line = CandidateLine { clip_id: id.clone(), candidate: words.join(" ") };
            Ok(serde_json::to_string(&line)? + "\n")
        })
        .collect::<Result<_>>()?;
    let path = cfg.captions_path(split);
    write_file(&path, lines.concat().as_bytes())?;
    cfg.echo(path.parent().expect("captions path has a parent"))?;
    info!("{} captions written to {}", lines.len(), path.display());
    Ok(path)
}

/// Scores a candidates file against the references of a manifest.
pub fn cmd_evaluate(candidates: &Path, manifest: &Path, out_dir: &Path) -> Result<MetricReport> {
    let refs: BTreeMap<String, Vec<String>> =
        load_manifest(manifest)?.into_iter().map(|r| (r.clip_id, r.captions)).collect();
    let text = std::fs::read_to_string(candidates).map_err(|e| Error::io(candidates, e))?;
    let lookup = |id: &str| refs.get(id).cloned();
    let instances = parse_instances(&text, Some(&lookup))?;
    let report = evaluate(&instances)?;
    create_dir(out_dir)?;
    save_report(out_dir, &report)?;
    Ok(report)
}

/// [`cmd_evaluate`] on this run's captions for `split`.
pub fn evaluate_split(cfg: &RunConfig, split: Split) -> Result<MetricReport> {
    let manifest =
        cfg.manifest(split).ok_or_else(|| Error::InvalidArgument(format!("no {split} manifest configured")))?;
    let dir = cfg.eval_dir(split);
    let report = cmd_evaluate(&cfg.captions_path(split), manifest, &dir)?;
    cfg.echo(&dir)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub label: String,
    pub threshold: f64,
    pub embedding: EmbeddingSource,
    pub batch_size: usize,
    pub seed: u64,
    /// `None` on success.
    pub error: Option<String>,
    pub report: Option<MetricReport>,
}

pub fn ablation_label(threshold: f64, embedding: EmbeddingSource, batch_size: usize) -> String {
    let emb = match embedding {
        EmbeddingSource::Word2vec => "word2vec",
        EmbeddingSource::Glove => "glove",
        EmbeddingSource::Random => "random",
    };
    format!("{}_{emb}_b{batch_size}", EventMode::OneHot { threshold }.label())
}

fn ablation_config(cfg: &RunConfig, threshold: f64, embedding: EmbeddingSource, batch_size: usize) -> RunConfig {
    let label = ablation_label(threshold, embedding, batch_size);
    let mut sub = cfg.clone();
    sub.model.event_mode = EventMode::OneHot { threshold };
    sub.model.batch_size = batch_size;
    sub.model.seed = cfg.model.seed.wrapping_add(stable_hash(&label));
    sub.embedding.source = embedding;
    sub.paths.features_dir = Some(cfg.features_dir());
    sub.paths.events_dir = Some(cfg.events_dir());
    sub.paths.out_dir = cfg.paths.out_dir.join("ablate").join(&label);
    sub
}

/// Train, caption and score every combination of the ablation lists. A
/// failing combination is recorded and the sweep moves on; the error at the
/// end names every failure.
pub fn cmd_ablate(cfg: &RunConfig) -> Result<Vec<AblationRun>> {
    let a = &cfg.ablation;
    if a.thresholds.is_empty() || a.embeddings.is_empty() || a.batch_sizes.is_empty() {
        return Err(Error::InvalidArgument("ablation lists must all be non-empty".into()));
    }
    cmd_features(cfg, false)?;
    cmd_events(cfg, &a.thresholds, false)?;
    let split = cfg.scoring_split();
    let mut runs = Vec::new();
    for &t in &a.thresholds {
        for &emb in &a.embeddings {
            for &bs in &a.batch_sizes {
                let sub = ablation_config(cfg, t, emb, bs);
                let label = ablation_label(t, emb, bs);
                info!("ablation run {label} (seed {})", sub.model.seed);
                let result = cmd_train(&sub)
                    .and_then(|_| cmd_caption(&sub, split, None))
                    .and_then(|_| evaluate_split(&sub, split));
                if let Err(e) = &result {
                    warn!("{label}: {e}");
                }
                runs.push(AblationRun {
                    label,
                    threshold: t,
                    embedding: emb,
                    batch_size: bs,
                    seed: sub.model.seed,
                    error: result.as_ref().err().map(|e| e.to_string()),
                    report: result.ok(),
                });
            }
        }
    }

    let dir = cfg.paths.out_dir.join("ablate");
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["label", "threshold", "embedding", "batch_size", "seed", "status"];
    header.extend(MetricReport::COLUMNS);
    w.write_record(&header)?;
    for r in &runs {
        let mut rec = vec![
            r.label.clone(),
            r.threshold.to_string(),
            serde_json::to_value(r.embedding)?.as_str().unwrap_or_default().to_string(),
            r.batch_size.to_string(),
            r.seed.to_string(),
            if r.error.is_none() { "ok".into() } else { "failed".into() },
        ];
        match &r.report {
            Some(rep) => rec.extend(rep.values().iter().map(|v| format!("{v:.6}"))),
            None => rec.extend(std::iter::repeat_n(String::new(), MetricReport::COLUMNS.len())),
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(dir.join("summary.csv"), e.into_error()))?;
    write_file(&dir.join("summary.csv"), &bytes)?;
    write_file(&dir.join("summary.json"), &serde_json::to_vec_pretty(&runs)?)?;
    cfg.echo(&dir)?;

    let failed: Vec<String> = runs.iter().filter(|r| r.error.is_some()).map(|r| r.label.clone()).collect();
    if !failed.is_empty() {
        return Err(Error::Failed { what: "ablation run(s)", items: failed });
    }
    Ok(runs)
}

/// Seeded train/validation split of the development manifest, written as
/// two manifests plus the split record.
pub fn cmd_split_dev(cfg: &RunConfig) -> Result<DevSplit> {
    let rows = load_split(cfg, Split::Development)?;
    let ids: Vec<String> = rows.iter().map(|r| r.clip_id.clone()).collect();
    let split = split_dev(&ids, cfg.split_train_size, cfg.model.seed)?;
    let by_id: BTreeMap<&str, &ManifestRow> = rows.iter().map(|r| (r.clip_id.as_str(), r)).collect();
    let dir = cfg.paths.out_dir.join("split");
    for (name, part) in [("development", &split.train), ("validation", &split.validation)] {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["file_name", "caption_1", "caption_2", "caption_3", "caption_4", "caption_5"])?;
        for id in part {
            let row = by_id[id.as_str()];
            let mut rec = vec![format!("{id}.wav")];
            rec.extend((0..crate::data::CAPTIONS_PER_CLIP).map(|i| row.captions.get(i).cloned().unwrap_or_default()));
            w.write_record(&rec)?;
        }
        let path = dir.join(format!("{name}.csv"));
        let bytes = w.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        write_file(&path, &bytes)?;
    }
    write_file(&dir.join("split.json"), &serde_json::to_vec_pretty(&split)?)?;
    cfg.echo(&dir)?;
    Ok(split)
}
