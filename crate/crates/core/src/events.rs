//! Event-tagger score ingestion, thresholding, label tokenization and
//! one-hot event vectors.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of AudioSet classes.
pub const AUDIOSET_CLASSES: usize = 527;

/// Per-clip tagger probabilities keyed by label, in canonical (sorted) order.
#[derive(Debug, Clone, PartialEq)]
pub struct EventScoreVector {
    pub clip_id: String,
    pub scores: BTreeMap<String, f64>,
}

impl EventScoreVector {
    pub fn new(clip_id: impl Into<String>, entries: Vec<(String, f64)>) -> Result<Self> {
        let clip_id = clip_id.into();
        if clip_id.is_empty() {
            return Err(Error::Scores("missing clip_id".into()));
        }
        let mut scores = BTreeMap::new();
        for (label, p) in entries {
            if label.is_empty() {
                return Err(Error::Scores(format!("{clip_id}: empty label")));
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Scores(format!("{clip_id}: probability {p} for {label:?} outside [0,1]")));
            }
            if scores.insert(label.clone(), p).is_some() {
                return Err(Error::Scores(format!("{clip_id}: duplicate label {label:?}")));
            }
        }
        Ok(EventScoreVector { clip_id, scores })
    }

    pub fn class_count(&self) -> usize {
        self.scores.len()
    }
}

/// Label/score pairs in file order, so duplicates can be detected.
struct ScoreEntries(Vec<(String, f64)>);

impl<'de> Deserialize<'de> for ScoreEntries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = ScoreEntries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map of label to probability")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<ScoreEntries, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, f64>()? {
                    out.push((k, v));
                }
                Ok(ScoreEntries(out))
            }
        }
        d.deserialize_map(EntriesVisitor)
    }
}

#[derive(Deserialize)]
struct ScoreFile {
    clip_id: Option<String>,
    scores: ScoreEntries,
}

pub fn parse_event_scores(text: &str) -> Result<EventScoreVector> {
    let file: ScoreFile = serde_json::from_str(text).map_err(|e| Error::Scores(e.to_string()))?;
    let clip_id = file.clip_id.filter(|c| !c.is_empty()).ok_or_else(|| Error::Scores("missing clip_id".into()))?;
    EventScoreVector::new(clip_id, file.scores.0)
}

/// Reads one `{"clip_id": ..., "scores": {...}}` document.
pub fn load_event_scores(path: &Path) -> Result<EventScoreVector> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_event_scores(&text).map_err(|e| Error::Scores(format!("{}: {e}", path.display())))
}

/// Reads a JSON-lines file holding one score document per line.
pub fn load_event_scores_jsonl(path: &Path) -> Result<Vec<EventScoreVector>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_event_scores(l).map_err(|e| Error::Scores(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn to_json(scores: &EventScoreVector) -> serde_json::Value {
    serde_json::json!({ "clip_id": scores.clip_id, "scores": scores.scores })
}

/// Labels whose score is strictly above `threshold`, highest score first,
/// ties broken lexicographically.
pub fn threshold_select(scores: &EventScoreVector, threshold: f64) -> Vec<String> {
    let mut picked: Vec<(&String, f64)> =
        scores.scores.iter().filter(|(_, &p)| p > threshold).map(|(l, &p)| (l, p)).collect();
    picked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    picked.into_iter().map(|(l, _)| l.clone()).collect()
}

/// Splits labels into lowercase word tokens on whitespace, commas and hyphens,
/// keeping the first occurrence of each token.
pub fn tokenize_labels<S: AsRef<str>>(labels: &[S]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for label in labels {
        let lower = label.as_ref().to_lowercase();
        for tok in lower.split(|c: char| c.is_whitespace() || c == ',' || c == '-') {
            if !tok.is_empty() && seen.insert(tok.to_string()) {
                out.push(tok.to_string());
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventVocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl EventVocabulary {
    pub fn from_tokens<I: IntoIterator<Item = String>>(tokens: I) -> Self {
        let set: BTreeSet<String> = tokens.into_iter().collect();
        let tokens: Vec<String> = set.into_iter().collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        EventVocabulary { tokens, index }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn position(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "k": self.len(), "tokens": self.tokens })
    }

    /// Hex SHA-256 over the newline-joined tokens.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let tokens: Vec<String> = serde_json::from_value(value["tokens"].clone())?;
        Ok(Self::from_tokens(tokens))
    }
}

/// Sorted union of the per-clip token lists.
pub fn build_event_vocabulary<S: AsRef<str>>(per_clip: &[Vec<S>]) -> Result<EventVocabulary> {
    if per_clip.is_empty() {
        return Err(Error::InvalidArgument("event vocabulary needs at least one clip".into()));
    }
    let vocab = EventVocabulary::from_tokens(per_clip.iter().flatten().map(|t| t.as_ref().to_string()));
    if vocab.is_empty() {
        log::warn!("event vocabulary is empty: no label passed the threshold");
    }
    Ok(vocab)
}

/// Binary indicator over an event vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventVector {
    pub bits: Vec<u8>,
}

impl EventVector {
    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.bits.iter().map(|&b| b as f64).collect()
    }
}

pub fn encode_one_hot<S: AsRef<str>>(tokens: &[S], vocab: &EventVocabulary) -> EventVector {
    let mut bits = vec![0u8; vocab.len()];
    for tok in tokens {
        if let Some(i) = vocab.position(tok.as_ref()) {
            bits[i] = 1;
        }
    }
    EventVector { bits }
}

/// All 527 probabilities in sorted-label order.
pub fn raw_score_vector(scores: &EventScoreVector) -> Result<Vec<f64>> {
    if scores.class_count() != AUDIOSET_CLASSES {
        return Err(Error::WrongLength { expected: AUDIOSET_CLASSES, actual: scores.class_count() });
    }
    Ok(scores.scores.values().copied().collect())
}

/// Threshold, tokenize: the per-clip token list feeding the one-hot encoder.
pub fn selected_tokens(scores: &EventScoreVector, threshold: f64) -> Vec<String> {
    tokenize_labels(&threshold_select(scores, threshold))
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub const TABLE1: [(&str, f64); 8] = [
        ("clip-clop", 0.601),
        ("speech", 0.552),
        ("horse", 0.516),
        ("animal", 0.506),
        ("ping", 0.244),
        ("bird", 0.209),
        ("chirp, tweet", 0.138),
        ("bird vocalization, bird call, bird song", 0.105),
    ];

    pub fn table1_json() -> String {
        let mut scores = serde_json::Map::new();
        for (l, p) in TABLE1 {
            scores.insert(l.to_string(), serde_json::json!(p));
        }
        for i in 0..AUDIOSET_CLASSES - TABLE1.len() {
            scores.insert(format!("zz class {i:03}"), serde_json::json!(0.0));
        }
        serde_json::json!({ "clip_id": "20080504.horse.drawn.00", "scores": scores }).to_string()
    }
}
