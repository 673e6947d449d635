//! Corpus-level caption metrics over multi-reference instances.

mod bleu;
mod cider;
mod meteor;
mod rouge;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::clean_words;

pub use bleu::{bleu, bleu_all};
pub use cider::cider;
pub use meteor::{align, meteor, meteor_sentence, Alignment};
pub use rouge::{lcs_len, rouge_l, rouge_l_sentence, ROUGE_BETA};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub clip_id: String,
    pub candidate: Vec<String>,
    pub references: Vec<Vec<String>>,
}

impl EvalInstance {
    pub fn new(clip_id: impl Into<String>, candidate: &str, references: &[&str]) -> Self {
        EvalInstance {
            clip_id: clip_id.into(),
            candidate: clean_words(candidate),
            references: references.iter().map(|r| clean_words(r)).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub meteor: f64,
    pub rouge_l: f64,
    pub cider: f64,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 7] = ["B-1", "B-2", "B-3", "B-4", "METEOR", "ROUGE_L", "CIDEr"];

    pub fn values(&self) -> [f64; 7] {
        [self.bleu1, self.bleu2, self.bleu3, self.bleu4, self.meteor, self.rouge_l, self.cider]
    }

    /// Two-line plain-text table in the usual column order.
    pub fn table(&self) -> String {
        let head: Vec<String> = Self::COLUMNS.iter().map(|c| format!("{c:>8}")).collect();
        let vals: Vec<String> = self.values().iter().map(|v| format!("{v:>8.4}")).collect();
        format!("{}\n{}\n", head.join(" "), vals.join(" "))
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.table())
    }
}

/// Instances sorted by content so that corpus sums do not depend on input order.
pub(crate) fn canonical(instances: &[EvalInstance]) -> Vec<&EvalInstance> {
    let mut v: Vec<&EvalInstance> = instances.iter().collect();
    v.sort_by(|a, b| (&a.clip_id, &a.candidate, &a.references).cmp(&(&b.clip_id, &b.candidate, &b.references)));
    v
}

fn validate(instances: &[EvalInstance]) -> Result<()> {
    if instances.is_empty() {
        return Err(Error::InvalidArgument("no instances to evaluate".into()));
    }
    if let Some(i) = instances.iter().find(|i| i.references.is_empty()) {
        return Err(Error::InvalidArgument(format!("clip {:?} has no references", i.clip_id)));
    }
    Ok(())
}

/// All seven scores on the same tokenization.
pub fn evaluate(instances: &[EvalInstance]) -> Result<MetricReport> {
    validate(instances)?;
    let [bleu1, bleu2, bleu3, bleu4] = bleu_all(instances);
    Ok(MetricReport {
        bleu1,
        bleu2,
        bleu3,
        bleu4,
        meteor: meteor(instances),
        rouge_l: rouge_l(instances),
        cider: cider(instances)?,
    })
}

#[derive(Debug, Deserialize)]
struct CandidateLine {
    clip_id: String,
    candidate: String,
    #[serde(default)]
    references: Vec<String>,
}

/// Reads `{clip_id, candidate, references[]}` lines. Missing references are
/// filled from `manifest_refs` when given.
/// Raw reference captions for a clip id, if the clip is known.
pub type ReferenceLookup<'a> = &'a dyn Fn(&str) -> Option<Vec<String>>;

pub fn parse_instances(text: &str, manifest_refs: Option<ReferenceLookup>) -> Result<Vec<EvalInstance>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: CandidateLine = serde_json::from_str(line)
            .map_err(|e| Error::InvalidArgument(format!("candidates line {}: {e}", n + 1)))?;
        if !seen.insert(rec.clip_id.clone()) {
            return Err(Error::InvalidArgument(format!("duplicate clip {:?}", rec.clip_id)));
        }
        let refs = if rec.references.is_empty() {
            manifest_refs
                .and_then(|f| f(&rec.clip_id))
                .ok_or_else(|| Error::Manifest(format!("no references for clip {:?}", rec.clip_id)))?
        } else {
            rec.references
        };
        out.push(EvalInstance {
            clip_id: rec.clip_id,
            candidate: clean_words(&rec.candidate),
            references: refs.iter().map(|r| clean_words(r)).collect(),
        });
    }
    Ok(out)
}

pub fn save_report(dir: &Path, report: &MetricReport) -> Result<()> {
    let json = dir.join("metrics.json");
    std::fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let txt = dir.join("metrics.txt");
    std::fs::write(&txt, report.table()).map_err(|e| Error::io(&txt, e))
}
