//! Plain TF-IDF CIDEr: no length penalty, no count clipping. Ordered maps
//! keep floating-point summation order fixed across runs.

use std::collections::{BTreeMap, BTreeSet};

use super::{canonical, EvalInstance};
use crate::error::{Error, Result};

const MAX_N: usize = 4;
const SCALE: f64 = 10.0;

type Vector<'a> = BTreeMap<&'a [String], f64>;

/// Raw n-gram counts weighted by `ln(N / max(1, df))`.
fn tfidf<'a>(tokens: &'a [String], n: usize, df: &BTreeMap<&[String], f64>, n_docs: f64) -> Vector<'a> {
    let mut m: Vector = BTreeMap::new();
    for g in tokens.windows(n) {
        *m.entry(g).or_insert(0.0) += 1.0;
    }
    for (g, v) in m.iter_mut() {
        *v *= (n_docs / df.get(g).copied().unwrap_or(0.0).max(1.0)).ln();
    }
    m
}

fn cosine(a: &Vector, b: &Vector) -> f64 {
    let na: f64 = a.values().map(|v| v * v).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, v)| b.get(g).map(|w| v * w)).sum();
    dot / (na * nb)
}

/// Needs at least two clips for the document frequencies to mean anything.
pub fn cider(instances: &[EvalInstance]) -> Result<f64> {
    if instances.len() < 2 {
        return Err(Error::CorpusTooSmall(format!("CIDEr needs at least 2 clips, got {}", instances.len())));
    }
    let insts = canonical(instances);
    let n_docs = insts.len() as f64;
    let mut total = 0.0;
    let mut df: Vec<BTreeMap<&[String], f64>> = vec![BTreeMap::new(); MAX_N];
    for inst in &insts {
        for n in 1..=MAX_N {
            let grams: BTreeSet<&[String]> = inst.references.iter().flat_map(|r| r.windows(n)).collect();
            for g in grams {
                *df[n - 1].entry(g).or_insert(0.0) += 1.0;
            }
        }
    }
    for inst in &insts {
        let mut per_n = 0.0;
        for n in 1..=MAX_N {
            let cand = tfidf(&inst.candidate, n, &df[n - 1], n_docs);
            let mut acc = 0.0;
            for r in &inst.references {
                acc += cosine(&cand, &tfidf(r, n, &df[n - 1], n_docs));
            }
            per_n += acc / inst.references.len() as f64;
        }
        total += SCALE * per_n / MAX_N as f64;
    }
    Ok(total / n_docs)
}
