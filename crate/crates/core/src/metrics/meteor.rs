//! Unigram alignment in two stages (exact, then Porter stem) with a
//! fragmentation penalty.
//!
//! Among alignments with the most exact matches and then the most total
//! matches, the one with the fewest chunks is chosen by depth-first search.
//! Match counts are fixed up front (per-word and per-stem minima), so the
//! search only has to decide which copies pair up.

use std::collections::HashMap;

use porter_stemmer::stem;

use super::{canonical, EvalInstance};

const ALPHA: f64 = 0.9;
const BETA: f64 = 3.0;
const GAMMA: f64 = 0.5;
/// Search nodes before settling for the best alignment found so far.
const NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// `(candidate position, reference position)`, ascending in the candidate.
    pub matches: Vec<(usize, usize)>,
    pub exact: usize,
    pub chunks: usize,
}

fn tally<'a>(keys: impl Iterator<Item = &'a str>) -> HashMap<&'a str, usize> {
    let mut m = HashMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

struct Search<'a> {
    cand: &'a [String],
    reference: &'a [String],
    cstem: Vec<String>,
    rstem: Vec<String>,
    /// exact matches still owed, per word
    need_exact: HashMap<&'a str, usize>,
    /// total matches still owed, per stem
    need_total: HashMap<String, usize>,
    /// candidate copies left at or after the cursor
    left_word: HashMap<&'a str, usize>,
    left_stem: HashMap<String, usize>,
    /// unused reference copies
    free_word: HashMap<&'a str, usize>,
    used: Vec<bool>,
    path: Vec<(usize, usize)>,
    chunks: usize,
    best: Option<(usize, Vec<(usize, usize)>)>,
    nodes: usize,
}

impl<'a> Search<'a> {
    fn feasible(&self) -> bool {
        self.need_exact.iter().all(|(w, &n)| n <= self.left_word[w] && n <= self.free_word[w])
            && self.need_total.iter().all(|(s, &n)| n <= self.left_stem[s])
    }

    fn run(&mut self, i: usize) {
        self.nodes += 1;
        if self.best.as_ref().is_some_and(|(c, _)| self.chunks >= *c) {
            return;
        }
        if i == self.cand.len() {
            self.best = Some((self.chunks, self.path.clone()));
            return;
        }
        if self.nodes > NODE_BUDGET && self.best.is_some() {
            return;
        }
        let w = self.cand[i].as_str();
        let s = self.cstem[i].clone();
        *self.left_word.get_mut(w).expect("tallied") -= 1;
        *self.left_stem.get_mut(&s).expect("tallied") -= 1;

        // Prefer the reference position that extends the current chunk.
        let next = self.path.last().map_or(0, |&(_, j)| j + 1);
        let order = (next..self.reference.len()).chain(0..next.min(self.reference.len()));
        for j in order.collect::<Vec<_>>() {
            if self.used[j] || self.rstem[j] != s || self.need_total[&s] == 0 {
                continue;
            }
            let exact = self.reference[j] == self.cand[i];
            if exact && self.need_exact[w] == 0 {
                continue;
            }
            let rw = self.reference[j].as_str();
            let new_chunk = !matches!(self.path.last(), Some(&(pi, pj)) if pi + 1 == i && pj + 1 == j);
            self.used[j] = true;
            *self.free_word.get_mut(rw).expect("tallied") -= 1;
            *self.need_total.get_mut(&s).expect("tallied") -= 1;
            if exact {
                *self.need_exact.get_mut(w).expect("tallied") -= 1;
            }
            self.chunks += new_chunk as usize;
            self.path.push((i, j));
            if self.feasible() {
                self.run(i + 1);
            }
            self.path.pop();
            self.chunks -= new_chunk as usize;
            if exact {
                *self.need_exact.get_mut(w).expect("tallied") += 1;
            }
            *self.need_total.get_mut(&s).expect("tallied") += 1;
            *self.free_word.get_mut(rw).expect("tallied") += 1;
            self.used[j] = false;
        }
        if self.feasible() {
            self.run(i + 1);
        }
        *self.left_word.get_mut(w).expect("tallied") += 1;
        *self.left_stem.get_mut(&s).expect("tallied") += 1;
    }
}

pub fn align(cand: &[String], reference: &[String]) -> Alignment {
    let cstem: Vec<String> = cand.iter().map(|w| stem(w)).collect();
    let rstem: Vec<String> = reference.iter().map(|w| stem(w)).collect();
    let cw = tally(cand.iter().map(String::as_str));
    let rw = tally(reference.iter().map(String::as_str));
    let cs = tally(cstem.iter().map(String::as_str));
    let rs = tally(rstem.iter().map(String::as_str));

    let mut free_word = rw.clone();
    let mut need_exact = HashMap::new();
    for (&w, &n) in &cw {
        need_exact.insert(w, n.min(rw.get(w).copied().unwrap_or(0)));
        free_word.entry(w).or_insert(0);
    }
    let need_total: HashMap<String, usize> =
        cs.iter().map(|(&s, &n)| (s.to_string(), n.min(rs.get(s).copied().unwrap_or(0)))).collect();
    let mut search = Search {
        cand,
        reference,
        left_word: cw,
        left_stem: cs.iter().map(|(&s, &n)| (s.to_string(), n)).collect(),
        cstem,
        rstem,
        need_exact,
        need_total,
        free_word,
        used: vec![false; reference.len()],
        path: Vec::new(),
        chunks: 0,
        best: None,
        nodes: 0,
    };
    search.run(0);
    let (chunks, matches) = search.best.expect("the count targets are always reachable");
    let exact = matches.iter().filter(|&&(i, j)| cand[i] == reference[j]).count();
    Alignment { matches, exact, chunks }
}

fn score(cand_len: usize, ref_len: usize, a: &Alignment) -> f64 {
    let m = a.matches.len() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let p = m / cand_len as f64;
    let r = m / ref_len as f64;
    let f = p * r / (ALPHA * p + (1.0 - ALPHA) * r);
    let penalty = GAMMA * (a.chunks as f64 / m).powf(BETA);
    f * (1.0 - penalty)
}

/// Best score over the references.
pub fn meteor_sentence(candidate: &[String], references: &[Vec<String>]) -> f64 {
    references.iter().map(|r| score(candidate.len(), r.len(), &align(candidate, r))).fold(0.0, f64::max)
}

pub fn meteor(instances: &[EvalInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let sum: f64 = canonical(instances).iter().map(|i| meteor_sentence(&i.candidate, &i.references)).sum();
    sum / instances.len() as f64
}
