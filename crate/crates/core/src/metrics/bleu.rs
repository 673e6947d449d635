use std::collections::HashMap;

use super::{canonical, EvalInstance};

fn counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in tokens.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

/// Closest reference length; the shorter one wins a tie.
fn closest_ref_len(cand: usize, refs: &[Vec<String>]) -> usize {
    refs.iter().map(|r| r.len()).min_by_key(|&l| (l.abs_diff(cand), l)).unwrap_or(0)
}

/// Corpus BLEU-1 … BLEU-4.
pub fn bleu_all(instances: &[EvalInstance]) -> [f64; 4] {
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c, mut r) = (0usize, 0usize);
    for inst in canonical(instances) {
        c += inst.candidate.len();
        r += closest_ref_len(inst.candidate.len(), &inst.references);
        for n in 1..=4 {
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for reference in &inst.references {
                for (g, k) in counts(reference, n) {
                    let e = max_ref.entry(g).or_insert(0);
                    *e = (*e).max(k);
                }
            }
            for (g, k) in counts(&inst.candidate, n) {
                matched[n - 1] += k.min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += k;
            }
        }
    }
    if c == 0 {
        return [0.0; 4];
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    let mut out = [0.0; 4];
    let mut log_sum = 0.0;
    for n in 0..4 {
        if matched[n] == 0 {
            break;
        }
        log_sum += (matched[n] as f64 / total[n] as f64).ln();
        out[n] = bp * (log_sum / (n + 1) as f64).exp();
    }
    out
}

/// Corpus BLEU-n for `n` in 1..=4.
pub fn bleu(instances: &[EvalInstance], n: usize) -> f64 {
    assert!((1..=4).contains(&n), "BLEU order {n} outside 1..=4");
    bleu_all(instances)[n - 1]
}
