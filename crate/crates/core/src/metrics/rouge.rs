use super::{canonical, EvalInstance};

pub const ROUGE_BETA: f64 = 1.2;

pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best precision and best recall over the references, combined into F_β.
pub fn rouge_l_sentence(candidate: &[String], references: &[Vec<String>]) -> f64 {
    let (mut p, mut r) = (0.0f64, 0.0f64);
    for reference in references {
        let l = lcs_len(candidate, reference) as f64;
        if !candidate.is_empty() {
            p = p.max(l / candidate.len() as f64);
        }
        if !reference.is_empty() {
            r = r.max(l / reference.len() as f64);
        }
    }
    if p == 0.0 || r == 0.0 {
        return 0.0;
    }
    let b2 = ROUGE_BETA * ROUGE_BETA;
    (1.0 + b2) * p * r / (r + b2 * p)
}

pub fn rouge_l(instances: &[EvalInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    let sum: f64 = canonical(instances).iter().map(|i| rouge_l_sentence(&i.candidate, &i.references)).sum();
    sum / instances.len() as f64
}
