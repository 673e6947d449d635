//! Deliberately naive reference implementations of the caption metrics:
//! linear scans instead of maps, exhaustive enumeration instead of dynamic
//! programming or search.

use audiocap::metrics::EvalInstance;

type Sent = Vec<String>;

fn grams(s: &[String], n: usize) -> Vec<Sent> {
    if s.len() < n {
        return Vec::new();
    }
    (0..=s.len() - n).map(|i| s[i..i + n].to_vec()).collect()
}

fn occurrences(list: &[Sent], g: &Sent) -> usize {
    list.iter().filter(|x| *x == g).count()
}

fn distinct(list: &[Sent]) -> Vec<Sent> {
    let mut out: Vec<Sent> = Vec::new();
    for g in list {
        if !out.contains(g) {
            out.push(g.clone());
        }
    }
    out
}

pub fn bleu(corpus: &[EvalInstance], order: usize) -> f64 {
    let mut num = vec![0usize; order];
    let mut den = vec![0usize; order];
    let mut c = 0;
    let mut r = 0;
    for inst in corpus {
        c += inst.candidate.len();
        let mut best: Option<usize> = None;
        for reference in &inst.references {
            let l = reference.len();
            let d = l.abs_diff(inst.candidate.len());
            best = match best {
                None => Some(l),
                Some(b) => {
                    let bd = b.abs_diff(inst.candidate.len());
                    if d < bd || (d == bd && l < b) {
                        Some(l)
                    } else {
                        Some(b)
                    }
                }
            };
        }
        r += best.unwrap();
        for n in 1..=order {
            let cg = grams(&inst.candidate, n);
            for g in distinct(&cg) {
                let cc = occurrences(&cg, &g);
                let mut most = 0;
                for reference in &inst.references {
                    most = most.max(occurrences(&grams(reference, n), &g));
                }
                num[n - 1] += cc.min(most);
            }
            den[n - 1] += cg.len();
        }
    }
    if c == 0 || num.contains(&0) {
        return 0.0;
    }
    let mut prod = 1.0;
    for n in 0..order {
        prod *= num[n] as f64 / den[n] as f64;
    }
    let bp = if c < r { (1.0 - r as f64 / c as f64).exp() } else { 1.0 };
    bp * prod.powf(1.0 / order as f64)
}

fn is_subsequence(sub: &[&String], s: &[String]) -> bool {
    let mut it = s.iter();
    sub.iter().all(|x| it.any(|y| y == *x))
}

/// Longest common subsequence by trying every subset of `a`.
pub fn lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&String> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| &a[i]).collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

pub fn rouge_l(corpus: &[EvalInstance]) -> f64 {
    let mut total = 0.0;
    for inst in corpus {
        let mut p: f64 = 0.0;
        let mut r: f64 = 0.0;
        for reference in &inst.references {
            let l = lcs(&inst.candidate, reference) as f64;
            p = p.max(l / inst.candidate.len() as f64);
            r = r.max(l / reference.len() as f64);
        }
        if p > 0.0 && r > 0.0 {
            total += (1.0 + 1.44) * p * r / (r + 1.44 * p);
        }
    }
    total / corpus.len() as f64
}

fn chunks(pairs: &[(usize, usize)]) -> usize {
    let mut sorted = pairs.to_vec();
    sorted.sort();
    let mut n = 0;
    for (k, &(i, j)) in sorted.iter().enumerate() {
        if k == 0 || sorted[k - 1].0 + 1 != i || sorted[k - 1].1 + 1 != j {
            n += 1;
        }
    }
    n
}

/// Every injective matching between stem-equal positions, ranked by
/// (exact matches, total matches, fewest chunks).
fn best_alignment(c: &[String], r: &[String]) -> (usize, usize) {
    let cs: Vec<String> = c.iter().map(|w| porter_stemmer::stem(w)).collect();
    let rs: Vec<String> = r.iter().map(|w| porter_stemmer::stem(w)).collect();
    let mut best = (0usize, 0usize, usize::MAX);
    let mut pairs = Vec::new();
    let mut used = vec![false; r.len()];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        c: &[String],
        r: &[String],
        cs: &[String],
        rs: &[String],
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize, usize),
    ) {
        if i == c.len() {
            let exact = pairs.iter().filter(|&&(a, b)| c[a] == r[b]).count();
            let total = pairs.len();
            let ch = chunks(pairs);
            if (exact, total) > (best.0, best.1) || ((exact, total) == (best.0, best.1) && ch < best.2) {
                *best = (exact, total, ch);
            }
            return;
        }
        rec(i + 1, c, r, cs, rs, used, pairs, best);
        for j in 0..r.len() {
            if !used[j] && cs[i] == rs[j] {
                used[j] = true;
                pairs.push((i, j));
                rec(i + 1, c, r, cs, rs, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    rec(0, c, r, &cs, &rs, &mut used, &mut pairs, &mut best);
    (best.1, if best.1 == 0 { 0 } else { best.2 })
}

pub fn meteor(corpus: &[EvalInstance]) -> f64 {
    let mut total = 0.0;
    for inst in corpus {
        let mut top: f64 = 0.0;
        for reference in &inst.references {
            let (m, ch) = best_alignment(&inst.candidate, reference);
            if m == 0 {
                continue;
            }
            let p = m as f64 / inst.candidate.len() as f64;
            let r = m as f64 / reference.len() as f64;
            let f = p * r / (0.9 * p + 0.1 * r);
            let pen = 0.5 * (ch as f64 / m as f64).powi(3);
            top = top.max(f * (1.0 - pen));
        }
        total += top;
    }
    total / corpus.len() as f64
}

pub fn cider(corpus: &[EvalInstance]) -> f64 {
    let big_n = corpus.len() as f64;
    let df = |g: &Sent, n: usize| -> f64 {
        corpus.iter().filter(|inst| inst.references.iter().any(|r| grams(r, n).contains(g))).count() as f64
    };
    // weight vector over an explicit list of keys
    let vector = |s: &[String], n: usize, keys: &[Sent]| -> Vec<f64> {
        let gs = grams(s, n);
        keys.iter().map(|k| occurrences(&gs, k) as f64 * (big_n / df(k, n).max(1.0)).ln()).collect()
    };
    let mut total = 0.0;
    for inst in corpus {
        let mut sum_n = 0.0;
        for n in 1..=4 {
            let mut per_ref = 0.0;
            for reference in &inst.references {
                let mut all = grams(&inst.candidate, n);
                all.extend(grams(reference, n));
                let keys = distinct(&all);
                let a = vector(&inst.candidate, n, &keys);
                let b = vector(reference, n, &keys);
                let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
                let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
                let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
                if na > 0.0 && nb > 0.0 {
                    per_ref += dot / (na * nb);
                }
            }
            sum_n += per_ref / inst.references.len() as f64;
        }
        total += 10.0 * sum_n / 4.0;
    }
    total / big_n
}
