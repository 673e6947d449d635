mod common;

use audiocap::metrics::{bleu, cider, evaluate, meteor, rouge_l};
use common::{oracles, random_corpus};

const CORPORA: u64 = 60;
const TOL: f64 = 1e-6;

fn close(what: &str, seed: u64, got: f64, want: f64) {
    assert!((got - want).abs() <= TOL, "{what} on corpus {seed}: {got} vs oracle {want}");
}

#[test]
fn bleu_matches_oracle() {
    for seed in 0..CORPORA {
        let c = random_corpus(seed);
        for n in 1..=4 {
            close(&format!("BLEU-{n}"), seed, bleu(&c, n), oracles::bleu(&c, n));
        }
    }
}

#[test]
fn rouge_matches_oracle() {
    for seed in 0..CORPORA {
        let c = random_corpus(seed);
        close("ROUGE_L", seed, rouge_l(&c), oracles::rouge_l(&c));
    }
}

#[test]
fn meteor_matches_oracle() {
    for seed in 0..CORPORA {
        let c = random_corpus(seed);
        close("METEOR", seed, meteor(&c), oracles::meteor(&c));
    }
}

#[test]
fn cider_matches_oracle() {
    for seed in 0..CORPORA {
        let c = random_corpus(seed);
        close("CIDEr", seed, cider(&c).unwrap(), oracles::cider(&c));
    }
}

#[test]
fn corpus_report_is_consistent_with_individual_metrics() {
    let c = random_corpus(999);
    let r = evaluate(&c).unwrap();
    assert_eq!(r.bleu4, bleu(&c, 4));
    assert_eq!(r.meteor, meteor(&c));
    assert_eq!(r.cider, cider(&c).unwrap());
}
