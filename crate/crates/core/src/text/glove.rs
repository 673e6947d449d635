use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingSource, EmbeddingTable, WordVocabulary, PAD_ID};
use crate::error::{Error, Result};

/// Builds a table from GloVe text (`word v1 v2 ...` per line). Vocabulary
/// words missing from the text get seeded uniform vectors in [-0.05, 0.05].
pub fn parse_glove(text: &str, vocab: &WordVocabulary, seed: u64) -> Result<EmbeddingTable> {
    let mut dim = None;
    let mut found: Vec<Option<Vec<f64>>> = vec![None; vocab.len()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(' ');
        let word = parts.next().unwrap_or_default();
        let values = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Embedding { line: lineno + 1, msg: format!("unparseable float {p:?}") })
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = *dim.get_or_insert(values.len());
        if d == 0 || values.len() != d {
            return Err(Error::Embedding {
                line: lineno + 1,
                msg: format!("expected {d} values, found {}", values.len()),
            });
        }
        if let Some(id) = vocab.id(word) {
            found[id] = Some(values);
        }
    }
    let dim = dim.ok_or(Error::Embedding { line: 0, msg: "no vectors in file".into() })?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = ndarray::Array2::zeros((vocab.len(), dim));
    for (id, mut row) in vectors.rows_mut().into_iter().enumerate() {
        let fallback: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.05..=0.05)).collect();
        match &found[id] {
            Some(v) => row.assign(&ndarray::ArrayView1::from(v.as_slice())),
            None => row.assign(&ndarray::ArrayView1::from(fallback.as_slice())),
        }
    }
    vectors.row_mut(PAD_ID).fill(0.0);
    Ok(EmbeddingTable { source: EmbeddingSource::Glove, vectors })
}

pub fn load_glove(path: &Path, vocab: &WordVocabulary, seed: u64) -> Result<EmbeddingTable> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_glove(&text, vocab, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(words: &[&str]) -> WordVocabulary {
        WordVocabulary::from_words(words.iter().map(|w| w.to_string()))
    }

    #[test]
    fn reads_vectors_and_infers_dim() {
        let v = vocab(&["cat"]);
        let t = parse_glove("cat 1.0 0.0\ndog 0.0 1.0", &v, 0).unwrap();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.vector(v.id("cat").unwrap()).to_vec(), vec![1.0, 0.0]);
        assert!(t.vector(PAD_ID).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oov_vectors_are_seeded() {
        let v = vocab(&["cat", "bird"]);
        let a = parse_glove("cat 1.0 0.0\n", &v, 7).unwrap();
        let b = parse_glove("cat 1.0 0.0\n", &v, 7).unwrap();
        let bird = v.id("bird").unwrap();
        assert_eq!(a.vector(bird), b.vector(bird));
        assert!(a.vector(bird).iter().all(|x| x.abs() <= 0.05));
        let c = parse_glove("cat 1.0 0.0\n", &v, 8).unwrap();
        assert_ne!(a.vector(bird), c.vector(bird));
    }

    #[test]
    fn malformed_files() {
        let v = vocab(&["cat"]);
        assert!(matches!(parse_glove("cat 1.0 0.0\ndog 1.0\n", &v, 0), Err(Error::Embedding { line: 2, .. })));
        assert!(matches!(parse_glove("cat 1.0 zero\n", &v, 0), Err(Error::Embedding { line: 1, .. })));
        assert!(parse_glove("", &v, 0).is_err());
    }

    #[test]
    fn two_hundred_dimensional_lines() {
        let v = vocab(&["the"]);
        let line = format!("the {}", vec!["0.5"; 200].join(" "));
        assert_eq!(parse_glove(&line, &v, 0).unwrap().dim(), 200);
    }
}
