//! Caption preprocessing, the word vocabulary and word embedding tables.

mod glove;
mod word2vec;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::tensor_io::{self, Tensor};

pub use glove::{load_glove, parse_glove};
pub use word2vec::{train_word2vec, Word2VecConfig};

pub const PAD: &str = "<pad>";
pub const SOS: &str = "<sos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";
pub const SPECIALS: [&str; 4] = [PAD, SOS, EOS, UNK];

pub const PAD_ID: usize = 0;
pub const SOS_ID: usize = 1;
pub const EOS_ID: usize = 2;
pub const UNK_ID: usize = 3;

/// A cleaned caption wrapped in `<sos>` / `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Caption {
    pub clip_id: String,
    pub tokens: Vec<String>,
}

impl Caption {
    /// Tokens without the boundary markers.
    pub fn words(&self) -> &[String] {
        &self.tokens[1..self.tokens.len() - 1]
    }
}

/// Lowercased words with every non-alphanumeric, non-space character removed.
pub fn clean_words(raw: &str) -> Vec<String> {
    let cleaned: String = raw.to_lowercase().chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    cleaned.split_whitespace().map(str::to_string).collect()
}

pub fn preprocess_caption(clip_id: &str, raw: &str) -> Result<Caption> {
    let words = clean_words(raw);
    if words.is_empty() {
        return Err(Error::EmptyCaption(raw.to_string()));
    }
    let mut tokens = Vec::with_capacity(words.len() + 2);
    tokens.push(SOS.to_string());
    tokens.extend(words);
    tokens.push(EOS.to_string());
    Ok(Caption { clip_id: clip_id.to_string(), tokens })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl WordVocabulary {
    /// Specials first, then the given words sorted and deduplicated.
    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        let distinct: BTreeSet<String> = words.into_iter().filter(|w| !SPECIALS.contains(&w.as_str())).collect();
        let words: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).chain(distinct).collect();
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        WordVocabulary { words, index }
    }

    /// Rebuilds a vocabulary from a stored word list, which must already be in canonical order.
    pub fn from_stored(words: Vec<String>) -> Result<Self> {
        let v = Self::from_words(words.iter().cloned());
        if v.words != words {
            return Err(Error::InvalidArgument("stored vocabulary is not in canonical order".into()));
        }
        Ok(v)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Index of `word`, falling back to `<unk>`.
    pub fn id_or_unk(&self, word: &str) -> usize {
        self.id(word).unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id_or_unk(t)).collect()
    }

    /// Hex SHA-256 over the newline-joined word list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

pub fn build_word_vocabulary(captions: &[Caption]) -> Result<WordVocabulary> {
    if captions.is_empty() {
        return Err(Error::InvalidArgument("no captions to build a vocabulary from".into()));
    }
    Ok(WordVocabulary::from_words(captions.iter().flat_map(|c| c.tokens.iter().cloned())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    Word2vec,
    Glove,
    Random,
}

/// Dense vectors aligned row-for-row with a [`WordVocabulary`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub source: EmbeddingSource,
    pub vectors: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct EmbeddingSidecar {
    source: EmbeddingSource,
    dim: usize,
    words: Vec<String>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn vector(&self, id: usize) -> ndarray::ArrayView1<'_, f64> {
        self.vectors.row(id)
    }

    /// Writes `<stem>.act1` and `<stem>.words.json`.
    pub fn save(&self, vocab: &WordVocabulary, stem: &Path) -> Result<()> {
        let tensor =
            Tensor::new(vec![self.vectors.nrows(), self.vectors.ncols()], self.vectors.iter().copied().collect())?;
        let act = stem.with_extension("act1");
        std::fs::write(&act, tensor_io::to_bytes(&tensor, tensor_io::VERSION_F64)).map_err(|e| Error::io(&act, e))?;
        let side = EmbeddingSidecar { source: self.source, dim: self.dim(), words: vocab.words().to_vec() };
        let json = stem.with_extension("words.json");
        std::fs::write(&json, serde_json::to_vec_pretty(&side)?).map_err(|e| Error::io(&json, e))
    }

    pub fn load(stem: &Path) -> Result<(Self, WordVocabulary)> {
        let json = stem.with_extension("words.json");
        let text = std::fs::read_to_string(&json).map_err(|e| Error::io(&json, e))?;
        let side: EmbeddingSidecar = serde_json::from_str(&text)?;
        let vocab = WordVocabulary::from_stored(side.words)?;
        let tensor = tensor_io::load(&stem.with_extension("act1"))?;
        if tensor.dims != [vocab.len(), side.dim] {
            return Err(Error::Dimension(format!(
                "embedding tensor {:?} does not match {} words × {}",
                tensor.dims,
                vocab.len(),
                side.dim
            )));
        }
        let vectors = Array2::from_shape_vec((vocab.len(), side.dim), tensor.data)
            .map_err(|e| Error::Dimension(e.to_string()))?;
        Ok((EmbeddingTable { source: side.source, vectors }, vocab))
    }
}

/// Seeded uniform vectors in [-0.05, 0.05] with `<pad>` pinned to zero.
pub fn random_table(vocab_size: usize, dim: usize, seed: u64) -> EmbeddingTable {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut vectors = Array2::from_shape_fn((vocab_size, dim), |_| rng.gen_range(-0.05..=0.05));
    vectors.row_mut(PAD_ID).fill(0.0);
    EmbeddingTable { source: EmbeddingSource::Random, vectors }
}

/// Row `i` is the vector of `tokens[i]`; unknown words use `<unk>`.
pub fn embed_tokens(tokens: &[String], table: &EmbeddingTable, vocab: &WordVocabulary) -> Array2<f64> {
    let mut out = Array2::zeros((tokens.len(), table.dim()));
    for (mut row, tok) in out.rows_mut().into_iter().zip(tokens) {
        row.assign(&table.vector(vocab.id_or_unk(tok)));
    }
    out
}

pub fn cosine(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    a.dot(&b) / (na * nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn preprocessing_examples() {
        let c = preprocess_caption("c", "A bird chirps, loudly!").unwrap();
        assert_eq!(c.tokens, toks(&["<sos>", "a", "bird", "chirps", "loudly", "<eos>"]));
        let c = preprocess_caption("c", "  Rain.  ").unwrap();
        assert_eq!(c.tokens, toks(&["<sos>", "rain", "<eos>"]));
        assert!(matches!(preprocess_caption("c", "!!!"), Err(Error::EmptyCaption(_))));
        let c = preprocess_caption("c", "Car #2 passes-by").unwrap();
        assert_eq!(c.words(), toks(&["car", "2", "passesby"]));
    }

    #[test]
    fn vocabulary_examples() {
        let caps = vec![
            Caption { clip_id: "1".into(), tokens: toks(&["<sos>", "a", "dog", "<eos>"]) },
            Caption { clip_id: "2".into(), tokens: toks(&["<sos>", "a", "cat", "<eos>"]) },
        ];
        let v = build_word_vocabulary(&caps).unwrap();
        assert_eq!(v.words(), toks(&["<pad>", "<sos>", "<eos>", "<unk>", "a", "cat", "dog"]));
        assert_eq!(v.id(PAD), Some(0));
        let mut rev = caps.clone();
        rev.reverse();
        assert_eq!(build_word_vocabulary(&rev).unwrap(), v);
        assert_eq!(v.hash(), build_word_vocabulary(&rev).unwrap().hash());
        assert!(build_word_vocabulary(&[]).is_err());
        assert!(WordVocabulary::from_stored(toks(&["<pad>", "<sos>", "<eos>", "<unk>", "b", "a"])).is_err());
    }

    #[test]
    fn embedding_lookup() {
        let vocab = WordVocabulary::from_words(toks(&["cat", "dog"]));
        let table = random_table(vocab.len(), 3, 5);
        let z = embed_tokens(&toks(&["<pad>", "<pad>"]), &table, &vocab);
        assert_eq!(z.dim(), (2, 3));
        assert!(z.iter().all(|&v| v == 0.0));
        let one = embed_tokens(&toks(&["cat"]), &table, &vocab);
        assert_eq!(one.row(0), table.vector(vocab.id("cat").unwrap()));
        let mixed = toks(&["dog", "zebra", "cat", "<pad>", "unicorn"]);
        let m = embed_tokens(&mixed, &table, &vocab);
        for (i, w) in mixed.iter().enumerate() {
            let id = match w.as_str() {
                "dog" => 5,
                "cat" => 4,
                "<pad>" => 0,
                _ => 3,
            };
            assert_eq!(m.row(i), table.vectors.row(id));
        }
    }

    #[test]
    fn table_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = WordVocabulary::from_words(toks(&["x", "y"]));
        let table = random_table(vocab.len(), 4, 1);
        let stem = dir.path().join("emb");
        table.save(&vocab, &stem).unwrap();
        let (back, v2) = EmbeddingTable::load(&stem).unwrap();
        assert_eq!(back, table);
        assert_eq!(v2, vocab);
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(raw in "[A-Za-z0-9 ,.!?'-]{1,40}") {
            if let Ok(c) = preprocess_caption("c", &raw) {
                let again = preprocess_caption("c", &c.words().join(" ")).unwrap();
                prop_assert_eq!(again.tokens, c.tokens);
            }
        }

        #[test]
        fn embed_shape(words in prop::collection::vec("[a-d]{1,2}", 0..10), dim in 1usize..6) {
            let vocab = WordVocabulary::from_words(toks(&["a", "b"]));
            let table = random_table(vocab.len(), dim, 0);
            prop_assert_eq!(embed_tokens(&words, &table, &vocab).dim(), (words.len(), dim));
        }
    }
}
