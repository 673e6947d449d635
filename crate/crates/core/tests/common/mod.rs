#![allow(dead_code)]

pub mod oracles;

use audiocap::metrics::EvalInstance;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small pool with inflected variants so stem matching gets exercised.
pub const POOL: [&str; 14] =
    ["a", "dog", "dogs", "bark", "barks", "barking", "the", "rain", "car", "cars", "pass", "passing", "loud", "water"];

fn sentence(rng: &mut ChaCha8Rng, max: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max);
    (0..n).map(|_| POOL.choose(rng).unwrap().to_string()).collect()
}

/// 2–5 clips, candidates and 1–5 references of 1–8 tokens each.
pub fn random_corpus(seed: u64) -> Vec<EvalInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clips = rng.gen_range(2..=5);
    (0..clips)
        .map(|i| {
            let candidate = sentence(&mut rng, 8);
            let refs = rng.gen_range(1..=5);
            EvalInstance {
                clip_id: format!("clip{i:02}"),
                candidate,
                references: (0..refs).map(|_| sentence(&mut rng, 8)).collect(),
            }
        })
        .collect()
}

pub mod toy {
    use std::path::Path;

    use audiocap::data::expand_dataset;
    use audiocap::data::TrainingSet;
    use audiocap::model::{EventMode, ModelConfig};
    use audiocap::pipeline::RunConfig;
    use audiocap::text::{build_word_vocabulary, preprocess_caption, Caption, EmbeddingSource, WordVocabulary};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const WORDS: [&str; 24] = [
        "dog", "barks", "loudly", "near", "a", "busy", "road", "while", "cars", "pass", "rain", "falls", "on", "metal",
        "roof", "birds", "chirp", "in", "the", "morning", "wind", "blows", "water", "flows",
    ];
    const LABELS: [&str; 8] = [
        "Speech",
        "Dog",
        "Rain",
        "Vehicle",
        "Car passing by",
        "Bird vocalization, bird call, bird song",
        "Water",
        "Wind noise (microphone)",
    ];

    pub fn sentence(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> String {
        let n = rng.gen_range(lo..=hi);
        (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    }

    fn write_wav(path: &Path, freq: f64, rng: &mut ChaCha8Rng) {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: 16_000,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for i in 0..8_000 {
            let t = i as f64 / 16_000.0;
            let s = 0.5 * (2.0 * std::f64::consts::PI * freq * t).sin() + rng.gen_range(-0.05..0.05);
            w.write_sample((s * 32_000.0) as i16).unwrap();
        }
        w.finalize().unwrap();
    }

    pub fn write_scores(path: &Path, clip: &str, rng: &mut ChaCha8Rng) {
        let scores: serde_json::Map<String, serde_json::Value> =
            LABELS.iter().map(|l| (l.to_string(), serde_json::json!(rng.gen_range(0.0..0.8)))).collect();
        let doc = serde_json::json!({ "clip_id": clip, "scores": scores });
        std::fs::write(path, doc.to_string()).unwrap();
    }

    fn write_manifest(path: &Path, clips: &[String], rng: &mut ChaCha8Rng) {
        let mut text = String::from("file_name,caption_1,caption_2\n");
        for c in clips {
            text += &format!("{c}.wav,{},{}\n", sentence(rng, 3, 6), sentence(rng, 3, 6));
        }
        std::fs::write(path, text).unwrap();
    }

    /// Eleven one-second-ish tone clips with tagger scores and two captions
    /// each: six for development, two for validation, three for evaluation.
    /// Returns a small-model config writing to `root/out`.
    pub fn pipeline_fixture(root: &Path) -> RunConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for d in ["audio", "scores"] {
            std::fs::create_dir_all(root.join(d)).unwrap();
        }
        let clips: Vec<String> = (0..11).map(|i| format!("clip{i:02}")).collect();
        for (i, c) in clips.iter().enumerate() {
            write_wav(&root.join("audio").join(format!("{c}.wav")), 220.0 + 180.0 * i as f64, &mut rng);
            write_scores(&root.join("scores").join(format!("{c}.events.json")), c, &mut rng);
        }
        write_manifest(&root.join("development.csv"), &clips[..6], &mut rng);
        write_manifest(&root.join("validation.csv"), &clips[6..8], &mut rng);
        write_manifest(&root.join("evaluation.csv"), &clips[8..], &mut rng);

        let model = ModelConfig {
            feature_dim: 16,
            event_mode: EventMode::OneHot { threshold: 0.1 },
            bigru1_cells: 4,
            bigru2_cells: 8,
            ling_gru_cells: 16,
            dec_gru_cells: 16,
            embedding_dim: 8,
            max_caption_len: 8,
            batch_size: 8,
            epochs: 5,
            seed: 11,
            ..Default::default()
        };
        let mut cfg = RunConfig { model, ..Default::default() };
        cfg.paths.development = root.join("development.csv");
        cfg.paths.validation = Some(root.join("validation.csv"));
        cfg.paths.evaluation = Some(root.join("evaluation.csv"));
        cfg.paths.audio_dir = root.join("audio");
        cfg.paths.scores_dir = root.join("scores");
        cfg.paths.out_dir = root.join("out");
        cfg.embedding.source = EmbeddingSource::Word2vec;
        cfg.embedding.word2vec.epochs = 3;
        cfg
    }

    pub struct Memorization {
        pub config: ModelConfig,
        pub vocab: WordVocabulary,
        pub captions: Vec<Caption>,
        pub inputs: Vec<(String, Vec<f64>)>,
        pub set: TrainingSet,
    }

    /// Eight clips with random 64-dim features, a 4-dim event vector and one
    /// 5–7-word caption each. `events` supplies the event vector per clip;
    /// with `paired`, clips 2k and 2k+1 share their features so only the
    /// events tell them apart.
    pub fn memorization(seed: u64, paired: bool, events: impl Fn(usize) -> Vec<f64>) -> Memorization {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut captions = Vec::new();
        let mut inputs: Vec<(String, Vec<f64>)> = Vec::new();
        for i in 0..8 {
            let id = format!("clip{i}");
            captions.push(preprocess_caption(&id, &sentence(&mut rng, 5, 7)).unwrap());
            let mut x: Vec<f64> = if paired && i % 2 == 1 {
                inputs[i - 1].1[..64].to_vec()
            } else {
                (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect()
            };
            let e = events(i);
            assert_eq!(e.len(), 4);
            x.extend(e);
            inputs.push((id, x));
        }
        let vocab = build_word_vocabulary(&captions).unwrap();
        let config = ModelConfig {
            feature_dim: 64,
            event_dim: 4,
            event_mode: EventMode::OneHot { threshold: 0.1 },
            vocab_size: vocab.len(),
            epochs: 300,
            seed,
            ..Default::default()
        };
        let set = expand_dataset(&inputs, &captions, &vocab, config.max_caption_len).unwrap();
        Memorization { config, vocab, captions, inputs, set }
    }
}
