//! Log-Mel energy extraction, temporal averaging and pretrained-vector
//! ingestion for the acoustic side of the captioner.

use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::{self, Tensor};

/// Additive floor applied before the logarithm.
pub const LOG_FLOOR: f64 = 1e-10;
pub const DEFAULT_N_MELS: usize = 64;
pub const DEFAULT_WINDOW_MS: f64 = 96.0;
pub const PRETRAINED_DIM: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub clip_id: String,
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioClip {
    pub fn new(clip_id: impl Into<String>, sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if samples.is_empty() {
            return Err(Error::EmptyAudio);
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(AudioClip { clip_id: clip_id.into(), sample_rate, samples })
    }
}

/// Reads a RIFF/WAVE file, normalizes to [-1, 1] and downmixes by channel mean.
pub fn load_wav(path: &Path) -> Result<AudioClip> {
    let mut reader = hound::WavReader::open(path).map_err(|e| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedCodec(path.display().to_string()),
        other => Error::Wav(other.to_string()),
    })?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Wav("zero channels".into()));
    }
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Wav(e.to_string()))?,
        (hound::SampleFormat::Int, bits @ (8 | 16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| v as f64 / scale))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Wav(e.to_string()))?
        }
        (fmt, bits) => {
            return Err(Error::UnsupportedCodec(format!("{fmt:?} {bits}-bit")));
        }
    };
    if interleaved.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let samples = interleaved.chunks(channels).map(|frame| frame.iter().sum::<f64>() / channels as f64).collect();
    let clip_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    AudioClip::new(clip_id, spec.sample_rate, samples)
}

/// Analysis-window geometry derived from a sample rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Framing {
    pub window: usize,
    pub hop: usize,
    pub fft_size: usize,
}

impl Framing {
    pub fn new(sample_rate: u32, window_ms: f64, overlap: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&overlap) {
            return Err(Error::InvalidArgument(format!("overlap {overlap} not in [0,1)")));
        }
        let window = (window_ms / 1000.0 * sample_rate as f64).round() as usize;
        if window < 2 {
            return Err(Error::InvalidArgument("analysis window under 2 samples".into()));
        }
        let hop = ((window as f64) * (1.0 - overlap)).floor().max(1.0) as usize;
        Ok(Framing { window, hop, fft_size: window.next_power_of_two() })
    }

    /// Number of full frames in `n` samples, or `None` when shorter than one window.
    pub fn frame_count(&self, n: usize) -> Option<usize> {
        (n >= self.window).then(|| (n - self.window) / self.hop + 1)
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular, area-normalized Mel filterbank of shape `n_mels × (fft_size/2 + 1)`.
pub fn mel_filterbank(sample_rate: u32, fft_size: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let n_bins = fft_size / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let mel_max = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| mel_to_hz(mel_max * i as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = sample_rate as f64 / fft_size as f64;
    (0..n_mels)
        .map(|m| {
            let (lo, center, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let norm = 2.0 / (hi - lo);
            (0..n_bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    let w = if f <= lo || f >= hi {
                        0.0
                    } else if f <= center {
                        (f - lo) / (center - lo)
                    } else {
                        (hi - f) / (hi - center)
                    };
                    w * norm
                })
                .collect()
        })
        .collect()
}

pub fn hamming(len: usize) -> Vec<f64> {
    let denom = (len - 1) as f64;
    (0..len).map(|n| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * n as f64 / denom).cos()).collect()
}

/// Frame-by-Mel matrix of natural-log Mel energies.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelMatrix {
    pub frames: usize,
    pub n_mels: usize,
    /// Row-major `frames × n_mels`.
    pub values: Vec<f64>,
}

impl LogMelMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let frames = rows.len();
        if frames == 0 {
            return Err(Error::Dimension("log-Mel matrix needs at least one frame".into()));
        }
        let n_mels = rows[0].len();
        if rows.iter().any(|r| r.len() != n_mels) {
            return Err(Error::Dimension("ragged log-Mel rows".into()));
        }
        Ok(LogMelMatrix { frames, n_mels, values: rows.concat() })
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

pub fn compute_log_mel(clip: &AudioClip, window_ms: f64, overlap: f64, n_mels: usize) -> Result<LogMelMatrix> {
    if n_mels == 0 {
        return Err(Error::InvalidArgument("n_mels must be at least 1".into()));
    }
    let framing = Framing::new(clip.sample_rate, window_ms, overlap)?;
    let frames = framing
        .frame_count(clip.samples.len())
        .ok_or(Error::ClipTooShort { samples: clip.samples.len(), window: framing.window })?;
    let fb = mel_filterbank(clip.sample_rate, framing.fft_size, n_mels);
    let window = hamming(framing.window);
    let fft = FftPlanner::new().plan_fft_forward(framing.fft_size);
    let n_bins = framing.fft_size / 2 + 1;

    let mut buf = vec![Complex::new(0.0, 0.0); framing.fft_size];
    let mut magnitude = vec![0.0; n_bins];
    let mut values = Vec::with_capacity(frames * n_mels);
    for t in 0..frames {
        let start = t * framing.hop;
        let segment = &clip.samples[start..start + framing.window];
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, (&s, &w)) in buf.iter_mut().zip(segment.iter().zip(&window)) {
            b.re = s * w;
        }
        fft.process(&mut buf);
        for (m, c) in magnitude.iter_mut().zip(&buf) {
            *m = c.norm();
        }
        for filter in &fb {
            let energy: f64 = filter.iter().zip(&magnitude).map(|(w, m)| w * m).sum();
            values.push((energy + LOG_FLOOR).ln());
        }
    }
    Ok(LogMelMatrix { frames, n_mels, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    /// Temporal average of log-Mel energies.
    Lma,
    /// Externally computed 2048-dim embedding.
    Pretrained,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

/// Column means over the time axis.
pub fn temporal_average(mel: &LogMelMatrix) -> FeatureVector {
    let mut acc = vec![0.0; mel.n_mels];
    for t in 0..mel.frames {
        for (a, v) in acc.iter_mut().zip(mel.row(t)) {
            *a += v;
        }
    }
    let scale = 1.0 / mel.frames as f64;
    FeatureVector { kind: FeatureKind::Lma, values: acc.into_iter().map(|a| a * scale).collect() }
}

pub fn load_pretrained_vector(path: &Path) -> Result<FeatureVector> {
    let tensor = tensor_io::load(path)?;
    if tensor.rank() != 1 {
        return Err(Error::TensorFormat(format!("pretrained vector must be rank 1, got rank {}", tensor.rank())));
    }
    if tensor.data.len() != PRETRAINED_DIM {
        return Err(Error::WrongLength { expected: PRETRAINED_DIM, actual: tensor.data.len() });
    }
    if let Some(i) = tensor.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(FeatureVector { kind: FeatureKind::Pretrained, values: tensor.data })
}

pub fn save_feature_vector(path: &Path, v: &FeatureVector) -> Result<()> {
    tensor_io::save(path, &Tensor::vector(v.values.clone()))
}

/// Loads any rank-1 feature file, checking its length against `expected`.
pub fn load_feature_vector(path: &Path, kind: FeatureKind, expected: usize) -> Result<FeatureVector> {
    let tensor = tensor_io::load(path)?;
    if tensor.rank() != 1 || tensor.data.len() != expected {
        return Err(Error::WrongLength { expected, actual: tensor.data.len() });
    }
    if let Some(i) = tensor.data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    Ok(FeatureVector { kind, values: tensor.data })
}

/// Full LMA path for one file.
pub fn extract_lma(path: &Path, n_mels: usize) -> Result<FeatureVector> {
    let clip = load_wav(path)?;
    let mel = compute_log_mel(&clip, DEFAULT_WINDOW_MS, 0.5, n_mels)?;
    Ok(temporal_average(&mel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn write_wav(path: &Path, spec: hound::WavSpec, frames: &[Vec<f64>]) {
        let mut w = hound::WavWriter::create(path, spec).unwrap();
        for frame in frames {
            for &s in frame {
                match (spec.sample_format, spec.bits_per_sample) {
                    (hound::SampleFormat::Float, _) => w.write_sample(s as f32).unwrap(),
                    (_, 8) => w.write_sample((s * 127.0).round() as i8).unwrap(),
                    (_, 16) => w.write_sample((s * 32767.0).round() as i16).unwrap(),
                    (_, 24) => w.write_sample((s * 8_388_607.0).round() as i32).unwrap(),
                    _ => unreachable!(),
                }
            }
        }
        w.finalize().unwrap();
    }

    fn int_spec(channels: u16, bits: u16, rate: u32) -> hound::WavSpec {
        hound::WavSpec { channels, sample_rate: rate, bits_per_sample: bits, sample_format: hound::SampleFormat::Int }
    }

    #[test]
    fn silence_loads_as_zeros() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.wav");
        write_wav(&p, int_spec(1, 16, 44100), &vec![vec![0.0]; 44100]);
        let clip = load_wav(&p).unwrap();
        assert_eq!(clip.sample_rate, 44100);
        assert_eq!(clip.samples.len(), 44100);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn stereo_opposite_channels_cancel() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("st.wav");
        write_wav(&p, int_spec(2, 16, 16000), &vec![vec![0.5, -0.5]; 1000]);
        let clip = load_wav(&p).unwrap();
        assert_eq!(clip.samples.len(), 1000);
        assert!(clip.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn sine_matches_quantized_formula() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sine.wav");
        let sr = 22050;
        let frames: Vec<Vec<f64>> =
            (0..sr).map(|n| vec![0.8 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr as f64).sin()]).collect();
        write_wav(&p, int_spec(1, 16, sr), &frames);
        let clip = load_wav(&p).unwrap();
        for (n, &s) in clip.samples.iter().enumerate() {
            let expect =
                (0.8 * (2.0 * std::f64::consts::PI * 440.0 * n as f64 / sr as f64).sin() * 32767.0).round() / 32768.0;
            assert!((s - expect).abs() < 1e-4);
        }
    }

    #[test]
    fn other_bit_depths_are_normalized() {
        let dir = tempfile::tempdir().unwrap();
        for (bits, fmt) in
            [(8, hound::SampleFormat::Int), (24, hound::SampleFormat::Int), (32, hound::SampleFormat::Float)]
        {
            let p = dir.path().join(format!("b{bits}.wav"));
            let spec = hound::WavSpec { channels: 1, sample_rate: 8000, bits_per_sample: bits, sample_format: fmt };
            write_wav(&p, spec, &[vec![0.5], vec![-0.5], vec![0.0]]);
            let clip = load_wav(&p).unwrap();
            assert!((clip.samples[0] - 0.5).abs() < 1e-2, "{bits}: {:?}", clip.samples);
            assert!((clip.samples[1] + 0.5).abs() < 1e-2);
            assert!(clip.samples.iter().all(|s| (-1.0..=1.0).contains(s)));
        }
    }

    #[test]
    fn wav_errors() {
        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.wav");
        std::fs::write(&junk, b"not a riff file at all").unwrap();
        assert!(matches!(load_wav(&junk), Err(Error::Wav(_))));

        let empty = dir.path().join("empty.wav");
        write_wav(&empty, int_spec(1, 16, 8000), &[]);
        assert!(matches!(load_wav(&empty), Err(Error::EmptyAudio)));

        assert!(matches!(load_wav(&dir.path().join("missing.wav")), Err(Error::Io { .. })));
    }

    #[test]
    fn silence_hits_the_floor_everywhere() {
        let clip = AudioClip::new("s", 16000, vec![0.0; 16000]).unwrap();
        let mel = compute_log_mel(&clip, 96.0, 0.5, 64).unwrap();
        assert!(mel.values.iter().all(|&v| v == LOG_FLOOR.ln()));
        assert_eq!(mel.n_mels, 64);
    }

    #[test]
    fn ten_second_clip_has_64_bins_and_expected_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<f64> = (0..441_000).map(|_| rng.gen_range(-0.1..0.1)).collect();
        let clip = AudioClip::new("n", 44100, samples).unwrap();
        let mel = compute_log_mel(&clip, 96.0, 0.5, 64).unwrap();
        assert_eq!(mel.n_mels, 64);
        // W = 4234, H = 2117
        assert_eq!(mel.frames, (441_000 - 4234) / 2117 + 1);
    }

    #[test]
    fn frame_count_formula() {
        for sr in [8000u32, 16000, 22050, 44100, 48000] {
            let f = Framing::new(sr, 96.0, 0.5).unwrap();
            let w = (0.096 * sr as f64).round() as usize;
            assert_eq!(f.window, w);
            assert_eq!(f.hop, w / 2);
            assert!(f.fft_size >= w && f.fft_size.is_power_of_two() && f.fft_size / 2 < w);
            for n in [w, w + 1, w + f.hop - 1, w + f.hop, 3 * w + 7] {
                let clip = AudioClip::new("c", sr, vec![0.01; n]).unwrap();
                let mel = compute_log_mel(&clip, 96.0, 0.5, 8).unwrap();
                assert_eq!(mel.frames, (n - w) / (w / 2) + 1);
            }
            let short = AudioClip::new("c", sr, vec![0.0; w - 1]).unwrap();
            assert!(matches!(compute_log_mel(&short, 96.0, 0.5, 8), Err(Error::ClipTooShort { .. })));
        }
    }

    /// Reference pipeline with a direct O(N^2) DFT and independently built filters.
    fn reference_log_mel(samples: &[f64], sr: u32, n_mels: usize) -> Vec<Vec<f64>> {
        let w = (0.096 * sr as f64).round() as usize;
        let h = w / 2;
        let mut nfft = 1;
        while nfft < w {
            nfft *= 2;
        }
        let pi = std::f64::consts::PI;
        let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
        let inv = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
        let top = mel(sr as f64 / 2.0);
        let pts: Vec<f64> = (0..n_mels + 2).map(|i| inv(top * i as f64 / (n_mels as f64 + 1.0))).collect();
        let mut out = Vec::new();
        let mut t = 0;
        while t * h + w <= samples.len() {
            let frame: Vec<f64> = (0..w)
                .map(|n| samples[t * h + n] * (0.54 - 0.46 * (2.0 * pi * n as f64 / (w as f64 - 1.0)).cos()))
                .collect();
            let mags: Vec<f64> = (0..=nfft / 2)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (n, x) in frame.iter().enumerate() {
                        let ang = -2.0 * pi * (k * n % nfft) as f64 / nfft as f64;
                        re += x * ang.cos();
                        im += x * ang.sin();
                    }
                    (re * re + im * im).sqrt()
                })
                .collect();
            let row = (0..n_mels)
                .map(|m| {
                    let mut e = 0.0;
                    for (k, mag) in mags.iter().enumerate() {
                        let f = k as f64 * sr as f64 / nfft as f64;
                        let (a, b, c) = (pts[m], pts[m + 1], pts[m + 2]);
                        let tri = if f > a && f <= b {
                            (f - a) / (b - a)
                        } else if f > b && f < c {
                            (c - f) / (c - b)
                        } else {
                            0.0
                        };
                        e += tri * 2.0 / (c - a) * mag;
                    }
                    (e + 1e-10).ln()
                })
                .collect();
            out.push(row);
            t += 1;
        }
        out
    }

    #[test]
    fn white_noise_matches_direct_dft_reference() {
        let sr = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let samples: Vec<f64> = (0..1500).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let clip = AudioClip::new("noise", sr, samples.clone()).unwrap();
        let mel = compute_log_mel(&clip, 96.0, 0.5, 16).unwrap();
        let reference = reference_log_mel(&samples, sr, 16);
        assert_eq!(mel.frames, reference.len());
        for (t, row) in reference.iter().enumerate() {
            for (m, &r) in row.iter().enumerate() {
                let got = mel.row(t)[m];
                assert!(((got - r) / r.abs().max(1e-12)).abs() < 1e-3, "t={t} m={m} {got} vs {r}");
            }
        }
    }

    #[test]
    fn scaling_up_never_decreases_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..6000).map(|_| rng.gen_range(-0.3..0.3)).collect();
        let a = compute_log_mel(&AudioClip::new("a", 8000, samples.clone()).unwrap(), 96.0, 0.5, 32).unwrap();
        let scaled: Vec<f64> = samples.iter().map(|s| s * 2.5).collect();
        let b = compute_log_mel(&AudioClip::new("b", 8000, scaled).unwrap(), 96.0, 0.5, 32).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!(y >= x);
            assert!(*x >= LOG_FLOOR.ln());
        }
    }

    #[test]
    fn average_of_identical_rows_is_the_row() {
        let r = vec![1.5, -2.0, 0.25];
        let mel = LogMelMatrix::from_rows(&[r.clone(), r.clone(), r.clone()]).unwrap();
        assert_eq!(temporal_average(&mel).values, r);
        let single = LogMelMatrix::from_rows(std::slice::from_ref(&r)).unwrap();
        assert_eq!(temporal_average(&single).values, r);
    }

    #[test]
    fn average_matches_columnwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rows: Vec<Vec<f64>> = (0..3).map(|_| (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect()).collect();
        let avg = temporal_average(&LogMelMatrix::from_rows(&rows).unwrap());
        for m in 0..4 {
            let expect = (rows[0][m] + rows[1][m] + rows[2][m]) / 3.0;
            assert!((avg.values[m] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn pretrained_vector_io() {
        let dir = tempfile::tempdir().unwrap();
        let zeros = dir.path().join("z.act1");
        tensor_io::save(&zeros, &Tensor::vector(vec![0.0; 2048])).unwrap();
        let v = load_pretrained_vector(&zeros).unwrap();
        assert_eq!(v.kind, FeatureKind::Pretrained);
        assert!(v.values.iter().all(|&x| x == 0.0));

        let short = dir.path().join("s.act1");
        tensor_io::save(&short, &Tensor::vector(vec![0.0; 64])).unwrap();
        assert!(matches!(load_pretrained_vector(&short), Err(Error::WrongLength { expected: 2048, actual: 64 })));

        let nan = dir.path().join("n.act1");
        let mut data = vec![0.0; 2048];
        data[5] = f64::NAN;
        tensor_io::save(&nan, &Tensor::vector(data)).unwrap();
        assert!(matches!(load_pretrained_vector(&nan), Err(Error::NonFinite(5))));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fv = FeatureVector {
            kind: FeatureKind::Pretrained,
            values: (0..2048).map(|_| rng.gen::<f32>() as f64).collect(),
        };
        let rt = dir.path().join("rt.act1");
        save_feature_vector(&rt, &fv).unwrap();
        let back = load_pretrained_vector(&rt).unwrap();
        assert!(back.values.iter().zip(&fv.values).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
