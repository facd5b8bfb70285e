//! Log-Mel spectrogram features and their on-disk format.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::hann;

pub const TARGET_FRAMES: usize = 418;
pub const LOG_EPS: f64 = 1e-10;
const MAGIC: &[u8; 4] = b"AQAF";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("{valid} frames exceed the {target}-frame budget")]
    Overflow { valid: usize, target: usize },
    #[error("bilinear resize needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
    #[error("degenerate statistics: {0}")]
    Degenerate(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("feature file format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MelConfig {
    pub sample_rate: u32,
    pub window: usize,
    pub hop: usize,
    pub n_fft: usize,
    pub n_mels: usize,
    pub f_min: f64,
    pub f_max: f64,
}

impl MelConfig {
    /// Window 512, hop 2048.
    pub fn long_stride() -> Self {
        Self { sample_rate: 48_000, window: 512, hop: 2048, n_fft: 512, n_mels: 64, f_min: 20.0, f_max: 24_000.0 }
    }

    /// Window 512, hop 512.
    pub fn short_stride() -> Self {
        Self { hop: 512, ..Self::long_stride() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "clear2-long-stride" => Some(Self::long_stride()),
            "clear2-short-stride" => Some(Self::short_stride()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.window == 0 || self.hop == 0 || self.n_mels == 0 || self.window > self.n_fft {
            return Err(FeatureError::Config(format!("{self:?}")));
        }
        if !(0.0 <= self.f_min && self.f_min < self.f_max && self.f_max <= self.sample_rate as f64 / 2.0) {
            return Err(FeatureError::Config(format!("band {}..{} Hz", self.f_min, self.f_max)));
        }
        Ok(())
    }

    /// `floor((len - window) / hop) + 1`.
    pub fn valid_frames(&self, len: usize) -> Option<usize> {
        (len >= self.window).then(|| (len - self.window) / self.hop + 1)
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

fn triangle(f: f64, l: f64, c: f64, r: f64) -> f64 {
    if f <= l || f >= r {
        0.0
    } else if f <= c {
        (f - l) / (c - l)
    } else {
        (r - f) / (r - c)
    }
}

/// Triangular Mel filters (rows) over FFT bins (columns).
///
/// Each weight is the triangle's mean value over the bin's frequency span,
/// so narrow low-frequency triangles still reach the bin that contains them.
pub fn mel_filterbank(config: &MelConfig) -> Vec<Vec<f64>> {
    let n_bins = config.n_fft / 2 + 1;
    let bin_hz = config.sample_rate as f64 / config.n_fft as f64;
    let (m0, m1) = (hz_to_mel(config.f_min), hz_to_mel(config.f_max));
    let edges: Vec<f64> =
        (0..config.n_mels + 2).map(|i| mel_to_hz(m0 + (m1 - m0) * i as f64 / (config.n_mels + 1) as f64)).collect();
    (0..config.n_mels)
        .map(|m| {
            let (l, c, r) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..n_bins)
                .map(|k| {
                    let a = (k as f64 - 0.5) * bin_hz;
                    let b = (k as f64 + 0.5) * bin_hz;
                    let mut pts = vec![a, b];
                    pts.extend([l, c, r].into_iter().filter(|&p| p > a && p < b));
                    pts.sort_by(f64::total_cmp);
                    let area: f64 = pts
                        .windows(2)
                        .map(|w| 0.5 * (triangle(w[0], l, c, r) + triangle(w[1], l, c, r)) * (w[1] - w[0]))
                        .sum();
                    area / bin_hz
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub n_mels: usize,
    pub n_frames: usize,
    pub valid_frames: usize,
    /// Row-major `n_mels x n_frames`.
    pub data: Vec<f32>,
    pub scene_id: String,
}

impl Spectrogram {
    pub fn at(&self, mel: usize, frame: usize) -> f32 {
        self.data[mel * self.n_frames + frame]
    }
}

/// Log-power Mel spectrogram, one column per full frame.
pub fn melspec(waveform: &[f32], config: &MelConfig) -> Result<Spectrogram, FeatureError> {
    config.validate()?;
    let n_frames = config
        .valid_frames(waveform.len())
        .ok_or(FeatureError::TooShort { needed: config.window, got: waveform.len() })?;
    let fb = mel_filterbank(config);
    let window = hann(config.window);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(config.n_fft);
    let n_bins = config.n_fft / 2 + 1;
    let mut buf = vec![Complex::new(0.0, 0.0); config.n_fft];
    let mut power = vec![0.0f64; n_bins];
    let mut data = vec![0.0f32; config.n_mels * n_frames];
    for j in 0..n_frames {
        let start = j * config.hop;
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (i, w) in window.iter().enumerate() {
            buf[i] = Complex::new(waveform[start + i] as f64 * w, 0.0);
        }
        fft.process(&mut buf);
        for (p, c) in power.iter_mut().zip(&buf) {
            *p = c.norm_sqr();
        }
        for (m, row) in fb.iter().enumerate() {
            let e: f64 = row.iter().zip(&power).map(|(w, p)| w * p).sum();
            data[m * n_frames + j] = (e + LOG_EPS).ln() as f32;
        }
    }
    Ok(Spectrogram { n_mels: config.n_mels, n_frames, valid_frames: n_frames, data, scene_id: String::new() })
}

/// Right-pads with zero columns up to `target` frames.
pub fn pad_to(spec: &Spectrogram, target: usize) -> Result<Spectrogram, FeatureError> {
    if spec.n_frames > target {
        return Err(FeatureError::Overflow { valid: spec.n_frames, target });
    }
    let mut data = vec![0.0f32; spec.n_mels * target];
    for m in 0..spec.n_mels {
        data[m * target..m * target + spec.n_frames]
            .copy_from_slice(&spec.data[m * spec.n_frames..(m + 1) * spec.n_frames]);
    }
    Ok(Spectrogram { n_frames: target, data, ..spec.clone() })
}

/// Linear interpolation of the valid frames along time (half-pixel aligned).
pub fn resize_bilinear(spec: &Spectrogram, target: usize) -> Result<Spectrogram, FeatureError> {
    let n = spec.valid_frames;
    if n < 2 {
        return Err(FeatureError::TooFewFrames(n));
    }
    let mut data = vec![0.0f32; spec.n_mels * target];
    let scale = n as f64 / target as f64;
    for j in 0..target {
        let src = ((j as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        let t = src - i0 as f64;
        for m in 0..spec.n_mels {
            let a = spec.at(m, i0) as f64;
            let b = spec.at(m, i1) as f64;
            data[m * target + j] = (a + (b - a) * t) as f32;
        }
    }
    Ok(Spectrogram { n_frames: target, valid_frames: target, data, ..spec.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
    pub split: String,
}

fn valid_values(spec: &Spectrogram) -> impl Iterator<Item = f64> + '_ {
    (0..spec.n_mels).flat_map(move |m| {
        spec.data[m * spec.n_frames..m * spec.n_frames + spec.valid_frames].iter().map(|&v| v as f64)
    })
}

/// Mean and population standard deviation over the valid frames of all inputs.
pub fn fit_norm<'a, I>(specs: I, split: &str) -> Result<NormStats, FeatureError>
where
    I: IntoIterator<Item = &'a Spectrogram> + Clone,
{
    let (mut sum, mut n) = (0.0f64, 0usize);
    for s in specs.clone() {
        for v in valid_values(s) {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(FeatureError::Degenerate("no valid frames".into()));
    }
    let mean = sum / n as f64;
    let mut ss = 0.0f64;
    for s in specs {
        for v in valid_values(s) {
            ss += (v - mean) * (v - mean);
        }
    }
    let std = (ss / n as f64).sqrt();
    if !(std > 0.0) {
        return Err(FeatureError::Degenerate(format!("standard deviation {std}")));
    }
    Ok(NormStats { mean, std, split: split.to_string() })
}

/// Standardizes valid frames; padded columns stay exactly zero.
pub fn normalize(spec: &Spectrogram, stats: &NormStats) -> Result<Spectrogram, FeatureError> {
    if !(stats.std > 0.0) {
        return Err(FeatureError::Degenerate(format!("standard deviation {}", stats.std)));
    }
    let mut out = spec.clone();
    for m in 0..spec.n_mels {
        for j in 0..spec.n_frames {
            let i = m * spec.n_frames + j;
            out.data[i] =
                if j < spec.valid_frames { ((spec.data[i] as f64 - stats.mean) / stats.std) as f32 } else { 0.0 };
        }
    }
    Ok(out)
}

/// Writes the binary feature file.
pub fn write_features(path: &Path, spec: &Spectrogram) -> Result<(), FeatureError> {
    let mut bytes = Vec::with_capacity(20 + spec.data.len() * 4);
    bytes.extend_from_slice(MAGIC);
    for v in [VERSION, spec.n_mels as u32, spec.n_frames as u32, spec.valid_frames as u32] {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    for v in &spec.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_features(path: &Path) -> Result<Spectrogram, FeatureError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 20 || &bytes[..4] != MAGIC {
        return Err(FeatureError::Format(format!("{}: bad header", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes")) as usize;
    let (version, n_mels, n_frames, valid_frames) = (word(0), word(1), word(2), word(3));
    if version != VERSION as usize {
        return Err(FeatureError::Format(format!("unsupported version {version}")));
    }
    if bytes.len() != 20 + 4 * n_mels * n_frames || valid_frames > n_frames {
        return Err(FeatureError::Format(format!("{}: size mismatch", path.display())));
    }
    let data = bytes[20..].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let scene_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Spectrogram { n_mels, n_frames, valid_frames, data, scene_id })
}
