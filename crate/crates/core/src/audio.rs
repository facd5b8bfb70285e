//! 16-bit PCM WAV input/output.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("{path}: {source}")]
    Wav { path: String, source: hound::Error },
    #[error("{path}: expected mono audio, found {channels} channels")]
    NotMono { path: String, channels: u16 },
}

/// Mono samples together with their rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Audio {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
}

/// Rounds to the 16-bit grid so that what is written is what is kept in memory.
pub fn quantize_i16(samples: &[f32]) -> Vec<f32> {
    samples.iter().map(|&v| to_i16(v) as f32 / 32768.0).collect()
}

fn to_i16(v: f32) -> i16 {
    (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav(path: &Path, samples: &[f32], sample_rate: u32) -> Result<(), AudioError> {
    let spec =
        hound::WavSpec { channels: 1, sample_rate, bits_per_sample: 16, sample_format: hound::SampleFormat::Int };
    let wrap = |source| AudioError::Wav { path: path.display().to_string(), source };
    let mut w = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        w.write_sample(to_i16(s)).map_err(wrap)?;
    }
    w.finalize().map_err(wrap)
}

/// Reads a mono WAV of any integer or float sample format into `[-1, 1]`.
pub fn read_wav(path: &Path) -> Result<Audio, AudioError> {
    let wrap = |source| AudioError::Wav { path: path.display().to_string(), source };
    let mut r = hound::WavReader::open(path).map_err(wrap)?;
    let spec = r.spec();
    if spec.channels != 1 {
        return Err(AudioError::NotMono { path: path.display().to_string(), channels: spec.channels });
    }
    let samples = match spec.sample_format {
        hound::SampleFormat::Int => {
            let scale = (1i64 << (spec.bits_per_sample - 1)) as f32;
            r.samples::<i32>().map(|s| s.map(|v| v as f32 / scale)).collect::<Result<Vec<_>, _>>()
        }
        hound::SampleFormat::Float => r.samples::<f32>().collect::<Result<Vec<_>, _>>(),
    }
    .map_err(wrap)?;
    Ok(Audio { samples, sample_rate: spec.sample_rate })
}

/// Linear-interpolation resampling.
pub fn resample_linear(samples: &[f32], from: u32, to: u32) -> Vec<f32> {
    if from == to || samples.is_empty() {
        return samples.to_vec();
    }
    let out_len = ((samples.len() as u64 * to as u64) as f64 / from as f64).round().max(1.0) as usize;
    let ratio = from as f64 / to as f64;
    (0..out_len)
        .map(|i| {
            let pos = i as f64 * ratio;
            let j = pos.floor() as usize;
            let frac = (pos - j as f64) as f32;
            let a = samples[j.min(samples.len() - 1)];
            let b = samples[(j + 1).min(samples.len() - 1)];
            a + (b - a) * frac
        })
        .collect()
}

/// Drops leading and trailing samples whose magnitude is below `threshold_dbfs`.
pub fn trim_silence(samples: &[f32], threshold_dbfs: f64) -> &[f32] {
    let thr = 10f64.powf(threshold_dbfs / 20.0) as f32;
    let start = samples.iter().position(|v| v.abs() >= thr);
    let end = samples.iter().rposition(|v| v.abs() >= thr);
    match (start, end) {
        (Some(s), Some(e)) => &samples[s..=e],
        _ => &samples[0..0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_is_exact_after_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let x: Vec<f32> = (0..1000).map(|i| ((i as f32) * 0.01).sin() * 0.8).collect();
        let q = quantize_i16(&x);
        write_wav(&p, &q, 48_000).unwrap();
        let back = read_wav(&p).unwrap();
        assert_eq!(back.sample_rate, 48_000);
        assert_eq!(back.samples, q);
    }

    #[test]
    fn resampling_keeps_duration() {
        let x = vec![0.5f32; 44_100];
        let y = resample_linear(&x, 44_100, 48_000);
        assert_eq!(y.len(), 48_000);
        assert!(y.iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn trimming_removes_quiet_edges() {
        let x = [0.0, 0.0001, 0.5, 0.0, -0.3, 0.00001];
        assert_eq!(trim_silence(&x, -60.0), &[0.5, 0.0, -0.3]);
        assert!(trim_silence(&[0.0; 4], -60.0).is_empty());
    }
}
