//! Scene composition and rendering.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attributes::{Brightness, GlobalPosition, Instrument, Loudness, Note};
use crate::audio::{write_wav, AudioError};
use crate::dsp::{add_uniform_noise, apply_reverb, DspError, ReverbParams, SAMPLE_RATE};
use crate::seed::{derive_seed, rng_for};
use crate::soundbank::{Bank, Split};

pub const MAX_SCENE_S: f64 = 17.82;
pub const MAX_SCENE_SAMPLES: usize = 855_360;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("bank is empty")]
    EmptyBank,
    #[error("sound `{0}` is not in the bank")]
    UnknownSound(String),
    #[error("invalid scene: {0}")]
    Invalid(String),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Sampling ranges for scene composition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub min_sounds: usize,
    pub max_sounds: usize,
    pub gap_range_s: (f64, f64),
    pub max_duration_s: f64,
    pub rt60_range_s: (f64, f64),
    pub wet_dry_range: (f64, f64),
    pub snr_range_db: (f64, f64),
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            min_sounds: 5,
            max_sounds: 15,
            gap_range_s: (0.1, 0.5),
            max_duration_s: MAX_SCENE_S,
            rt60_range_s: (0.1, 0.6),
            wet_dry_range: (0.2, 0.5),
            snr_range_db: (20.0, 40.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundEvent {
    pub sound_id: String,
    pub instrument: Instrument,
    pub note: Note,
    pub octave: i32,
    pub brightness_label: Brightness,
    pub loudness_label: Loudness,
    pub duration_s: f64,
    pub onset_s: f64,
    pub absolute_position: usize,
    pub global_position: GlobalPosition,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scene_id: String,
    pub split: Split,
    pub events: Vec<SoundEvent>,
    pub silence_gaps_s: Vec<f64>,
    pub reverb: ReverbParams,
    /// `None` disables the noise.
    pub noise_snr_db: Option<f64>,
    pub noise_seed: u64,
    pub total_duration_s: f64,
    pub audio_path: String,
}

impl SceneSpec {
    pub fn total_samples(&self) -> usize {
        (self.total_duration_s * SAMPLE_RATE as f64).round() as usize
    }
}

/// Which third of the scene an onset falls in.
pub fn global_bucket(onset_s: f64, duration_s: f64) -> GlobalPosition {
    match ((3.0 * onset_s / duration_s).floor() as i64).clamp(0, 2) {
        0 => GlobalPosition::Beginning,
        1 => GlobalPosition::Middle,
        _ => GlobalPosition::End,
    }
}

fn samples(seconds: f64) -> usize {
    (seconds * SAMPLE_RATE as f64).round() as usize
}

/// Draws a scene from `bank`. All randomness comes from `seed`.
pub fn compose_scene(bank: &Bank, seed: u64, scene_id: &str, config: &SceneConfig) -> Result<SceneSpec, SceneError> {
    if bank.sounds.is_empty() {
        return Err(SceneError::EmptyBank);
    }
    let mut rng = rng_for(seed, "scene", 0);
    let n = rng.random_range(config.min_sounds..=config.max_sounds);
    let mut picks: Vec<usize> = Vec::with_capacity(n);
    while picks.len() < n {
        let i = rng.random_range(0..bank.sounds.len());
        if bank.sounds.len() > 1 && picks.last() == Some(&i) {
            continue;
        }
        picks.push(i);
    }
    let durations: Vec<usize> = picks.iter().map(|&i| bank.sounds[i].waveform.len()).collect();
    let mut gaps: Vec<usize> =
        (0..=n).map(|_| samples(rng.random_range(config.gap_range_s.0..=config.gap_range_s.1))).collect();

    let cap = samples(config.max_duration_s);
    let sound_total: usize = durations.iter().sum();
    if sound_total > cap {
        return Err(SceneError::Invalid(format!("sounds alone last {sound_total} samples, cap is {cap}")));
    }
    let gap_total: usize = gaps.iter().sum();
    if sound_total + gap_total > cap {
        let budget = cap - sound_total;
        let scale = budget as f64 / gap_total as f64;
        gaps.iter_mut().for_each(|g| *g = (*g as f64 * scale).floor() as usize);
    }
    let total = sound_total + gaps.iter().sum::<usize>();
    let total_s = total as f64 / SAMPLE_RATE as f64;

    let mut cursor = 0usize;
    let mut events = Vec::with_capacity(n);
    for (k, &i) in picks.iter().enumerate() {
        cursor += gaps[k];
        let s = &bank.sounds[i];
        let onset_s = cursor as f64 / SAMPLE_RATE as f64;
        events.push(SoundEvent {
            sound_id: s.id.clone(),
            instrument: s.instrument,
            note: s.note,
            octave: s.octave,
            brightness_label: s.brightness_label,
            loudness_label: s.loudness_label,
            duration_s: durations[k] as f64 / SAMPLE_RATE as f64,
            onset_s,
            absolute_position: k + 1,
            global_position: global_bucket(onset_s, total_s),
        });
        cursor += durations[k];
    }

    let rt60 = rng.random_range(config.rt60_range_s.0..=config.rt60_range_s.1);
    let reverb = ReverbParams {
        rt60_s: rt60,
        ir_length_s: rt60,
        wet_dry: rng.random_range(config.wet_dry_range.0..=config.wet_dry_range.1),
        seed: derive_seed(seed, "reverb", 0),
    };
    let snr = rng.random_range(config.snr_range_db.0..=config.snr_range_db.1);
    Ok(SceneSpec {
        scene_id: scene_id.to_string(),
        split: bank.split,
        events,
        silence_gaps_s: gaps.iter().map(|&g| g as f64 / SAMPLE_RATE as f64).collect(),
        reverb,
        noise_snr_db: Some(snr),
        noise_seed: derive_seed(seed, "noise", 0),
        total_duration_s: total_s,
        audio_path: format!("{scene_id}.wav"),
    })
}

/// Clean concatenation of the scene's sounds and silences.
pub fn concatenate(spec: &SceneSpec, bank: &Bank) -> Result<Vec<f32>, SceneError> {
    let mut out = vec![0.0f32; spec.total_samples()];
    for e in &spec.events {
        let s = bank.get(&e.sound_id).ok_or_else(|| SceneError::UnknownSound(e.sound_id.clone()))?;
        let start = samples(e.onset_s);
        let end = start + s.waveform.len();
        if end > out.len() {
            return Err(SceneError::Invalid(format!("event {} runs past the scene end", e.absolute_position)));
        }
        out[start..end].copy_from_slice(&s.waveform);
    }
    Ok(out)
}

/// Concatenation, then reverberation, then noise.
pub fn render_scene(spec: &SceneSpec, bank: &Bank) -> Result<Vec<f32>, SceneError> {
    let dry = concatenate(spec, bank)?;
    let wet = apply_reverb(&dry, &spec.reverb, SAMPLE_RATE)?;
    Ok(match spec.noise_snr_db {
        Some(snr) => add_uniform_noise(&wet, snr, spec.noise_seed)?,
        None => wet,
    })
}

/// Entry of a split-level scene index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneIndexEntry {
    pub scene_id: String,
    pub spec_path: String,
    pub audio_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneIndex {
    pub split: String,
    pub scenes: Vec<SceneIndexEntry>,
}

pub const INDEX_FILE: &str = "index.json";

/// Writes `<id>.json` and `<id>.wav` for one scene into `dir`.
pub fn write_scene(dir: &Path, spec: &SceneSpec, audio: &[f32]) -> Result<SceneIndexEntry, SceneError> {
    fs::create_dir_all(dir)?;
    let spec_path = format!("{}.json", spec.scene_id);
    fs::write(dir.join(&spec_path), serde_json::to_vec_pretty(spec)?)?;
    write_wav(&dir.join(&spec.audio_path), audio, SAMPLE_RATE)?;
    Ok(SceneIndexEntry { scene_id: spec.scene_id.clone(), spec_path, audio_path: spec.audio_path.clone() })
}

pub fn write_index(dir: &Path, index: &SceneIndex) -> Result<(), SceneError> {
    fs::write(dir.join(INDEX_FILE), serde_json::to_vec_pretty(index)?)?;
    Ok(())
}

pub fn read_index(dir: &Path) -> Result<SceneIndex, SceneError> {
    Ok(serde_json::from_slice(&fs::read(dir.join(INDEX_FILE))?)?)
}

pub fn read_spec(path: &Path) -> Result<SceneSpec, SceneError> {
    Ok(serde_json::from_slice(&fs::read(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets_by_onset_thirds() {
        assert_eq!(global_bucket(0.0, 12.0), GlobalPosition::Beginning);
        assert_eq!(global_bucket(6.0, 12.0), GlobalPosition::Middle);
        assert_eq!(global_bucket(11.9, 12.0), GlobalPosition::End);
        assert_eq!(global_bucket(3.999, 12.0), GlobalPosition::Beginning);
        assert_eq!(global_bucket(8.0, 12.0), GlobalPosition::End);
    }
}
