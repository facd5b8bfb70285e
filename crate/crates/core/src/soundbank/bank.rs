use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{synth_note, Timbre, MAX_DURATION_S, MIN_DURATION_S};
use super::BankError;
use crate::attributes::{Brightness, Instrument, Loudness, Note};
use crate::audio::{quantize_i16, read_wav, write_wav};
use crate::dsp::{lufs_integrated, spectral_centroid, SAMPLE_RATE};
use crate::seed::{derive_seed, rng_for};

pub const BANK_SIZE: usize = 135;
pub const OCTAVES: [i32; 3] = [3, 4, 5];
pub const GENERATOR_VERSION: &str = "aqa-bank-1";
pub const MANIFEST_FILE: &str = "bank.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Spectral centroid in Hz above which a sound is bright.
    pub brightness_hz: f64,
    /// Integrated loudness in LUFS above which a sound is loud.
    pub loudness_lufs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElementarySound {
    pub id: String,
    pub instrument: Instrument,
    pub note: Note,
    pub octave: i32,
    pub path: String,
    pub duration_s: f64,
    pub brightness_value: f64,
    pub brightness_label: Brightness,
    pub loudness_lufs: f64,
    pub loudness_label: Loudness,
    #[serde(skip)]
    pub waveform: Vec<f32>,
}

impl ElementarySound {
    pub fn sample_rate(&self) -> u32 {
        SAMPLE_RATE
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankHeader {
    pub split: Split,
    pub thresholds: Thresholds,
    pub master_seed: Option<u64>,
    pub generator_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BankManifest {
    pub header: BankHeader,
    pub sounds: Vec<ElementarySound>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Bank {
    pub split: Split,
    pub sounds: Vec<ElementarySound>,
    pub thresholds: Thresholds,
    pub master_seed: Option<u64>,
}

impl Bank {
    pub fn get(&self, id: &str) -> Option<&ElementarySound> {
        self.sounds.iter().find(|s| s.id == id)
    }

    pub fn manifest(&self) -> BankManifest {
        BankManifest {
            header: BankHeader {
                split: self.split,
                thresholds: self.thresholds,
                master_seed: self.master_seed,
                generator_version: GENERATOR_VERSION.to_string(),
            },
            sounds: self.sounds.clone(),
        }
    }

    /// Writes `bank.json` and one WAV per sound under `dir/sounds/`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, BankError> {
        fs::create_dir_all(dir.join("sounds"))?;
        for s in &self.sounds {
            write_wav(&dir.join(&s.path), &s.waveform, SAMPLE_RATE)?;
        }
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, serde_json::to_vec_pretty(&self.manifest())?)?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> Result<Self, BankError> {
        let manifest: BankManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        let mut sounds = manifest.sounds;
        for s in &mut sounds {
            let audio = read_wav(&dir.join(&s.path))?;
            if audio.sample_rate != SAMPLE_RATE {
                return Err(BankError::Format(format!("{}: sample rate {}", s.path, audio.sample_rate)));
            }
            s.waveform = audio.samples;
        }
        Ok(Self {
            split: manifest.header.split,
            sounds,
            thresholds: manifest.header.thresholds,
            master_seed: manifest.header.master_seed,
        })
    }
}

/// Median of a non-empty list (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Picks 135 of the 216 (instrument, note, octave) combinations so that
/// every instrument, note and octave occurs.
pub fn select_combinations(master_seed: u64) -> Vec<(Instrument, Note, i32)> {
    let mut grid = Vec::with_capacity(216);
    for &i in Instrument::ALL {
        for &n in Note::ALL {
            for o in OCTAVES {
                grid.push((i, n, o));
            }
        }
    }
    grid.shuffle(&mut rng_for(master_seed, "bank-combinations", 0));
    let (chosen, rest) = grid.split_at(BANK_SIZE);
    let mut chosen = chosen.to_vec();
    let mut rest = rest.to_vec();

    type Key = fn(&(Instrument, Note, i32)) -> u32;
    let keys: [Key; 3] = [|c| c.0 as u32, |c| c.1 as u32 + 100, |c| c.2 as u32 + 200];
    for key in keys {
        loop {
            let present: BTreeSet<u32> = chosen.iter().map(key).collect();
            let Some(pos) = rest.iter().position(|c| !present.contains(&key(c))) else { break };
            // Replace an entry whose values are all still covered elsewhere.
            let replace = (0..chosen.len()).rev().find(|&j| {
                keys.iter().all(|k| chosen.iter().enumerate().any(|(i, c)| i != j && k(c) == k(&chosen[j])))
            });
            let Some(j) = replace else { break };
            chosen[j] = rest.remove(pos);
        }
    }
    chosen
}

fn annotate_raw(waveform: &[f32]) -> Result<(f64, f64), BankError> {
    Ok((spectral_centroid(waveform, SAMPLE_RATE)?, lufs_integrated(waveform, SAMPLE_RATE)?))
}

/// Applies thresholds to measured values.
pub fn label(brightness_value: f64, loudness_lufs: f64, t: &Thresholds) -> (Brightness, Loudness) {
    (
        if brightness_value > t.brightness_hz { Brightness::Bright } else { Brightness::Dark },
        if loudness_lufs > t.loudness_lufs { Loudness::Loud } else { Loudness::Quiet },
    )
}

pub(crate) fn finish_bank(
    split: Split,
    mut sounds: Vec<ElementarySound>,
    thresholds: Option<Thresholds>,
    master_seed: Option<u64>,
) -> Bank {
    let thresholds = thresholds.unwrap_or_else(|| Thresholds {
        brightness_hz: median(&sounds.iter().map(|s| s.brightness_value).collect::<Vec<_>>()),
        loudness_lufs: median(&sounds.iter().map(|s| s.loudness_lufs).collect::<Vec<_>>()),
    });
    for s in &mut sounds {
        (s.brightness_label, s.loudness_label) = label(s.brightness_value, s.loudness_lufs, &thresholds);
    }
    Bank { split, sounds, thresholds, master_seed }
}

/// Deterministic synthetic bank. The test bank is labelled with thresholds
/// computed on the train bank of the same master seed.
pub fn build_bank(split: Split, master_seed: u64) -> Result<Bank, BankError> {
    let thresholds = match split {
        Split::Train => None,
        Split::Test => Some(build_bank(Split::Train, master_seed)?.thresholds),
    };
    build_bank_with_thresholds(split, master_seed, thresholds)
}

pub fn build_bank_with_thresholds(
    split: Split,
    master_seed: u64,
    thresholds: Option<Thresholds>,
) -> Result<Bank, BankError> {
    let combos = select_combinations(master_seed);
    let tag = format!("bank-{}", split.as_str());
    let sounds = combos
        .par_iter()
        .enumerate()
        .map(|(i, &(instrument, note, octave))| {
            let mut rng = rng_for(master_seed, &tag, i as u64);
            let duration_s = rng.random_range(MIN_DURATION_S..=MAX_DURATION_S);
            let gain_db: f64 = rng.random_range(-12.0..=0.0);
            let variation_seed = derive_seed(master_seed, &tag, 1_000_000 + i as u64);
            let raw = synth_note(&Timbre::preset(instrument), note, octave, duration_s, variation_seed)?;
            let gain = 10f64.powf(gain_db / 20.0) as f32;
            let scaled: Vec<f32> = raw.iter().map(|v| v * gain).collect();
            let waveform = quantize_i16(&scaled);
            let (brightness_value, loudness_lufs) = annotate_raw(&waveform)?;
            let id = format!("{}_{:03}_{}_{}{}", split.as_str(), i, instrument, note, octave);
            Ok(ElementarySound {
                path: format!("sounds/{id}.wav"),
                id,
                instrument,
                note,
                octave,
                duration_s: waveform.len() as f64 / SAMPLE_RATE as f64,
                brightness_value,
                brightness_label: Brightness::Dark,
                loudness_lufs,
                loudness_label: Loudness::Quiet,
                waveform,
            })
        })
        .collect::<Result<Vec<_>, BankError>>()?;
    Ok(finish_bank(split, sounds, thresholds, Some(master_seed)))
}

pub(crate) fn measure(waveform: &[f32]) -> Result<(f64, f64), BankError> {
    annotate_raw(waveform)
}
