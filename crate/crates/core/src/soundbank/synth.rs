use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::BankError;
use crate::attributes::{Instrument, Note};
use crate::dsp::SAMPLE_RATE;
use crate::seed::rng_for;

pub const MIN_DURATION_S: f64 = 0.69;
pub const MAX_DURATION_S: f64 = 1.11;
const PEAK: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub attack_s: f64,
    pub decay_s: f64,
    pub release_s: f64,
    pub sustain_level: f64,
}

impl Envelope {
    /// Linear ADSR level at time `t` of a note lasting `duration`.
    /// The sustain segment stretches or shrinks to fill the duration.
    fn level(&self, t: f64, duration: f64) -> f64 {
        let release_start = duration - self.release_s;
        if t >= release_start {
            let held = self.level_before_release(release_start);
            return held * ((duration - t) / self.release_s.max(1e-9)).clamp(0.0, 1.0);
        }
        self.level_before_release(t)
    }

    fn level_before_release(&self, t: f64) -> f64 {
        if t < self.attack_s {
            t / self.attack_s.max(1e-9)
        } else if t < self.attack_s + self.decay_s {
            1.0 - (1.0 - self.sustain_level) * (t - self.attack_s) / self.decay_s.max(1e-9)
        } else {
            self.sustain_level
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timbre {
    pub instrument: Instrument,
    pub harmonic_amplitudes: Vec<f64>,
    pub envelope: Envelope,
    pub vibrato_rate_hz: f64,
    pub vibrato_depth_cents: f64,
}

impl Timbre {
    pub fn preset(instrument: Instrument) -> Self {
        let (harmonics, (attack_s, decay_s, sustain_level, release_s), rate, depth): (&[f64], _, f64, f64) =
            match instrument {
                Instrument::Bass => (&[1.0, 0.55, 0.3, 0.15, 0.07, 0.03], (0.01, 0.18, 0.55, 0.15), 0.0, 0.0),
                Instrument::Cello => (&[1.0, 0.85, 0.65, 0.5, 0.35, 0.25, 0.15, 0.1], (0.09, 0.1, 0.8, 0.2), 5.5, 15.0),
                Instrument::Clarinet => {
                    (&[1.0, 0.04, 0.65, 0.03, 0.4, 0.02, 0.22, 0.02, 0.1], (0.05, 0.05, 0.9, 0.1), 0.0, 0.0)
                }
                Instrument::Flute => (&[1.0, 0.3, 0.1, 0.04, 0.015], (0.07, 0.08, 0.85, 0.12), 5.0, 10.0),
                Instrument::Trumpet => {
                    (&[0.55, 0.9, 1.0, 0.85, 0.7, 0.55, 0.4, 0.3, 0.2, 0.12], (0.03, 0.1, 0.8, 0.1), 5.0, 8.0)
                }
                Instrument::Violin => {
                    (&[1.0, 0.7, 0.55, 0.5, 0.42, 0.35, 0.28, 0.2, 0.15, 0.1, 0.07], (0.07, 0.1, 0.85, 0.15), 6.0, 20.0)
                }
            };
        Self {
            instrument,
            harmonic_amplitudes: harmonics.to_vec(),
            envelope: Envelope { attack_s, decay_s, release_s, sustain_level },
            vibrato_rate_hz: rate,
            vibrato_depth_cents: depth,
        }
    }
}

/// Twelve-tone equal temperament with A4 = 440 Hz.
pub fn note_to_frequency(note: Note, octave: i32) -> Result<f64, BankError> {
    if !(0..=8).contains(&octave) {
        return Err(BankError::InvalidInput(format!("octave {octave} outside 0..=8")));
    }
    let semitone = octave * 12 + note.semitone_from_c();
    Ok(440.0 * 2f64.powf((semitone - 57) as f64 / 12.0))
}

/// Parses a note label and converts it; unknown labels are rejected.
pub fn label_to_frequency(label: &str, octave: i32) -> Result<f64, BankError> {
    let note: Note =
        label.parse().map_err(|e: crate::attributes::ParseAttributeError| BankError::InvalidInput(e.to_string()))?;
    note_to_frequency(note, octave)
}

/// Additive synthesis of one note, peak-normalized to 0.9.
///
/// `variation_seed` perturbs tuning (within 10 cents), per-harmonic gain
/// (within 2 dB) and envelope timing (within 10 %).
pub fn synth_note(
    timbre: &Timbre,
    note: Note,
    octave: i32,
    duration_s: f64,
    variation_seed: u64,
) -> Result<Vec<f32>, BankError> {
    if !(MIN_DURATION_S..=MAX_DURATION_S).contains(&duration_s) {
        return Err(BankError::InvalidInput(format!(
            "duration {duration_s} s outside [{MIN_DURATION_S}, {MAX_DURATION_S}]"
        )));
    }
    let mut rng = rng_for(variation_seed, "synth", 0);
    let detune_cents: f64 = rng.random_range(-10.0..=10.0);
    let gains: Vec<f64> =
        timbre.harmonic_amplitudes.iter().map(|&a| a * 10f64.powf(rng.random_range(-2.0..=2.0) / 20.0)).collect();
    let mut env = timbre.envelope;
    for v in [&mut env.attack_s, &mut env.decay_s, &mut env.release_s] {
        *v *= rng.random_range(0.9..=1.1);
    }
    if duration_s < env.attack_s + env.release_s {
        return Err(BankError::EnvelopeInfeasible { duration_s, needed_s: env.attack_s + env.release_s });
    }
    let vib_phase: f64 = rng.random_range(0.0..2.0 * PI);

    let sr = SAMPLE_RATE as f64;
    let f0 = note_to_frequency(note, octave)? * 2f64.powf(detune_cents / 1200.0);
    let n = (duration_s * sr).round() as usize;
    let mut out = vec![0.0f64; n];
    let mut phase = 0.0f64;
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / sr;
        let vib = timbre.vibrato_depth_cents * (2.0 * PI * timbre.vibrato_rate_hz * t + vib_phase).sin();
        let f = f0 * 2f64.powf(vib / 1200.0);
        let mut s = 0.0;
        for (k, &g) in gains.iter().enumerate() {
            let h = (k + 1) as f64;
            if h * f >= 0.45 * sr {
                break;
            }
            s += g * (h * phase).sin();
        }
        *o = s * env.level(t, duration_s);
        phase += 2.0 * PI * f / sr;
        if phase >= 2.0 * PI {
            phase -= 2.0 * PI;
        }
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Err(BankError::InvalidInput("synthesis produced silence".into()));
    }
    let scale = PEAK / peak;
    Ok(out.into_iter().map(|v| (v * scale) as f32).collect())
}
