//! Loudness metering, brightness, reverberation and noise.

mod loudness;
mod noise;
mod reverb;
mod spectral;

use thiserror::Error;

pub use loudness::{lufs_integrated, Biquad, KWeightingFilter};
pub use noise::add_uniform_noise;
pub use reverb::{apply_reverb, convolve_truncated, impulse_response, reverb_mix, ReverbParams};
pub use spectral::{hann, spectral_centroid};

pub const SAMPLE_RATE: u32 = 48_000;

#[derive(Debug, Error, PartialEq)]
pub enum DspError {
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("signal is silent")]
    Silent,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
