use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DspError;

/// Adds zero-mean uniform noise at `snr_db` relative to the signal power.
///
/// `snr_db = +inf` disables the noise and returns the input unchanged.
pub fn add_uniform_noise(x: &[f32], snr_db: f64, seed: u64) -> Result<Vec<f32>, DspError> {
    if snr_db == f64::INFINITY {
        return Ok(x.to_vec());
    }
    if !snr_db.is_finite() {
        return Err(DspError::InvalidParameter(format!("snr {snr_db} dB")));
    }
    let power = x.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>() / x.len().max(1) as f64;
    if power == 0.0 {
        return Err(DspError::Silent);
    }
    let noise_power = power / 10f64.powf(snr_db / 10.0);
    let a = (3.0 * noise_power).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(x.iter().map(|&v| (v as f64 + rng.random_range(-a..=a)) as f32).collect())
}
