use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::DspError;

const FRAME: usize = 2048;
const HOP: usize = 1024;

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos()).collect()
}

/// Mean spectral centroid (Hz) over 2048-sample Hann frames with a hop of 1024.
///
/// Frames with no spectral energy are skipped; a signal shorter than one
/// frame is zero-padded to a single frame.
pub fn spectral_centroid(waveform: &[f32], sample_rate: u32) -> Result<f64, DspError> {
    if waveform.is_empty() || waveform.iter().all(|&v| v == 0.0) {
        return Err(DspError::Silent);
    }
    let window = hann(FRAME);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FRAME);
    let bin_hz = sample_rate as f64 / FRAME as f64;
    let n_frames = if waveform.len() <= FRAME { 1 } else { (waveform.len() - FRAME).div_ceil(HOP) + 1 };

    let mut buf = vec![Complex::new(0.0, 0.0); FRAME];
    let mut total = 0.0;
    let mut counted = 0usize;
    for f in 0..n_frames {
        let start = f * HOP;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = waveform.get(start + i).copied().unwrap_or(0.0) as f64;
            *slot = Complex::new(s * window[i], 0.0);
        }
        fft.process(&mut buf);
        let (mut num, mut den) = (0.0, 0.0);
        for (k, c) in buf.iter().take(FRAME / 2 + 1).enumerate() {
            let m = c.norm();
            num += k as f64 * bin_hz * m;
            den += m;
        }
        if den > 1e-12 {
            total += num / den;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(DspError::Silent);
    }
    Ok(total / counted as f64)
}
