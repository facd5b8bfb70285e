use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DspError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverbParams {
    pub rt60_s: f64,
    pub ir_length_s: f64,
    pub wet_dry: f64,
    pub seed: u64,
}

impl ReverbParams {
    pub fn validate(&self) -> Result<(), DspError> {
        if !(self.rt60_s > 0.0 && self.rt60_s.is_finite()) {
            return Err(DspError::InvalidParameter(format!("rt60 {} must be positive", self.rt60_s)));
        }
        if !(self.ir_length_s >= self.rt60_s && self.ir_length_s.is_finite()) {
            return Err(DspError::InvalidParameter(format!(
                "impulse response length {} shorter than rt60 {}",
                self.ir_length_s, self.rt60_s
            )));
        }
        if !(0.0..=1.0).contains(&self.wet_dry) {
            return Err(DspError::InvalidParameter(format!("wet/dry {} outside [0, 1]", self.wet_dry)));
        }
        Ok(())
    }
}

/// Unit impulse followed by a Gaussian tail whose amplitude falls by 60 dB
/// over `rt60_s`. The tail is scaled to unit energy.
pub fn impulse_response(params: &ReverbParams, sample_rate: u32) -> Result<Vec<f64>, DspError> {
    params.validate()?;
    let len = ((params.ir_length_s * sample_rate as f64).round() as usize).max(2);
    let decay = 1000f64.ln() / params.rt60_s;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ir = vec![0.0; len];
    ir[0] = 1.0;
    for (n, v) in ir.iter_mut().enumerate().skip(1) {
        let t = n as f64 / sample_rate as f64;
        let g: f64 = StandardNormal.sample(&mut rng);
        *v = g * (-decay * t).exp();
    }
    let energy: f64 = ir[1..].iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let s = energy.sqrt().recip();
        ir[1..].iter_mut().for_each(|v| *v *= s);
    }
    Ok(ir)
}

/// Linear convolution truncated to `x.len()`, via FFT.
pub fn convolve_truncated(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut a: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    a.resize(n, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
    b.resize(n, Complex::new(0.0, 0.0));
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    let scale = 1.0 / n as f64;
    a.iter().take(x.len()).map(|c| c.re * scale).collect()
}

/// Dry/wet mix before any peak handling. Linear in `x`.
pub fn reverb_mix(x: &[f32], params: &ReverbParams, sample_rate: u32) -> Result<Vec<f64>, DspError> {
    params.validate()?;
    let dry: Vec<f64> = x.iter().map(|&v| v as f64).collect();
    if params.wet_dry == 0.0 {
        return Ok(dry);
    }
    let ir = impulse_response(params, sample_rate)?;
    let wet = convolve_truncated(&dry, &ir);
    let wd = params.wet_dry;
    Ok(dry.iter().zip(&wet).map(|(&d, &w)| (1.0 - wd) * d + wd * w).collect())
}

/// Applies the synthetic room. If the mix clips it is rescaled to a peak of 0.99.
pub fn apply_reverb(x: &[f32], params: &ReverbParams, sample_rate: u32) -> Result<Vec<f32>, DspError> {
    let mut y = reverb_mix(x, params, sample_rate)?;
    let peak = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 1.0 {
        let s = 0.99 / peak;
        y.iter_mut().for_each(|v| *v *= s);
    }
    Ok(y.into_iter().map(|v| v as f32).collect())
}
