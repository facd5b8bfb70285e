//! BS.1770-4 integrated loudness for mono signals.

use std::f64::consts::PI;

use super::DspError;

/// Coefficients of one second-order section, `a0` normalized to 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    /// Direct form I over the whole signal.
    pub fn filter(&self, x: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        x.iter()
            .map(|&x0| {
                let y0 = self.b[0] * x0 + self.b[1] * x1 + self.b[2] * x2 - self.a[0] * y1 - self.a[1] * y2;
                x2 = x1;
                x1 = x0;
                y2 = y1;
                y1 = y0;
                y0
            })
            .collect()
    }

    /// Magnitude response in dB at `freq`.
    pub fn gain_db(&self, freq: f64, sample_rate: f64) -> f64 {
        let w = 2.0 * PI * freq / sample_rate;
        let (c1, s1, c2, s2) = (w.cos(), w.sin(), (2.0 * w).cos(), (2.0 * w).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = -(self.b[1] * s1 + self.b[2] * s2);
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = -(self.a[0] * s1 + self.a[1] * s2);
        10.0 * ((num_re * num_re + num_im * num_im) / (den_re * den_re + den_im * den_im)).log10()
    }
}

/// Pre-filter (high shelf) followed by the RLB high-pass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KWeightingFilter {
    pub stage1: Biquad,
    pub stage2: Biquad,
}

const STAGE1_48K: Biquad =
    Biquad { b: [1.53512485958697, -2.69169618940638, 1.19839281085285], a: [-1.69065929318241, 0.73248077421585] };

const STAGE2_48K: Biquad = Biquad { b: [1.0, -2.0, 1.0], a: [-1.99004745483398, 0.99007225036621] };

impl KWeightingFilter {
    /// Tabulated coefficients at 48 kHz; any other rate is derived from the
    /// analog prototypes.
    pub fn for_rate(sample_rate: u32) -> Self {
        if sample_rate == 48_000 {
            Self { stage1: STAGE1_48K, stage2: STAGE2_48K }
        } else {
            Self::derived(sample_rate as f64)
        }
    }

    /// Bilinear transform of the analog shelf and high-pass prototypes.
    pub fn derived(rate: f64) -> Self {
        let f0 = 1681.974450955533;
        let g = 3.999843853973347;
        let q = 0.7071752369554196;
        let k = (PI * f0 / rate).tan();
        let vh = 10f64.powf(g / 20.0);
        let vb = vh.powf(0.4996667741545416);
        let a0 = 1.0 + k / q + k * k;
        let stage1 = Biquad {
            b: [(vh + vb * k / q + k * k) / a0, 2.0 * (k * k - vh) / a0, (vh - vb * k / q + k * k) / a0],
            a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0],
        };

        let f0 = 38.13547087602444;
        let q = 0.5003270373238773;
        let k = (PI * f0 / rate).tan();
        let a0 = 1.0 + k / q + k * k;
        let stage2 = Biquad { b: [1.0, -2.0, 1.0], a: [2.0 * (k * k - 1.0) / a0, (1.0 - k / q + k * k) / a0] };
        Self { stage1, stage2 }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.stage2.filter(&self.stage1.filter(x))
    }

    pub fn gain_db(&self, freq: f64, sample_rate: f64) -> f64 {
        self.stage1.gain_db(freq, sample_rate) + self.stage2.gain_db(freq, sample_rate)
    }
}

const ABSOLUTE_GATE: f64 = -70.0;
const RELATIVE_GATE: f64 = -10.0;

fn block_loudness(mean_square: f64) -> f64 {
    -0.691 + 10.0 * mean_square.log10()
}

/// Gated integrated loudness in LUFS. Returns `-inf` when no block passes
/// the absolute gate.
pub fn lufs_integrated(waveform: &[f32], sample_rate: u32) -> Result<f64, DspError> {
    let block = (0.4 * sample_rate as f64).round() as usize;
    let hop = (0.1 * sample_rate as f64).round() as usize;
    if waveform.len() < block {
        return Err(DspError::TooShort { needed: block, got: waveform.len() });
    }
    let x: Vec<f64> = waveform.iter().map(|&v| v as f64).collect();
    let y = KWeightingFilter::for_rate(sample_rate).apply(&x);

    // Prefix sums of squares keep every block O(1).
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in &y {
        acc += v * v;
        prefix.push(acc);
    }
    let n_blocks = (y.len() - block) / hop + 1;
    let powers: Vec<f64> = (0..n_blocks).map(|j| (prefix[j * hop + block] - prefix[j * hop]) / block as f64).collect();

    let above_abs: Vec<f64> =
        powers.iter().copied().filter(|&z| z > 0.0 && block_loudness(z) > ABSOLUTE_GATE).collect();
    if above_abs.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let relative = block_loudness(above_abs.iter().sum::<f64>() / above_abs.len() as f64) + RELATIVE_GATE;
    let gated: Vec<f64> = above_abs.into_iter().filter(|&z| block_loudness(z) > relative).collect();
    if gated.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(block_loudness(gated.iter().sum::<f64>() / gated.len() as f64))
}
