use crate::error::{AutodiffError, Result};
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

/// Number of pooling windows along one axis.
///
/// With `ceil_mode` the last window may hang over the edge (it is clipped),
/// but it always starts inside the input.
pub fn pool_output_len(input: usize, kernel: usize, stride: usize, ceil_mode: bool) -> Option<usize> {
    if input == 0 || kernel == 0 || stride == 0 {
        return None;
    }
    if ceil_mode {
        let span = input.saturating_sub(kernel);
        let mut out = span.div_ceil(stride) + 1;
        if (out - 1) * stride >= input {
            out -= 1;
        }
        Some(out)
    } else {
        (input >= kernel).then(|| (input - kernel) / stride + 1)
    }
}

impl<T: Real> Tape<T> {
    /// Max pooling with `stride = kernel`.
    pub fn maxpool2d(&mut self, x: Var, kernel: (usize, usize), ceil_mode: bool) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4("maxpool2d")?;
        let err = || AutodiffError::Shape {
            op: "maxpool2d",
            detail: format!("kernel {kernel:?} does not fit input {h}x{w}"),
        };
        let ho = pool_output_len(h, kernel.0, kernel.0, ceil_mode).ok_or_else(err)?;
        let wo = pool_output_len(w, kernel.1, kernel.1, ceil_mode).ok_or_else(err)?;
        let xs = self.value(x).data();
        let mut out = Vec::with_capacity(b * c * ho * wo);
        let mut argmax = Vec::with_capacity(b * c * ho * wo);
        for plane in 0..b * c {
            let base = plane * h * w;
            for oh in 0..ho {
                let h0 = oh * kernel.0;
                let h1 = (h0 + kernel.0).min(h);
                for ow in 0..wo {
                    let w0 = ow * kernel.1;
                    let w1 = (w0 + kernel.1).min(w);
                    let mut best = base + h0 * w + w0;
                    for ih in h0..h1 {
                        for iw in w0..w1 {
                            let idx = base + ih * w + iw;
                            if xs[idx] > xs[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(xs[best]);
                    argmax.push(best);
                }
            }
        }
        let rg = self.requires_grad(x);
        let value = Tensor::from_vec(&[b, c, ho, wo], out)?;
        Ok(self.push(value, Op::MaxPool { x, argmax }, rg))
    }

    /// `(b, c, h, w) -> (b, c)` maximum over all spatial positions.
    pub fn global_maxpool(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4("global_maxpool")?;
        let xs = self.value(x).data();
        let hw = h * w;
        let mut out = Vec::with_capacity(b * c);
        let mut argmax = Vec::with_capacity(b * c);
        for plane in 0..b * c {
            let base = plane * hw;
            let mut best = base;
            for idx in base..base + hw {
                if xs[idx] > xs[best] {
                    best = idx;
                }
            }
            out.push(xs[best]);
            argmax.push(best);
        }
        let rg = self.requires_grad(x);
        let value = Tensor::from_vec(&[b, c], out)?;
        Ok(self.push(value, Op::GlobalMaxPool { x, argmax }, rg))
    }

    /// `(b, c, h, w) -> (b, w, c)`: averages the frequency axis and turns
    /// time into a sequence axis.
    pub fn mean_over_freq(&mut self, x: Var) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4("mean_over_freq")?;
        let xs = self.value(x).data();
        let scale = T::one() / T::from_usize(h).unwrap();
        let mut out = vec![T::zero(); b * w * c];
        for bi in 0..b {
            for ci in 0..c {
                let plane = &xs[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
                for t in 0..w {
                    let mut s = T::zero();
                    for f in 0..h {
                        s += plane[f * w + t];
                    }
                    out[(bi * w + t) * c + ci] = s * scale;
                }
            }
        }
        let rg = self.requires_grad(x);
        let value = Tensor::from_vec(&[b, w, c], out)?;
        Ok(self.push(value, Op::MeanOverFreq { x }, rg))
    }
}

pub(crate) fn backward_argmax<T: Real>(x: Var, argmax: &[usize], g: &[T], acc: &mut Accumulator<'_, T>) {
    if let Some(dx) = acc.get(x) {
        for (&idx, &d) in argmax.iter().zip(g) {
            dx[idx] += d;
        }
    }
}

pub(crate) fn mean_over_freq_backward<T: Real>(tape: &Tape<T>, x: Var, g: &[T], acc: &mut Accumulator<'_, T>) {
    let Ok((b, c, h, w)) = tape.value(x).dims4("mean_over_freq") else { return };
    let scale = T::one() / T::from_usize(h).unwrap();
    if let Some(dx) = acc.get(x) {
        for bi in 0..b {
            for ci in 0..c {
                let plane = &mut dx[(bi * c + ci) * h * w..(bi * c + ci + 1) * h * w];
                for t in 0..w {
                    let d = g[(bi * w + t) * c + ci] * scale;
                    for f in 0..h {
                        plane[f * w + t] += d;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_mode_keeps_partial_windows() {
        assert_eq!(pool_output_len(418, 2, 2, true), Some(209));
        assert_eq!(pool_output_len(209, 2, 2, true), Some(105));
        assert_eq!(pool_output_len(105, 2, 2, true), Some(53));
        assert_eq!(pool_output_len(209, 2, 2, false), Some(104));
        assert_eq!(pool_output_len(1, 2, 2, true), Some(1));
        assert_eq!(pool_output_len(1, 2, 2, false), None);
    }

    #[test]
    fn time_pool_halves_width() {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::from_vec(&[1, 1, 2, 4], vec![1., 5., 2., 0., 3., 3., 9., 8.]).unwrap());
        let y = tape.maxpool2d(x, (1, 2), false).unwrap();
        assert_eq!(tape.shape(y), &[1, 1, 2, 2]);
        assert_eq!(tape.value(y).data(), &[5., 2., 3., 9.]);
    }

    #[test]
    fn constant_input_pools_to_constant() {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::full(&[2, 3, 6, 7], 0.5));
        let y = tape.maxpool2d(x, (2, 2), true).unwrap();
        assert_eq!(tape.shape(y), &[2, 3, 3, 4]);
        assert!(tape.value(y).data().iter().all(|&v| v == 0.5));
    }
}
