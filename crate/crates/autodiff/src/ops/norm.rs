use crate::error::{AutodiffError, Result};
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

/// Whether batch normalization uses batch statistics or frozen running ones.
#[derive(Clone, Copy, Debug)]
pub enum BatchNormMode<'a, T> {
    Train,
    Eval { running_mean: &'a [T], running_var: &'a [T] },
}

/// Per-channel statistics of one training batch. `var` is the unbiased
/// estimate, which is what running averages track.
#[derive(Clone, Debug)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

impl<T: Real> Tape<T> {
    /// Batch normalization over `(b, h, w)` per channel. `gamma`/`beta` are
    /// `None` when the affine transform is disabled.
    pub fn batchnorm2d(
        &mut self,
        x: Var,
        gamma: Option<Var>,
        beta: Option<Var>,
        mode: BatchNormMode<'_, T>,
        eps: T,
    ) -> Result<(Var, Option<BatchStats<T>>)> {
        let (b, c, h, w) = self.value(x).dims4("batchnorm2d")?;
        for p in [gamma, beta].into_iter().flatten() {
            if self.shape(p) != [c] {
                return Err(AutodiffError::Shape {
                    op: "batchnorm2d",
                    detail: format!("affine shape {:?}, expected [{c}]", self.shape(p)),
                });
            }
        }
        let hw = h * w;
        let n = b * hw;
        let xs = self.value(x).data();
        let (mean, var, stats) = match mode {
            BatchNormMode::Train => {
                let nf = T::from_usize(n).unwrap();
                let mut mean = vec![T::zero(); c];
                let mut var = vec![T::zero(); c];
                for ci in 0..c {
                    let mut s = T::zero();
                    for bi in 0..b {
                        s += xs[(bi * c + ci) * hw..(bi * c + ci + 1) * hw].iter().copied().sum::<T>();
                    }
                    let m = s / nf;
                    let mut ss = T::zero();
                    for bi in 0..b {
                        for &v in &xs[(bi * c + ci) * hw..(bi * c + ci + 1) * hw] {
                            ss += (v - m) * (v - m);
                        }
                    }
                    mean[ci] = m;
                    var[ci] = ss / nf;
                }
                let unbiased = if n > 1 {
                    let corr = nf / T::from_usize(n - 1).unwrap();
                    var.iter().map(|&v| v * corr).collect()
                } else {
                    var.clone()
                };
                let stats = BatchStats { mean: mean.clone(), var: unbiased };
                (mean, var, Some(stats))
            }
            BatchNormMode::Eval { running_mean, running_var } => {
                if running_mean.len() != c || running_var.len() != c {
                    return Err(AutodiffError::Shape {
                        op: "batchnorm2d",
                        detail: format!("running stats for {} channels, input has {c}", running_mean.len()),
                    });
                }
                (running_mean.to_vec(), running_var.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let gs = gamma.map(|g| self.value(g).data().to_vec());
        let bs = beta.map(|g| self.value(g).data().to_vec());
        let mut xhat = vec![T::zero(); xs.len()];
        let mut out = vec![T::zero(); xs.len()];
        for bi in 0..b {
            for ci in 0..c {
                let range = (bi * c + ci) * hw..(bi * c + ci + 1) * hw;
                let scale = gs.as_ref().map_or(T::one(), |g| g[ci]);
                let shift = bs.as_ref().map_or(T::zero(), |g| g[ci]);
                for i in range {
                    let xh = (xs[i] - mean[ci]) * inv_std[ci];
                    xhat[i] = xh;
                    out[i] = scale * xh + shift;
                }
            }
        }
        let mut inputs = vec![x];
        inputs.extend(gamma);
        inputs.extend(beta);
        let rg = self.any_grad(&inputs);
        let training = matches!(mode, BatchNormMode::Train);
        let value = Tensor::from_vec(&[b, c, h, w], out)?;
        let v = self.push(value, Op::BatchNorm { x, gamma, beta, xhat, inv_std, training }, rg);
        Ok((v, stats))
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Real>(
    tape: &Tape<T>,
    x: Var,
    gamma: Option<Var>,
    beta: Option<Var>,
    xhat: &[T],
    inv_std: &[T],
    training: bool,
    g: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let Ok((b, c, h, w)) = tape.value(x).dims4("batchnorm2d") else { return };
    let hw = h * w;
    let planes = |ci: usize| (0..b).map(move |bi| (bi * c + ci) * hw..(bi * c + ci + 1) * hw);

    if let Some(bv) = beta {
        if let Some(db) = acc.get(bv) {
            for (ci, d) in db.iter_mut().enumerate() {
                for r in planes(ci) {
                    *d += g[r].iter().copied().sum::<T>();
                }
            }
        }
    }
    if let Some(gv) = gamma {
        if let Some(dg) = acc.get(gv) {
            for (ci, d) in dg.iter_mut().enumerate() {
                for r in planes(ci) {
                    *d += g[r.clone()].iter().zip(&xhat[r]).map(|(&a, &b)| a * b).sum::<T>();
                }
            }
        }
    }
    let gs = gamma.map(|gv| tape.value(gv).data().to_vec());
    if let Some(dx) = acc.get(x) {
        let nf = T::from_usize(b * hw).unwrap();
        for ci in 0..c {
            let scale = gs.as_ref().map_or(T::one(), |gg| gg[ci]);
            if training {
                let mut sum_d = T::zero();
                let mut sum_dx = T::zero();
                for r in planes(ci) {
                    for i in r {
                        sum_d += g[i];
                        sum_dx += g[i] * xhat[i];
                    }
                }
                let k = scale * inv_std[ci] / nf;
                for r in planes(ci) {
                    for i in r {
                        dx[i] += k * (nf * g[i] - sum_d - xhat[i] * sum_dx);
                    }
                }
            } else {
                let k = scale * inv_std[ci];
                for r in planes(ci) {
                    for i in r {
                        dx[i] += k * g[i];
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
    fn training_output_is_standardized_per_channel() {
        let mut tape = Tape::<f64>::new();
        let data: Vec<f64> = (0..2 * 3 * 4 * 5).map(|i| ((i * 37) % 23) as f64 * 0.3 + (i % 3) as f64).collect();
        let x = tape.input(Tensor::from_vec(&[2, 3, 4, 5], data).unwrap());
        let (y, stats) = tape.batchnorm2d(x, None, None, BatchNormMode::Train, 1e-5).unwrap();
        assert!(stats.is_some());
        let ys = tape.value(y).data();
        for ci in 0..3 {
            let vals: Vec<f64> = (0..2).flat_map(|b| ys[(b * 3 + ci) * 20..(b * 3 + ci + 1) * 20].to_vec()).collect();
            let m = vals.iter().sum::<f64>() / 40.0;
            let v = vals.iter().map(|a| (a - m).powi(2)).sum::<f64>() / 40.0;
            assert!(m.abs() < 1e-10);
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn eval_mode_is_deterministic_with_frozen_stats() {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::full(&[1, 2, 2, 2], 3.0));
        let mode = BatchNormMode::Eval { running_mean: &[1.0, 3.0], running_var: &[4.0, 1.0] };
        let (a, sa) = tape.batchnorm2d(x, None, None, mode, 0.0).unwrap();
        let (b, _) = tape.batchnorm2d(x, None, None, mode, 0.0).unwrap();
        assert!(sa.is_none());
        assert_eq!(tape.value(a), tape.value(b));
        assert_eq!(&tape.value(a).data()[..4], &[1.0; 4]);
        assert_eq!(&tape.value(a).data()[4..], &[0.0; 4]);
    }
}
