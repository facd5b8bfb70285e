use rand::Rng;

use crate::error::{AutodiffError, Result};
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

impl<T: Real> Tape<T> {
    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x);
        let data = value.data().iter().map(|&v| v.max(T::zero())).collect();
        let out = Tensor::from_vec(value.shape(), data).expect("same shape");
        let rg = self.requires_grad(x);
        self.push(out, Op::Relu { x }, rg)
    }

    /// Inverted dropout. Identity when `training` is false or `p == 0`.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::shape("dropout", format!("probability {p} outside [0, 1)")));
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = T::from_f64_lossy(1.0 / (1.0 - p));
        let value = self.value(x);
        let mask: Vec<T> = (0..value.numel()).map(|_| if rng.random::<f64>() < p { T::zero() } else { keep }).collect();
        let data = value.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        let out = Tensor::from_vec(value.shape(), data)?;
        let rg = self.requires_grad(x);
        Ok(self.push(out, Op::Dropout { x, mask }, rg))
    }

    /// Concatenates two `(b, c, h, w)` tensors along the channel axis.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ba, ca, ha, wa) = self.value(a).dims4("concat_channels")?;
        let (bb, cb, hb, wb) = self.value(b).dims4("concat_channels")?;
        if (ba, ha, wa) != (bb, hb, wb) {
            return Err(AutodiffError::shape(
                "concat_channels",
                format!("{:?} and {:?} differ outside the channel axis", self.shape(a), self.shape(b)),
            ));
        }
        let hw = ha * wa;
        let (xa, xb) = (self.value(a).data(), self.value(b).data());
        let mut out = Vec::with_capacity(ba * (ca + cb) * hw);
        for bi in 0..ba {
            out.extend_from_slice(&xa[bi * ca * hw..(bi + 1) * ca * hw]);
            out.extend_from_slice(&xb[bi * cb * hw..(bi + 1) * cb * hw]);
        }
        let rg = self.any_grad(&[a, b]);
        let value = Tensor::from_vec(&[ba, ca + cb, ha, wa], out)?;
        Ok(self.push(value, Op::ConcatChannels { a, b }, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x + y).collect();
        let value = Tensor::from_vec(self.shape(a), data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.value(a).data().iter().zip(self.value(b).data()).map(|(&x, &y)| x * y).collect();
        let value = Tensor::from_vec(self.shape(a), data)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Mul { a, b }, rg))
    }

    /// Sum of all elements as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum::<T>();
        let rg = self.requires_grad(x);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    /// `out[b,c,h,w] = gamma[c] * x[b,c,h,w] + beta[c]`.
    ///
    /// `gamma` and `beta` are either `(c)` shared across the batch or `(b, c)`.
    pub fn film(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (b, c, h, w) = self.value(x).dims4("film")?;
        let gs = self.shape(gamma).to_vec();
        if gs != self.shape(beta) || !(gs == [c] || gs == [b, c]) {
            return Err(AutodiffError::shape(
                "film",
                format!("gamma {:?} / beta {:?} do not match {c} channels", gs, self.shape(beta)),
            ));
        }
        let per_sample = gs.len() == 2;
        let hw = h * w;
        let (xs, g, be) = (self.value(x).data(), self.value(gamma).data(), self.value(beta).data());
        let mut out = vec![T::zero(); xs.len()];
        for bi in 0..b {
            for ci in 0..c {
                let k = if per_sample { bi * c + ci } else { ci };
                let base = (bi * c + ci) * hw;
                for i in base..base + hw {
                    out[i] = g[k] * xs[i] + be[k];
                }
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        let value = Tensor::from_vec(&[b, c, h, w], out)?;
        Ok(self.push(value, Op::Film { x, gamma, beta }, rg))
    }

    /// Columns `start..start + len` of a `(rows, cols)` matrix.
    pub fn narrow(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2("narrow")?;
        if start + len > cols || len == 0 {
            return Err(AutodiffError::shape("narrow", format!("columns {start}..{} of {cols}", start + len)));
        }
        let xs = self.value(x).data();
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&xs[r * cols + start..r * cols + start + len]);
        }
        let rg = self.requires_grad(x);
        let value = Tensor::from_vec(&[rows, len], out)?;
        Ok(self.push(value, Op::Narrow { x, start, len }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(AutodiffError::shape(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        Ok(())
    }
}

pub(crate) fn relu_backward<T: Real>(tape: &Tape<T>, x: Var, node: usize, g: &[T], acc: &mut Accumulator<'_, T>) {
    let out = tape.nodes[node].value.data();
    if let Some(dx) = acc.get(x) {
        for ((d, &o), &gi) in dx.iter_mut().zip(out).zip(g) {
            if o > T::zero() {
                *d += gi;
            }
        }
    }
}

pub(crate) fn dropout_backward<T: Real>(x: Var, mask: &[T], g: &[T], acc: &mut Accumulator<'_, T>) {
    if let Some(dx) = acc.get(x) {
        for ((d, &m), &gi) in dx.iter_mut().zip(mask).zip(g) {
            *d += m * gi;
        }
    }
}

pub(crate) fn concat_backward<T: Real>(tape: &Tape<T>, a: Var, b: Var, g: &[T], acc: &mut Accumulator<'_, T>) {
    let Ok((bn, ca, h, w)) = tape.value(a).dims4("concat_channels") else { return };
    let cb = tape.shape(b)[1];
    let hw = h * w;
    let stride = (ca + cb) * hw;
    if let Some(da) = acc.get(a) {
        for bi in 0..bn {
            for (d, &gi) in da[bi * ca * hw..(bi + 1) * ca * hw].iter_mut().zip(&g[bi * stride..bi * stride + ca * hw])
            {
                *d += gi;
            }
        }
    }
    if let Some(db) = acc.get(b) {
        for bi in 0..bn {
            let src = &g[bi * stride + ca * hw..(bi + 1) * stride];
            for (d, &gi) in db[bi * cb * hw..(bi + 1) * cb * hw].iter_mut().zip(src) {
                *d += gi;
            }
        }
    }
}

pub(crate) fn add_backward<T: Real>(a: Var, b: Var, g: &[T], acc: &mut Accumulator<'_, T>) {
    for v in [a, b] {
        if let Some(d) = acc.get(v) {
            d.iter_mut().zip(g).for_each(|(d, &gi)| *d += gi);
        }
    }
}

pub(crate) fn mul_backward<T: Real>(tape: &Tape<T>, a: Var, b: Var, g: &[T], acc: &mut Accumulator<'_, T>) {
    for (v, other) in [(a, b), (b, a)] {
        let o = tape.value(other).data();
        if let Some(d) = acc.get(v) {
            for ((d, &ov), &gi) in d.iter_mut().zip(o).zip(g) {
                *d += ov * gi;
            }
        }
    }
}

pub(crate) fn sum_backward<T: Real>(x: Var, g: &[T], acc: &mut Accumulator<'_, T>) {
    if let Some(dx) = acc.get(x) {
        dx.iter_mut().for_each(|d| *d += g[0]);
    }
}

pub(crate) fn film_backward<T: Real>(
    tape: &Tape<T>,
    x: Var,
    gamma: Var,
    beta: Var,
    g: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let Ok((b, c, h, w)) = tape.value(x).dims4("film") else { return };
    let per_sample = tape.shape(gamma).len() == 2;
    let hw = h * w;
    let xs = tape.value(x).data();
    let gs = tape.value(gamma).data();
    let index = |bi: usize, ci: usize| if per_sample { bi * c + ci } else { ci };
    if let Some(dg) = acc.get(gamma) {
        for bi in 0..b {
            for ci in 0..c {
                let r = (bi * c + ci) * hw..(bi * c + ci + 1) * hw;
                dg[index(bi, ci)] += g[r.clone()].iter().zip(&xs[r]).map(|(&a, &v)| a * v).sum::<T>();
            }
        }
    }
    if let Some(db) = acc.get(beta) {
        for bi in 0..b {
            for ci in 0..c {
                let r = (bi * c + ci) * hw..(bi * c + ci + 1) * hw;
                db[index(bi, ci)] += g[r].iter().copied().sum::<T>();
            }
        }
    }
    if let Some(dx) = acc.get(x) {
        for bi in 0..b {
            for ci in 0..c {
                let k = gs[index(bi, ci)];
                let base = (bi * c + ci) * hw;
                for i in base..base + hw {
                    dx[i] += k * g[i];
                }
            }
        }
    }
}

pub(crate) fn narrow_backward<T: Real>(
    tape: &Tape<T>,
    x: Var,
    start: usize,
    len: usize,
    g: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let Ok((rows, cols)) = tape.value(x).dims2("narrow") else { return };
    if let Some(dx) = acc.get(x) {
        for r in 0..rows {
            for j in 0..len {
                dx[r * cols + start + j] += g[r * len + j];
            }
        }
    }
}
