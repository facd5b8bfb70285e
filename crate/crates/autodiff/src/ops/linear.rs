use crate::error::{AutodiffError, Result};
use crate::real::matmul;
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

impl<T: Real> Tape<T> {
    /// `y = x W^T + b` for `x: (n, in)`, `W: (out, in)`, `b: (out)`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (n, inp) = self.value(x).dims2("linear")?;
        let (out, win) = self.value(w).dims2("linear")?;
        if win != inp {
            return Err(AutodiffError::shape("linear", format!("input width {inp}, weight expects {win}")));
        }
        if let Some(bv) = b {
            if self.shape(bv) != [out] {
                return Err(AutodiffError::shape("linear", format!("bias {:?}, expected [{out}]", self.shape(bv))));
            }
        }
        let mut y = vec![T::zero(); n * out];
        matmul(self.value(x).data(), false, self.value(w).data(), true, &mut y, n, inp, out, false);
        if let Some(bv) = b {
            let bs = self.value(bv).data();
            for row in y.chunks_mut(out) {
                row.iter_mut().zip(bs).for_each(|(v, &bb)| *v += bb);
            }
        }
        let mut inputs = vec![x, w];
        inputs.extend(b);
        let rg = self.any_grad(&inputs);
        let value = Tensor::from_vec(&[n, out], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }, rg))
    }

    /// Looks up rows of `table: (vocab, dim)`; `ids` is `batch x seq` row-major.
    /// Output is `(batch, seq, dim)`.
    pub fn embedding(&mut self, table: Var, ids: &[usize], batch: usize, seq: usize) -> Result<Var> {
        let (vocab, dim) = self.value(table).dims2("embedding")?;
        if ids.len() != batch * seq {
            return Err(AutodiffError::shape("embedding", format!("{} ids for {batch}x{seq}", ids.len())));
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= vocab) {
            return Err(AutodiffError::shape("embedding", format!("token id {bad} outside vocabulary of {vocab}")));
        }
        let ts = self.value(table).data();
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &i in ids {
            out.extend_from_slice(&ts[i * dim..(i + 1) * dim]);
        }
        let rg = self.requires_grad(table);
        let value = Tensor::from_vec(&[batch, seq, dim], out)?;
        Ok(self.push(value, Op::Embedding { table, ids: ids.to_vec() }, rg))
    }
}

pub(crate) fn backward<T: Real>(tape: &Tape<T>, x: Var, w: Var, b: Option<Var>, g: &[T], acc: &mut Accumulator<'_, T>) {
    let Ok((n, inp)) = tape.value(x).dims2("linear") else { return };
    let out = tape.shape(w)[0];
    if let Some(bv) = b {
        if let Some(db) = acc.get(bv) {
            for row in g.chunks(out) {
                db.iter_mut().zip(row).for_each(|(d, &gi)| *d += gi);
            }
        }
    }
    if let Some(dw) = acc.get(w) {
        matmul(g, true, tape.value(x).data(), false, dw, out, n, inp, true);
    }
    if let Some(dx) = acc.get(x) {
        matmul(g, false, tape.value(w).data(), false, dx, n, out, inp, true);
    }
}

pub(crate) fn embedding_backward<T: Real>(
    tape: &Tape<T>,
    table: Var,
    ids: &[usize],
    g: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let dim = tape.shape(table)[1];
    if let Some(dt) = acc.get(table) {
        for (k, &i) in ids.iter().enumerate() {
            for j in 0..dim {
                dt[i * dim + j] += g[k * dim + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_shape_and_identity() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(Tensor::from_vec(&[2, 3], vec![1., 2., 3., 4., 5., 6.]).unwrap());
        let mut eye = vec![0.0; 9];
        for i in 0..3 {
            eye[i * 3 + i] = 1.0;
        }
        let w = tape.input(Tensor::from_vec(&[3, 3], eye).unwrap());
        let y = tape.linear(x, w, None).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let w2 = tape.input(Tensor::zeros(&[5, 3]));
        let b2 = tape.input(Tensor::full(&[5], 0.5));
        let y2 = tape.linear(x, w2, Some(b2)).unwrap();
        assert_eq!(tape.shape(y2), &[2, 5]);
        assert!(tape.value(y2).data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn embedding_rejects_out_of_range_ids() {
        let mut tape = Tape::<f32>::new();
        let t = tape.input(Tensor::from_vec(&[3, 2], vec![0., 1., 2., 3., 4., 5.]).unwrap());
        let e = tape.embedding(t, &[2, 0], 1, 2).unwrap();
        assert_eq!(tape.value(e).data(), &[4., 5., 0., 1.]);
        assert!(tape.embedding(t, &[3], 1, 1).is_err());
    }
}
