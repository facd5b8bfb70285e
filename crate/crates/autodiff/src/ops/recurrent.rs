//! Batched single-layer GRU with per-sequence lengths.
//!
//! Packed weights use the gate order (reset, update, candidate):
//! `w_ih: (3G, E)`, `w_hh: (3G, G)`, `b_ih, b_hh: (3G)`.
//!
//! ```text
//! r  = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//! z  = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//! n  = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//! h' = (1 - z) * n + z * h
//! ```
//!
//! Steps at or past a sequence's length leave its hidden state untouched, so
//! the returned state is the one after the last real token.

use crate::error::{AutodiffError, Result};
use crate::real::matmul;
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

pub(crate) struct GruCache<T> {
    batch: usize,
    steps: usize,
    hidden: usize,
    lengths: Vec<usize>,
    /// Hidden states `h_0..h_T`, each `(batch, hidden)`.
    states: Vec<T>,
    r: Vec<T>,
    z: Vec<T>,
    n: Vec<T>,
    /// `W_hn h + b_hn` per step, needed for the reset gate gradient.
    hn: Vec<T>,
}

fn sigmoid<T: Real>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

impl<T: Real> Tape<T> {
    /// Runs the GRU over `x: (batch, steps, input)` from a zero state and
    /// returns the final hidden state `(batch, hidden)`.
    pub fn gru(&mut self, x: Var, lengths: &[usize], w_ih: Var, w_hh: Var, b_ih: Var, b_hh: Var) -> Result<Var> {
        let (b, t, e) = match *self.shape(x) {
            [b, t, e] => (b, t, e),
            ref s => return Err(AutodiffError::shape("gru", format!("expected (batch, steps, input), got {s:?}"))),
        };
        let (g3, we) = self.value(w_ih).dims2("gru")?;
        let g = g3 / 3;
        if g3 % 3 != 0 || g == 0 || we != e {
            return Err(AutodiffError::shape("gru", format!("w_ih {:?} does not fit input width {e}", [g3, we])));
        }
        if self.shape(w_hh) != [g3, g] || self.shape(b_ih) != [g3] || self.shape(b_hh) != [g3] {
            return Err(AutodiffError::shape("gru", "recurrent weight or bias shape mismatch".to_string()));
        }
        if t == 0 || lengths.len() != b || lengths.iter().any(|&l| l == 0 || l > t) {
            return Err(AutodiffError::shape("gru", format!("lengths {lengths:?} invalid for {b} sequences of {t}")));
        }

        // Input projections for every (batch, step) row at once.
        let mut gi = vec![T::zero(); b * t * g3];
        matmul(self.value(x).data(), false, self.value(w_ih).data(), true, &mut gi, b * t, e, g3, false);
        let bi_s = self.value(b_ih).data();
        for row in gi.chunks_mut(g3) {
            row.iter_mut().zip(bi_s).for_each(|(v, &bb)| *v += bb);
        }

        let whh = self.value(w_hh).data();
        let bhh = self.value(b_hh).data();
        let bg = b * g;
        let mut states = vec![T::zero(); (t + 1) * bg];
        let mut r = vec![T::zero(); t * bg];
        let mut z = vec![T::zero(); t * bg];
        let mut n = vec![T::zero(); t * bg];
        let mut hn = vec![T::zero(); t * bg];
        let mut gh = vec![T::zero(); b * g3];
        for step in 0..t {
            let (prev_all, next_all) = states.split_at_mut((step + 1) * bg);
            let prev = &prev_all[step * bg..];
            let next = &mut next_all[..bg];
            matmul(prev, false, whh, true, &mut gh, b, g, g3, false);
            for bi in 0..b {
                let hp = &prev[bi * g..(bi + 1) * g];
                let hnext = &mut next[bi * g..(bi + 1) * g];
                if step >= lengths[bi] {
                    hnext.copy_from_slice(hp);
                    continue;
                }
                let gir = &gi[(bi * t + step) * g3..(bi * t + step + 1) * g3];
                let ghr = &gh[bi * g3..(bi + 1) * g3];
                let o = step * bg + bi * g;
                for j in 0..g {
                    let rj = sigmoid(gir[j] + ghr[j] + bhh[j]);
                    let zj = sigmoid(gir[g + j] + ghr[g + j] + bhh[g + j]);
                    let hnj = ghr[2 * g + j] + bhh[2 * g + j];
                    let nj = (gir[2 * g + j] + rj * hnj).tanh();
                    r[o + j] = rj;
                    z[o + j] = zj;
                    n[o + j] = nj;
                    hn[o + j] = hnj;
                    hnext[j] = (T::one() - zj) * nj + zj * hp[j];
                }
            }
        }
        let out = states[t * bg..].to_vec();
        let cache = GruCache { batch: b, steps: t, hidden: g, lengths: lengths.to_vec(), states, r, z, n, hn };
        let rg = self.any_grad(&[x, w_ih, w_hh, b_ih, b_hh]);
        let value = Tensor::from_vec(&[b, g], out)?;
        Ok(self.push(value, Op::Gru { x, w_ih, w_hh, b_ih, b_hh, cache: Box::new(cache) }, rg))
    }
}

pub(crate) fn backward<T: Real>(
    tape: &Tape<T>,
    [x, w_ih, w_hh, b_ih, b_hh]: [Var; 5],
    c: &GruCache<T>,
    g_out: &[T],
    acc: &mut Accumulator<'_, T>,
) {
    let (b, t, g) = (c.batch, c.steps, c.hidden);
    let g3 = 3 * g;
    let bg = b * g;
    let e = tape.shape(x)[2];
    let whh = tape.value(w_hh).data();

    let mut dh = g_out.to_vec();
    let mut dgi = vec![T::zero(); b * t * g3];
    let mut dgh = vec![T::zero(); b * g3];
    let mut dwhh = vec![T::zero(); g3 * g];
    let mut dbhh = vec![T::zero(); g3];
    for step in (0..t).rev() {
        let prev = &c.states[step * bg..(step + 1) * bg];
        dgh.iter_mut().for_each(|v| *v = T::zero());
        let mut dprev = vec![T::zero(); bg];
        for bi in 0..b {
            let dhb = &dh[bi * g..(bi + 1) * g];
            if step >= c.lengths[bi] {
                dprev[bi * g..(bi + 1) * g].copy_from_slice(dhb);
                continue;
            }
            let o = step * bg + bi * g;
            let row = (bi * t + step) * g3;
            for j in 0..g {
                let (rj, zj, nj, hnj) = (c.r[o + j], c.z[o + j], c.n[o + j], c.hn[o + j]);
                let d = dhb[j];
                let dn = d * (T::one() - zj);
                let dz = d * (prev[bi * g + j] - nj);
                dprev[bi * g + j] = d * zj;
                let dn_pre = dn * (T::one() - nj * nj);
                let dr_pre = dn_pre * hnj * rj * (T::one() - rj);
                let dz_pre = dz * zj * (T::one() - zj);
                dgi[row + j] = dr_pre;
                dgi[row + g + j] = dz_pre;
                dgi[row + 2 * g + j] = dn_pre;
                dgh[bi * g3 + j] = dr_pre;
                dgh[bi * g3 + g + j] = dz_pre;
                dgh[bi * g3 + 2 * g + j] = dn_pre * rj;
            }
        }
        // dprev += dgh W_hh ; dW_hh += dgh^T prev
        matmul(&dgh, false, whh, false, &mut dprev, b, g3, g, true);
        matmul(&dgh, true, prev, false, &mut dwhh, g3, b, g, true);
        for row in dgh.chunks(g3) {
            dbhh.iter_mut().zip(row).for_each(|(d, &v)| *d += v);
        }
        dh = dprev;
    }

    if let Some(d) = acc.get(w_hh) {
        d.iter_mut().zip(&dwhh).for_each(|(a, &v)| *a += v);
    }
    if let Some(d) = acc.get(b_hh) {
        d.iter_mut().zip(&dbhh).for_each(|(a, &v)| *a += v);
    }
    if let Some(d) = acc.get(b_ih) {
        for row in dgi.chunks(g3) {
            d.iter_mut().zip(row).for_each(|(a, &v)| *a += v);
        }
    }
    if let Some(d) = acc.get(w_ih) {
        matmul(&dgi, true, tape.value(x).data(), false, d, g3, b * t, e, true);
    }
    if let Some(d) = acc.get(x) {
        matmul(&dgi, false, tape.value(w_ih).data(), false, d, b * t, g3, e, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(tape: &mut Tape<f64>, e: usize, g: usize, fill: f64) -> [Var; 4] {
        [
            tape.input(Tensor::full(&[3 * g, e], fill)),
            tape.input(Tensor::full(&[3 * g, g], fill)),
            tape.input(Tensor::zeros(&[3 * g])),
            tape.input(Tensor::zeros(&[3 * g])),
        ]
    }

    #[test]
    fn zero_weights_single_step_gives_zero_state() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(Tensor::full(&[1, 1, 4], 0.7));
        let [wi, wh, bi, bh] = setup(&mut tape, 4, 3, 0.0);
        let h = tape.gru(x, &[1], wi, wh, bi, bh).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0; 3]);
    }

    #[test]
    fn padding_past_length_is_ignored() {
        let mut tape = Tape::<f64>::new();
        let short = tape.input(Tensor::from_vec(&[1, 2, 1], vec![0.3, -0.8]).unwrap());
        let padded = tape.input(Tensor::from_vec(&[1, 4, 1], vec![0.3, -0.8, 5.0, 5.0]).unwrap());
        let [wi, wh, bi, bh] = setup(&mut tape, 1, 2, 0.4);
        let a = tape.gru(short, &[2], wi, wh, bi, bh).unwrap();
        let b = tape.gru(padded, &[2], wi, wh, bi, bh).unwrap();
        assert_eq!(tape.value(a), tape.value(b));
        assert!(tape.gru(padded, &[0], wi, wh, bi, bh).is_err());
    }
}
