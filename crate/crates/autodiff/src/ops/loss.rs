use crate::error::{AutodiffError, Result};
use crate::tape::{Accumulator, Op, Tape, Var};
use crate::{Real, Tensor};

/// Numerically stable softmax of one row.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total = exps.iter().copied().sum::<T>();
    exps.into_iter().map(|e| e / total).collect()
}

impl<T: Real> Tape<T> {
    /// Mean cross-entropy of `logits: (n, classes)` against class indices.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (n, k) = self.value(logits).dims2("softmax_cross_entropy")?;
        if targets.len() != n || n == 0 {
            return Err(AutodiffError::shape(
                "softmax_cross_entropy",
                format!("{} targets for {n} rows", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= k) {
            return Err(AutodiffError::shape("softmax_cross_entropy", format!("target {bad} outside {k} classes")));
        }
        let xs = self.value(logits).data();
        let mut probs = Vec::with_capacity(n * k);
        let mut loss = T::zero();
        for (row, &t) in xs.chunks(k).zip(targets) {
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
            loss += lse - row[t];
            probs.extend(softmax(row));
        }
        let loss = loss / T::from_usize(n).unwrap();
        let rg = self.requires_grad(logits);
        Ok(self.push(Tensor::scalar(loss), Op::SoftmaxCrossEntropy { logits, probs, targets: targets.to_vec() }, rg))
    }
}

pub(crate) fn backward<T: Real>(logits: Var, probs: &[T], targets: &[usize], g: &[T], acc: &mut Accumulator<'_, T>) {
    let n = targets.len();
    let k = probs.len() / n;
    let scale = g[0] / T::from_usize(n).unwrap();
    if let Some(dx) = acc.get(logits) {
        for (i, &t) in targets.iter().enumerate() {
            for j in 0..k {
                let onehot = if j == t { T::one() } else { T::zero() };
                dx[i * k + j] += scale * (probs[i * k + j] - onehot);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_log_class_count() {
        let mut tape = Tape::<f64>::new();
        let x = tape.input(Tensor::zeros(&[1, 57]));
        let l = tape.softmax_cross_entropy(x, &[3]).unwrap();
        assert!((tape.value(l).item() - 57f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_logit_drives_loss_to_zero() {
        let mut tape = Tape::<f64>::new();
        let mut row = vec![0.0; 10];
        row[4] = 60.0;
        let x = tape.input(Tensor::from_vec(&[1, 10], row).unwrap());
        let l = tape.softmax_cross_entropy(x, &[4]).unwrap();
        assert!(tape.value(l).item() < 1e-20);
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let p = softmax(&[1000.0f32, 1000.0]);
        assert_eq!(p, vec![0.5, 0.5]);
    }
}
