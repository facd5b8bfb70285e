use crate::params::ParamStore;
use crate::Real;

/// Adam with the weight decay added to the gradient as an L2 term.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, betas: (f64, f64), eps: f64, weight_decay: f64) -> Self {
        Self {
            lr: T::from_f64_lossy(lr),
            beta1: T::from_f64_lossy(betas.0),
            beta2: T::from_f64_lossy(betas.1),
            eps: T::from_f64_lossy(eps),
            weight_decay: T::from_f64_lossy(weight_decay),
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Defaults used for every training run: lr 3e-4, betas (0.9, 0.999),
    /// eps 1e-8, weight decay 5e-6.
    pub fn standard() -> Self {
        Self::new(3e-4, (0.9, 0.999), 1e-8, 5e-6)
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Applies one update from the gradients accumulated in `store`.
    pub fn step(&mut self, store: &mut ParamStore<T>) {
        if self.m.len() != store.len() {
            self.m = store.iter().map(|(_, p)| vec![T::zero(); p.value.numel()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let grads = p.grad.data().to_vec();
            for (((w, g), mi), vi) in p.value.data_mut().iter_mut().zip(grads).zip(m.iter_mut()).zip(v.iter_mut()) {
                let g = g + self.weight_decay * *w;
                *mi = self.beta1 * *mi + (T::one() - self.beta1) * g;
                *vi = self.beta2 * *vi + (T::one() - self.beta2) * g * g;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w = *w - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }

    /// Multiplies the learning rate, e.g. by 0.1 on a plateau.
    pub fn scale_lr(&mut self, factor: f64) {
        self.lr *= T::from_f64_lossy(factor);
    }
}
