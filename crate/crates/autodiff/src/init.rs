use rand::Rng;

use crate::{Real, Tensor};

/// Uniform in `±sqrt(1 / fan_in)`.
pub fn fan_in_uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (1.0 / fan_in.max(1) as f64).sqrt();
    uniform(shape, bound, rng)
}

/// Uniform in `±bound`.
pub fn uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor<T> {
    let n = shape.iter().product();
    let data =
        (0..n).map(|_| T::from_f64_lossy(if bound > 0.0 { rng.random_range(-bound..bound) } else { 0.0 })).collect();
    Tensor::from_vec(shape, data).expect("shape and length agree")
}
