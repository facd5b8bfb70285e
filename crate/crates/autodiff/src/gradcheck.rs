use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::tape::{Tape, Var};
use crate::Tensor;

/// Maximum relative error per checked input.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: Vec<f64>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.max_rel_error.iter().copied().fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() < self.tolerance
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares analytic gradients of `f` against central differences with step `h`.
///
/// `f` builds its output from the given leaf variables. A non-scalar output
/// is reduced to a scalar by a dot product with a fixed random tensor drawn
/// from `seed`, so every output element contributes.
pub fn grad_check<F>(f: F, inputs: &[Tensor<f64>], h: f64, tolerance: f64, seed: u64) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var>,
{
    let mut projection: Option<Tensor<f64>> = None;
    let mut eval = |vals: &[Tensor<f64>], want_grads: bool| -> Result<(f64, Vec<Vec<f64>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        let root = if tape.value(out).numel() == 1 {
            out
        } else {
            let proj = projection.get_or_insert_with(|| {
                let mut rng = StdRng::seed_from_u64(seed);
                let shape = tape.shape(out).to_vec();
                let n = shape.iter().product();
                Tensor::from_vec(&shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
            });
            let r = tape.input(proj.clone());
            let prod = tape.mul(out, r)?;
            tape.sum(prod)
        };
        let loss = tape.value(root).item();
        let grads = if want_grads {
            let g = tape.backward(root);
            vars.iter()
                .zip(vals)
                .map(|(v, t)| g.get(*v).map_or_else(|| vec![0.0; t.numel()], <[f64]>::to_vec))
                .collect()
        } else {
            Vec::new()
        };
        Ok((loss, grads))
    };

    let (_, analytic) = eval(inputs, true)?;
    let mut work: Vec<Tensor<f64>> = inputs.to_vec();
    let mut max_rel_error = Vec::with_capacity(inputs.len());
    for (i, grad) in analytic.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for j in 0..inputs[i].numel() {
            let orig = inputs[i].data()[j];
            work[i].data_mut()[j] = orig + h;
            let (plus, _) = eval(&work, false)?;
            work[i].data_mut()[j] = orig - h;
            let (minus, _) = eval(&work, false)?;
            work[i].data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(relative_error(grad[j], numeric));
        }
        max_rel_error.push(worst);
    }
    Ok(GradCheckReport { max_rel_error, tolerance })
}
