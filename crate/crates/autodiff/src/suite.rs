//! Finite-difference checks for every differentiable operator.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::gradcheck::{grad_check, GradCheckReport};
use crate::ops::{BatchNormMode, Padding};
use crate::Tensor;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

fn rand_tensor(rng: &mut StdRng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).expect("shape")
}

/// Runs the gradient check of each operator on random inputs drawn from `seed`.
pub fn run_op_suite(seed: u64) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut check = |name: &'static str,
                     inputs: Vec<Tensor<f64>>,
                     f: &dyn Fn(&mut crate::Tape<f64>, &[crate::Var]) -> Result<crate::Var>|
     -> Result<()> {
        let report = grad_check(f, &inputs, STEP, TOLERANCE, seed ^ 0x5eed)?;
        out.push((name, report));
        Ok(())
    };

    let x = rand_tensor(&mut rng, &[1, 2, 5, 7]);
    let w = rand_tensor(&mut rng, &[3, 2, 3, 3]);
    let b = rand_tensor(&mut rng, &[3]);
    check("conv2d_same_stride2", vec![x.clone(), w.clone(), b.clone()], &|t, v| {
        t.conv2d(v[0], v[1], Some(v[2]), (2, 2), Padding::Same)
    })?;
    check("conv2d_valid", vec![x.clone(), w.clone()], &|t, v| t.conv2d(v[0], v[1], None, (1, 1), Padding::Valid))?;
    let w1 = rand_tensor(&mut rng, &[4, 2, 1, 1]);
    check("conv2d_pointwise", vec![x.clone(), w1], &|t, v| t.conv2d(v[0], v[1], None, (1, 1), Padding::Same))?;
    let wf = rand_tensor(&mut rng, &[2, 2, 3, 1]);
    check("conv2d_freq_kernel", vec![x.clone(), wf], &|t, v| t.conv2d(v[0], v[1], None, (2, 1), Padding::Same))?;

    check("maxpool2d", vec![x.clone()], &|t, v| t.maxpool2d(v[0], (2, 2), true))?;
    check("global_maxpool", vec![x.clone()], &|t, v| t.global_maxpool(v[0]))?;
    check("mean_over_freq", vec![x.clone()], &|t, v| t.mean_over_freq(v[0]))?;

    let xb = rand_tensor(&mut rng, &[3, 2, 2, 3]);
    let gamma = rand_tensor(&mut rng, &[2]);
    let beta = rand_tensor(&mut rng, &[2]);
    check("batchnorm2d_train_affine", vec![xb.clone(), gamma.clone(), beta.clone()], &|t, v| {
        Ok(t.batchnorm2d(v[0], Some(v[1]), Some(v[2]), BatchNormMode::Train, 1e-5)?.0)
    })?;
    check("batchnorm2d_train_plain", vec![xb.clone()], &|t, v| {
        Ok(t.batchnorm2d(v[0], None, None, BatchNormMode::Train, 1e-5)?.0)
    })?;
    check("batchnorm2d_eval", vec![xb.clone(), gamma.clone(), beta.clone()], &|t, v| {
        let mode = BatchNormMode::Eval { running_mean: &[0.1, -0.2], running_var: &[0.8, 1.3] };
        Ok(t.batchnorm2d(v[0], Some(v[1]), Some(v[2]), mode, 1e-5)?.0)
    })?;

    check("relu", vec![x.clone()], &|t, v| Ok(t.relu(v[0])))?;
    let mask_seed = rng.random::<u64>();
    check("dropout", vec![x.clone()], &|t, v| {
        let mut r = StdRng::seed_from_u64(mask_seed);
        t.dropout(v[0], 0.25, true, &mut r)
    })?;

    let xl = rand_tensor(&mut rng, &[3, 4]);
    let wl = rand_tensor(&mut rng, &[5, 4]);
    let bl = rand_tensor(&mut rng, &[5]);
    check("linear", vec![xl.clone(), wl, bl], &|t, v| t.linear(v[0], v[1], Some(v[2])))?;
    check("narrow", vec![xl.clone()], &|t, v| t.narrow(v[0], 1, 2))?;

    let table = rand_tensor(&mut rng, &[6, 3]);
    check("embedding", vec![table], &|t, v| t.embedding(v[0], &[1, 4, 4, 0, 5, 2], 2, 3))?;

    let xc = rand_tensor(&mut rng, &[2, 3, 2, 3]);
    let xd = rand_tensor(&mut rng, &[2, 1, 2, 3]);
    check("concat_channels", vec![xc.clone(), xd], &|t, v| t.concat_channels(v[0], v[1]))?;
    let xe = rand_tensor(&mut rng, &[2, 3, 2, 3]);
    check("add", vec![xc.clone(), xe.clone()], &|t, v| t.add(v[0], v[1]))?;
    check("mul", vec![xc.clone(), xe], &|t, v| t.mul(v[0], v[1]))?;
    check("sum", vec![xc.clone()], &|t, v| Ok(t.sum(v[0])))?;

    let g3 = rand_tensor(&mut rng, &[3]);
    let b3 = rand_tensor(&mut rng, &[3]);
    check("film_shared", vec![xc.clone(), g3, b3], &|t, v| t.film(v[0], v[1], v[2]))?;
    let g23 = rand_tensor(&mut rng, &[2, 3]);
    let b23 = rand_tensor(&mut rng, &[2, 3]);
    check("film_per_sample", vec![xc, g23, b23], &|t, v| t.film(v[0], v[1], v[2]))?;

    let (e, g) = (3, 4);
    let xs = rand_tensor(&mut rng, &[2, 5, e]);
    let wi = rand_tensor(&mut rng, &[3 * g, e]);
    let wh = rand_tensor(&mut rng, &[3 * g, g]);
    let bi = rand_tensor(&mut rng, &[3 * g]);
    let bh = rand_tensor(&mut rng, &[3 * g]);
    check("gru", vec![xs, wi, wh, bi, bh], &|t, v| t.gru(v[0], &[5, 3], v[1], v[2], v[3], v[4]))?;

    let logits = rand_tensor(&mut rng, &[4, 6]);
    check("softmax_cross_entropy", vec![logits], &|t, v| t.softmax_cross_entropy(v[0], &[0, 5, 2, 2]))?;

    Ok(out)
}
