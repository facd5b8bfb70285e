use aqa_autodiff::checkpoint::Checkpoint;
use aqa_autodiff::{softmax, Adam, BatchNormMode, ParamStore, Tape, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn dropout_preserves_expectation() {
    let mut tape = Tape::<f64>::new();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = tape.input(Tensor::full(&[100_000], 1.0));
    let y = tape.dropout(x, 0.25, true, &mut rng).unwrap();
    let mean = tape.value(y).data().iter().sum::<f64>() / 100_000.0;
    assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
    let zeros = tape.value(y).data().iter().filter(|&&v| v == 0.0).count();
    assert!((zeros as f64 / 100_000.0 - 0.25).abs() < 0.01);
}

#[test]
fn adam_decreases_a_quadratic_monotonically() {
    let mut store = ParamStore::<f64>::new();
    let id = store.add("w", Tensor::scalar(3.0)).unwrap();
    let mut adam = Adam::new(0.01, (0.9, 0.999), 1e-8, 0.0);
    let mut last = f64::INFINITY;
    for _ in 0..100 {
        store.zero_grad();
        let mut tape = Tape::new();
        let w = tape.param(&store, id);
        let sq = tape.mul(w, w).unwrap();
        let loss = tape.sum(sq);
        let value = tape.value(loss).item();
        assert!(value < last, "loss went from {last} to {value}");
        last = value;
        tape.backward(loss).accumulate_into(&tape, &mut store);
        adam.step(&mut store);
    }
    assert!(last < 9.0);
}

#[test]
fn gru_is_order_sensitive() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut rand = |shape: &[usize]| {
        let n: usize = shape.iter().product();
        Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>()).unwrap()
    };
    let (e, g) = (4, 6);
    let seq = rand(&[1, 3, e]);
    let mut rev = seq.data().to_vec();
    rev.rotate_left(e);
    let weights = [rand(&[3 * g, e]), rand(&[3 * g, g]), rand(&[3 * g]), rand(&[3 * g])];
    let mut tape = Tape::<f64>::new();
    let [wi, wh, bi, bh] = weights.map(|w| tape.input(w));
    let a = tape.input(seq);
    let b = tape.input(Tensor::from_vec(&[1, 3, e], rev).unwrap());
    let ha = tape.gru(a, &[3], wi, wh, bi, bh).unwrap();
    let hb = tape.gru(b, &[3], wi, wh, bi, bh).unwrap();
    assert_ne!(tape.value(ha), tape.value(hb));
}

#[test]
fn batchnorm_reports_unbiased_running_statistics() {
    let mut tape = Tape::<f64>::new();
    let x = tape.input(Tensor::from_vec(&[2, 1, 1, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
    let (_, stats) = tape.batchnorm2d(x, None, None, BatchNormMode::Train, 1e-5).unwrap();
    let stats = stats.unwrap();
    assert!((stats.mean[0] - 2.5).abs() < 1e-12);
    assert!((stats.var[0] - 5.0 / 3.0).abs() < 1e-12);
}

#[test]
fn checkpoint_round_trip_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let mut store = ParamStore::<f32>::new();
    store.add("stem.conv.weight", Tensor::from_vec(&[2, 1, 1, 1], vec![0.25, -1.5]).unwrap()).unwrap();
    store.add("stem.conv.bias", Tensor::from_vec(&[2], vec![1e-3, 7.0]).unwrap()).unwrap();
    let buffers = vec![("stem.bn.running_mean".to_string(), Tensor::from_vec(&[2], vec![0.5, 0.5]).unwrap())];
    let ckpt = Checkpoint::from_store(&store, &buffers, "abc", serde_json::json!({"note": 1}));
    ckpt.save(dir.path()).unwrap();
    let blob = std::fs::read(dir.path().join("weights.bin")).unwrap();
    assert_eq!(blob.len(), 6 * 4);
    assert_eq!(&blob[..4], &0.25f32.to_le_bytes());

    let loaded = Checkpoint::load(dir.path()).unwrap();
    let mut fresh = ParamStore::<f32>::new();
    fresh.add("stem.conv.weight", Tensor::zeros(&[2, 1, 1, 1])).unwrap();
    fresh.add("stem.conv.bias", Tensor::zeros(&[2])).unwrap();
    loaded.restore_params(&mut fresh, "abc").unwrap();
    assert_eq!(fresh.by_name("stem.conv.bias").unwrap().value.data(), &[1e-3, 7.0]);
    assert_eq!(loaded.buffer("stem.bn.running_mean").unwrap().data(), &[0.5, 0.5]);
    assert!(loaded.restore_params(&mut fresh, "other").is_err());

    let mut wrong = ParamStore::<f32>::new();
    wrong.add("stem.conv.weight", Tensor::zeros(&[3, 1, 1, 1])).unwrap();
    wrong.add("stem.conv.bias", Tensor::zeros(&[2])).unwrap();
    assert!(loaded.restore_params(&mut wrong, "abc").is_err());
}

#[test]
fn forward_and_backward_are_bit_reproducible() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut tape = Tape::<f32>::new();
        let x = tape.leaf(aqa_autodiff::init::uniform(&[2, 3, 8, 9], 1.0, &mut rng));
        let w = tape.leaf(aqa_autodiff::init::fan_in_uniform(&[4, 3, 3, 3], 27, &mut rng));
        let y = tape.conv2d(x, w, None, (2, 2), aqa_autodiff::Padding::Same).unwrap();
        let (y, _) = tape.batchnorm2d(y, None, None, BatchNormMode::Train, 1e-5).unwrap();
        let y = tape.relu(y);
        let s = tape.sum(y);
        let g = tape.backward(s);
        (tape.value(s).item(), g.get(w).unwrap().to_vec(), g.get(x).unwrap().to_vec())
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn softmax_sums_to_one_and_cross_entropy_is_nonnegative(
        logits in prop::collection::vec(-50.0f64..50.0, 2..60),
        pick in 0usize..1000,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let target = pick % logits.len();
        let mut tape = Tape::<f64>::new();
        let n = logits.len();
        let x = tape.input(Tensor::from_vec(&[1, n], logits).unwrap());
        let l = tape.softmax_cross_entropy(x, &[target]).unwrap();
        prop_assert!(tape.value(l).item() >= 0.0);
    }

    #[test]
    fn same_conv_output_is_ceil_of_input_over_stride(
        h in 1usize..40, w in 1usize..40, k in 1usize..4, sh in 1usize..3, sw in 1usize..3,
    ) {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::zeros(&[1, 1, h, w]));
        let wt = tape.input(Tensor::zeros(&[1, 1, k, k]));
        let y = tape.conv2d(x, wt, None, (sh, sw), aqa_autodiff::Padding::Same).unwrap();
        prop_assert_eq!(tape.shape(y), &[1, 1, h.div_ceil(sh), w.div_ceil(sw)][..]);
    }

    #[test]
    fn finite_inputs_give_finite_outputs(vals in prop::collection::vec(-1e3f32..1e3, 24)) {
        let mut tape = Tape::<f32>::new();
        let x = tape.input(Tensor::from_vec(&[2, 3, 2, 2], vals).unwrap());
        let (y, _) = tape.batchnorm2d(x, None, None, BatchNormMode::Train, 1e-5).unwrap();
        let p = tape.global_maxpool(y).unwrap();
        let l = tape.softmax_cross_entropy(p, &[0, 2]).unwrap();
        prop_assert!(tape.value(y).is_finite());
        prop_assert!(tape.value(l).is_finite());
    }
}
