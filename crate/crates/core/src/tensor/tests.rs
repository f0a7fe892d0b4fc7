use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(lo..hi))
}

fn param(t: Tensor<f64>) -> Tensor<f64> {
    t.with_requires_grad(true)
}

/// Direct 2D cross-correlation with zero padding, one image, one channel.
fn brute_conv2d(x: &[f64], n: usize, w: &[f64], k: usize, stride: usize, pad: usize, bias: f64) -> Vec<f64> {
    let out = (n + 2 * pad - k) / stride + 1;
    let mut y = vec![bias; out * out];
    for oi in 0..out {
        for oj in 0..out {
            for ki in 0..k {
                for kj in 0..k {
                    let i = (oi * stride + ki) as isize - pad as isize;
                    let j = (oj * stride + kj) as isize - pad as isize;
                    if i >= 0 && j >= 0 && (i as usize) < n && (j as usize) < n {
                        y[oi * out + oj] += w[ki * k + kj] * x[i as usize * n + j as usize];
                    }
                }
            }
        }
    }
    y
}

#[test]
fn conv3d_halves_extent() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros([1, 1, 32, 32, 32]));
    let w = tape.constant(Tensor::full([64, 1, 5, 5, 5], 0.01));
    let b = tape.constant(Tensor::zeros([64]));
    let y = tape.conv_nd(x, w, Some(b), 2, 2).unwrap();
    assert_eq!(tape.shape(y), &[1, 64, 16, 16, 16]);
}

#[test]
fn conv_of_zero_input_is_bias() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros([1, 1, 5, 5, 5]));
    let w = tape.constant(random(&[2, 1, 5, 5, 5], -1.0, 1.0, 1));
    let b = tape.constant(Tensor::new([2], vec![0.25, -1.5]).unwrap());
    let y = tape.conv_nd(x, w, Some(b), 2, 2).unwrap();
    let v = tape.value(y);
    assert_eq!(v.shape(), &[1, 2, 3, 3, 3]);
    assert!(v.data()[..27].iter().all(|&e| e == 0.25));
    assert!(v.data()[27..].iter().all(|&e| e == -1.5));
}

#[test]
fn conv2d_matches_nested_loops() {
    let x = random(&[1, 1, 4, 4], -1.0, 1.0, 2);
    let w = random(&[1, 1, 5, 5], -1.0, 1.0, 3);
    let mut tape = Tape::<f64>::new();
    let (xv, wv) = (tape.constant(x.clone()), tape.constant(w.clone()));
    let b = tape.constant(Tensor::full([1], 0.1));
    let y = tape.conv_nd(xv, wv, Some(b), 2, 2).unwrap();
    let expected = brute_conv2d(x.data(), 4, w.data(), 5, 2, 2, 0.1);
    assert_eq!(tape.shape(y), &[1, 1, 2, 2]);
    for (a, e) in tape.value(y).data().iter().zip(&expected) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn conv_rejects_channel_mismatch() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros([1, 2, 4, 4, 4]));
    let w = tape.constant(Tensor::zeros([3, 1, 5, 5, 5]));
    assert!(matches!(
        tape.conv_nd(x, w, None, 2, 2),
        Err(TensorError::Contract { .. })
    ));
    assert!(tape.conv_transpose_nd(x, w, None, 2, 2).is_err());
}

#[test]
fn transposed_chain_reaches_32() {
    let mut tape = Tape::<f32>::new();
    let mut h = tape.constant(Tensor::full([1, 256, 4, 4, 4], 0.1));
    for (cin, cout) in [(256, 16), (16, 8), (8, 1)] {
        let w = tape.constant(Tensor::full([cin, cout, 5, 5, 5], 0.001));
        h = tape.conv_transpose_nd(h, w, None, 2, 2).unwrap();
    }
    assert_eq!(tape.shape(h), &[1, 1, 32, 32, 32]);
}

#[test]
fn transposed_of_zero_input_is_bias() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::zeros([2, 3, 2, 2, 2]));
    let w = tape.constant(random(&[3, 2, 5, 5, 5], -1.0, 1.0, 4));
    let b = tape.constant(Tensor::new([2], vec![0.5, -0.25]).unwrap());
    let y = tape.conv_transpose_nd(x, w, Some(b), 2, 2).unwrap();
    let v = tape.value(y);
    assert_eq!(v.shape(), &[2, 2, 4, 4, 4]);
    for (i, e) in v.data().iter().enumerate() {
        let c = (i / 64) % 2;
        assert_eq!(*e, [0.5, -0.25][c]);
    }
}

#[test]
fn transposed_columns_are_rows_of_conv_matrix() {
    // conv: R^(2*4^3) -> R^(3*2^3); materialize it by probing with unit vectors
    let (c_big, c_small) = (2usize, 3usize);
    let big_len = c_big * 64;
    let small_len = c_small * 8;
    let w = random(&[c_small, c_big, 5, 5, 5], -1.0, 1.0, 5);

    let mut conv_matrix = vec![vec![0.0; big_len]; small_len];
    for j in 0..big_len {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_fn([1, c_big, 4, 4, 4], |i| (i == j) as u8 as f64));
        let wv = tape.constant(w.clone());
        let y = tape.conv_nd(x, wv, None, 2, 2).unwrap();
        for (i, v) in tape.value(y).data().iter().enumerate() {
            conv_matrix[i][j] = *v;
        }
    }
    for (i, row) in conv_matrix.iter().enumerate() {
        let mut tape = Tape::<f64>::new();
        let e = tape.constant(Tensor::from_fn([1, c_small, 2, 2, 2], |k| (k == i) as u8 as f64));
        let wv = tape.constant(w.clone());
        let col = tape.conv_transpose_nd(e, wv, None, 2, 2).unwrap();
        for (a, b) in tape.value(col).data().iter().zip(row) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn batch_norm_constant_channel_gives_zero() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full([2, 1, 3, 3], 4.0));
    let g = tape.constant(Tensor::full([1], 1.0));
    let b = tape.constant(Tensor::zeros([1]));
    let mut state = BatchNormState::new(1);
    let y = tape.batch_norm(x, g, b, BnMode::TRAIN, &mut state).unwrap();
    assert!(tape.value(y).data().iter().all(|v| *v == 0.0));
    assert_eq!(state.updates, 1);
}

#[test]
fn batch_norm_zero_gamma_gives_beta() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(random(&[2, 2, 3, 3], -2.0, 2.0, 6));
    let g = tape.constant(Tensor::zeros([2]));
    let b = tape.constant(Tensor::new([2], vec![0.3, -0.7]).unwrap());
    let mut state = BatchNormState::new(2);
    let y = tape.batch_norm(x, g, b, BnMode::TRAIN, &mut state).unwrap();
    for (i, v) in tape.value(y).data().iter().enumerate() {
        assert_eq!(*v, [0.3, -0.7][(i / 9) % 2]);
    }
}

#[test]
fn batch_norm_standardizes_each_channel() {
    let gamma = [1.5, 0.5, 2.0];
    let beta = [0.1, -0.2, 0.3];
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(random(&[2, 3, 4, 4], -3.0, 3.0, 7));
    let g = tape.constant(Tensor::new([3], gamma.to_vec()).unwrap());
    let b = tape.constant(Tensor::new([3], beta.to_vec()).unwrap());
    let mut state = BatchNormState::new(3);
    let y = tape.batch_norm(x, g, b, BnMode::TRAIN, &mut state).unwrap();
    let out = tape.value(y).data();
    for c in 0..3 {
        let vals: Vec<f64> = (0..2)
            .flat_map(|n| out[(n * 3 + c) * 16..][..16].to_vec())
            .collect();
        let mean = vals.iter().sum::<f64>() / 32.0;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 32.0).sqrt();
        assert!((mean - beta[c]).abs() < 1e-5, "mean {mean}");
        assert!((std - gamma[c]).abs() < 1e-5, "std {std}");
    }
}

#[test]
fn batch_norm_eval_requires_statistics() {
    let mut tape = Tape::<f32>::new();
    let x = tape.constant(Tensor::zeros([1, 2, 2, 2]));
    let g = tape.constant(Tensor::full([2], 1.0));
    let b = tape.constant(Tensor::zeros([2]));
    let mut state = BatchNormState::new(2);
    assert_eq!(
        tape.batch_norm(x, g, b, BnMode::Eval, &mut state),
        Err(TensorError::UninitializedStatistics)
    );
    let mut unit = BatchNormState::unit(2);
    let y = tape.batch_norm(x, g, b, BnMode::Eval, &mut unit).unwrap();
    assert!(tape.value(y).data().iter().all(|v| *v == 0.0));
}

#[test]
fn batch_norm_eval_is_pure_and_frozen_train_leaves_state() {
    let x = random(&[3, 2, 2, 2], -1.0, 1.0, 8);
    let mut state = BatchNormState::new(2);
    {
        let mut tape = Tape::<f64>::new();
        let xv = tape.constant(x.clone());
        let g = tape.constant(Tensor::full([2], 1.0));
        let b = tape.constant(Tensor::zeros([2]));
        tape.batch_norm(xv, g, b, BnMode::TRAIN, &mut state).unwrap();
    }
    let snapshot = state.clone();
    let run = |mode: BnMode, state: &mut BatchNormState| {
        let mut tape = Tape::<f64>::new();
        let xv = tape.constant(x.clone());
        let g = tape.constant(Tensor::full([2], 1.0));
        let b = tape.constant(Tensor::zeros([2]));
        let y = tape.batch_norm(xv, g, b, mode, state).unwrap();
        tape.value(y).data().to_vec()
    };
    let a = run(BnMode::Eval, &mut state);
    let b = run(BnMode::Eval, &mut state);
    assert_eq!(a, b);
    run(BnMode::TRAIN_FROZEN, &mut state);
    assert_eq!(state, snapshot);
}

#[test]
fn activation_values() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::new([3], vec![-1.0, 0.0, 2.0]).unwrap());
    let r = tape.relu(x);
    let t = tape.tanh(x);
    let s = tape.sigmoid(x);
    assert_eq!(tape.value(r).data(), &[0.0, 0.0, 2.0]);
    assert_eq!(tape.value(t).data()[1], 0.0);
    assert_eq!(tape.value(s).data()[1], 0.5);
}

#[test]
fn sigmoid_slope_at_zero() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(param(Tensor::zeros([1])));
    let s = tape.sigmoid(x);
    let l = tape.sum(s);
    let g = tape.backward(l).unwrap();
    let analytic = g.grad(x).unwrap()[0];
    let h = 1e-4;
    let numeric = (sigmoid(h) - sigmoid(-h)) / (2.0 * h);
    assert!((analytic - 0.25).abs() < 1e-12);
    assert!((analytic - numeric).abs() < 1e-8);
}

#[test]
fn linear_identity_and_ones() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::new([1, 3], vec![1.0, 2.0, 3.0]).unwrap());
    let eye = tape.constant(Tensor::from_fn([3, 3], |i| (i % 4 == 0) as u8 as f64));
    let zero = tape.constant(Tensor::zeros([3]));
    let y = tape.linear(x, eye, Some(zero)).unwrap();
    assert_eq!(tape.value(y).data(), &[1.0, 2.0, 3.0]);
    let ones = tape.constant(Tensor::full([2, 3], 1.0));
    let y = tape.linear(x, ones, None).unwrap();
    assert_eq!(tape.value(y).data(), &[6.0, 6.0]);
}

#[test]
fn linear_matches_matrix_vector_oracle() {
    let x = random(&[3, 5], -1.0, 1.0, 9);
    let w = random(&[4, 5], -1.0, 1.0, 10);
    let b = random(&[4], -1.0, 1.0, 11);
    let mut tape = Tape::<f64>::new();
    let (xv, wv, bv) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(b.clone()));
    let y = tape.linear(xv, wv, Some(bv)).unwrap();
    for n in 0..3 {
        for o in 0..4 {
            let mut e = b.data()[o];
            for i in 0..5 {
                e += x.data()[n * 5 + i] * w.data()[o * 5 + i];
            }
            assert!((tape.value(y).data()[n * 4 + o] - e).abs() < 1e-12);
        }
    }
    let bad = tape.constant(Tensor::zeros([4, 6]));
    assert!(tape.linear(xv, bad, None).is_err());
}

#[test]
fn backward_of_sum_and_square() {
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(param(Tensor::new([2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap()));
    let s = tape.sum(x);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[1.0; 4]);

    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(param(Tensor::new([2], vec![1.0, 2.0]).unwrap()));
    let sq = tape.mul(x, x).unwrap();
    let s = tape.sum(sq);
    let g = tape.backward(s).unwrap();
    assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
    assert_eq!(g.leaf(x).unwrap().grad(), Some(&[2.0, 4.0][..]));
}

#[test]
fn backward_rejects_non_scalar() {
    let mut tape = Tape::<f32>::new();
    let x = tape.leaf(Tensor::zeros([2]).with_requires_grad(true));
    let y = tape.relu(x);
    assert!(matches!(tape.backward(y), Err(TensorError::NonScalarLoss { .. })));
}

#[test]
fn constants_receive_no_gradient() {
    let mut tape = Tape::<f64>::new();
    let x = tape.constant(Tensor::full([2], 1.0));
    let w = tape.leaf(param(Tensor::full([2], 3.0)));
    let y = tape.mul(x, w).unwrap();
    let l = tape.sum(y);
    let g = tape.backward(l).unwrap();
    assert!(g.grad(x).is_none());
    assert_eq!(g.grad(w).unwrap(), &[1.0, 1.0]);
}

#[test]
fn composite_graph_passes_gradient_check() {
    let inputs = vec![
        param(random(&[2, 1, 4, 4, 4], -2.0, 2.0, 12)),
        param(random(&[3, 1, 5, 5, 5], -0.5, 0.5, 13)),
        param(random(&[3], -0.5, 0.5, 14)),
        param(random(&[3], 0.5, 1.5, 15)),
        param(random(&[3], -0.5, 0.5, 16)),
        param(random(&[2, 24], -0.5, 0.5, 17)),
        param(random(&[2], -0.5, 0.5, 18)),
    ];
    let report = grad_check(
        &inputs,
        |tape, v| {
            let mut state = BatchNormState::new(3);
            let c = tape.conv_nd(v[0], v[1], Some(v[2]), 2, 2)?;
            let n = tape.batch_norm(c, v[3], v[4], BnMode::TRAIN, &mut state)?;
            let r = tape.relu(n);
            let f = tape.reshape(r, &[2, 24])?;
            let y = tape.linear(f, v[5], Some(v[6]))?;
            let t = tape.tanh(y);
            let sq = tape.mul(t, t)?;
            Ok(tape.sum(sq))
        },
        GradCheck {
            step: 1e-5,
            ..GradCheck::default()
        },
    )
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}

#[test]
fn linear_layer_gradcheck() {
    let inputs = vec![
        param(random(&[3, 4], -2.0, 2.0, 19)),
        param(random(&[5, 4], -2.0, 2.0, 20)),
        param(random(&[5], -2.0, 2.0, 21)),
    ];
    let report = grad_check(
        &inputs,
        |tape, v| {
            let y = tape.linear(v[0], v[1], Some(v[2]))?;
            let sq = tape.mul(y, y)?;
            Ok(tape.sum(sq))
        },
        GradCheck::default(),
    )
    .unwrap();
    assert!(report.passes(1e-4), "{report:?}");
}

#[test]
fn conv3d_tiny_gradcheck() {
    let inputs = vec![
        param(random(&[1, 2, 4, 4, 4], -2.0, 2.0, 22)),
        param(random(&[2, 2, 5, 5, 5], -1.0, 1.0, 23)),
        param(random(&[2], -1.0, 1.0, 24)),
    ];
    let report = grad_check(
        &inputs,
        |tape, v| {
            let y = tape.conv_nd(v[0], v[1], Some(v[2]), 2, 2)?;
            let sq = tape.mul(y, y)?;
            Ok(tape.sum(sq))
        },
        GradCheck::default(),
    )
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}

#[test]
fn relu_gradcheck_away_from_kink() {
    let data = vec![-1.5, -0.3, 0.2, 0.9, 1.7, -0.11];
    let inputs = vec![param(Tensor::new([6], data).unwrap())];
    let report = grad_check(
        &inputs,
        |tape, v| {
            let r = tape.relu(v[0]);
            let sq = tape.mul(r, r)?;
            Ok(tape.sum(sq))
        },
        GradCheck::default(),
    )
    .unwrap();
    assert!(report.passes(1e-5), "{report:?}");
}

/// Each remaining op through the checker, with inputs in [-2, 2].
#[test]
fn elementwise_and_structural_ops_gradcheck() {
    let opts = GradCheck {
        step: 1e-5,
        ..GradCheck::default()
    };
    let a = param(random(&[3, 4], -2.0, 2.0, 25));
    let b = param(random(&[3, 4], -2.0, 2.0, 26));
    let row = param(random(&[4], -2.0, 2.0, 27));
    let probs = param(random(&[3, 4], 0.05, 0.95, 28));
    let target = Tensor::from_fn([3, 4], |i| (i % 3 == 0) as u8 as f64);

    let checks: Vec<(&str, Vec<Tensor<f64>>, Box<dyn Fn(&mut Tape<f64>, &[Var]) -> Result<Var, TensorError>>)> = vec![
        ("add/sub/mul", vec![a.clone(), b.clone()], Box::new(|t, v| {
            let s = t.add(v[0], v[1])?;
            let d = t.sub(v[0], v[1])?;
            let m = t.mul(s, d)?;
            Ok(t.mean(m))
        })),
        ("mul_row/affine", vec![a.clone(), row.clone()], Box::new(|t, v| {
            let m = t.mul_row(v[0], v[1])?;
            let f = t.affine(m, -0.7, 0.3);
            let s = t.sigmoid(f);
            Ok(t.sum(s))
        })),
        ("concat/slice/reshape", vec![a.clone(), b.clone()], Box::new(|t, v| {
            let c = t.concat_rows(&[v[0], v[1]])?;
            let s = t.slice_rows(c, 2, 3)?;
            let r = t.reshape(s, &[12])?;
            let th = t.tanh(r);
            let sq = t.mul(th, r)?;
            Ok(t.sum(sq))
        })),
        ("log/likelihood", vec![probs.clone()], Box::new(move |t, v| {
            let tg = t.constant(target.clone());
            let ll = t.log_likelihood(v[0], tg, 1e-7)?;
            let lg = t.log_clamped(v[0], 1e-7, 1.0);
            let m = t.mean(lg);
            t.add(ll, m)
        })),
        ("l1", vec![a.clone(), b.clone()], Box::new(|t, v| t.l1_mean(v[0], v[1]))),
        ("batch_norm eval", vec![param(random(&[2, 3, 2, 2], -2.0, 2.0, 29)), param(random(&[3], 0.5, 1.5, 30)), param(random(&[3], -1.0, 1.0, 31))], Box::new(|t, v| {
            let mut state = BatchNormState::unit(3);
            state.mean = vec![0.1, -0.2, 0.3];
            state.var = vec![0.5, 2.0, 1.0];
            let y = t.batch_norm(v[0], v[1], v[2], BnMode::Eval, &mut state)?;
            let s = t.tanh(y);
            Ok(t.sum(s))
        })),
        ("conv_transpose 3d", vec![param(random(&[1, 2, 2, 2, 2], -2.0, 2.0, 32)), param(random(&[2, 3, 5, 5, 5], -1.0, 1.0, 33)), param(random(&[3], -1.0, 1.0, 34))], Box::new(|t, v| {
            let y = t.conv_transpose_nd(v[0], v[1], Some(v[2]), 2, 2)?;
            let s = t.tanh(y);
            Ok(t.sum(s))
        })),
        ("conv/conv_transpose 2d", vec![param(random(&[2, 1, 4, 4], -2.0, 2.0, 35)), param(random(&[2, 1, 5, 5], -1.0, 1.0, 36)), param(random(&[2, 1, 5, 5], -1.0, 1.0, 37))], Box::new(|t, v| {
            let y = t.conv_nd(v[0], v[1], None, 2, 2)?;
            let z = t.conv_transpose_nd(y, v[2], None, 2, 2)?;
            let s = t.tanh(z);
            Ok(t.sum(s))
        })),
    ];
    for (name, inputs, build) in checks {
        let report = grad_check(&inputs, |t, v| build(t, v), opts).unwrap();
        assert!(report.passes(1e-3), "{name}: {report:?}");
    }
}

#[test]
fn forward_is_bit_deterministic() {
    let run = || {
        let mut tape = Tape::<f32>::new();
        let x = tape.constant(random(&[2, 1, 8, 8, 8], -1.0, 1.0, 38).cast());
        let w = tape.constant(random(&[4, 1, 5, 5, 5], -1.0, 1.0, 39).cast());
        let y = tape.conv_nd(x, w, None, 2, 2).unwrap();
        let w2 = tape.constant(random(&[4, 2, 5, 5, 5], -1.0, 1.0, 40).cast());
        let z = tape.conv_transpose_nd(y, w2, None, 2, 2).unwrap();
        tape.value(z).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn log_likelihood_rejects_out_of_range() {
    let mut tape = Tape::<f64>::new();
    let p = tape.constant(Tensor::new([2], vec![0.5, 1.2]).unwrap());
    let t = tape.constant(Tensor::new([2], vec![0.0, 1.0]).unwrap());
    assert!(tape.log_likelihood(p, t, 1e-7).is_err());
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn conv_transpose_is_adjoint(seed in any::<u64>(), c_big in 1usize..3, c_small in 1usize..3) {
            let x = random(&[1, c_big, 4, 4, 4], -2.0, 2.0, seed);
            let y = random(&[1, c_small, 2, 2, 2], -2.0, 2.0, seed ^ 0x9e37);
            let w = random(&[c_small, c_big, 5, 5, 5], -1.0, 1.0, seed.wrapping_add(1));
            let mut tape = Tape::<f32>::new();
            let (xv, yv, wv) = (tape.constant(x.cast()), tape.constant(y.cast()), tape.constant(w.cast()));
            let cx = tape.conv_nd(xv, wv, None, 2, 2).unwrap();
            let ty = tape.conv_transpose_nd(yv, wv, None, 2, 2).unwrap();
            let dot = |a: &[f32], b: &[f32]| a.iter().zip(b).map(|(p, q)| *p as f64 * *q as f64).sum::<f64>();
            let lhs = dot(tape.value(cx).data(), tape.value(yv).data());
            let rhs = dot(tape.value(xv).data(), tape.value(ty).data());
            prop_assert!((lhs - rhs).abs() < 1e-4 * (1.0 + lhs.abs()), "{} vs {}", lhs, rhs);
        }
    }
}
