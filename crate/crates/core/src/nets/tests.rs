use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::tensor::{sigmoid, BnMode, GradCheck, Tape, Tensor};
use crate::voxel::VoxelGrid;

fn small_edgan() -> EdGanConfig {
    EdGanConfig {
        d_l: 16,
        channels: [4, 8, 16],
    }
}

fn tiny_lrcn(feature: usize, hidden: usize) -> LrcnConfig {
    LrcnConfig {
        d_l: 8,
        d_h: 16,
        c: 3,
        channels: [2, 2, 2],
        feature_dim: feature,
        hidden_dim: hidden,
        seed_channels: 2,
        mid_channels: 2,
    }
}

fn random_tensor(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0))
}

fn zero_all(p: &mut ModelParams<f64>) {
    for q in p.params_mut() {
        q.value.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
}

#[test]
fn encoder_width_follows_config() {
    let cfg = small_edgan();
    let mut p = ModelParams::<f64>::init(&generator_layout(&cfg), 1).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(random_tensor(&[2, 1, 16, 16, 16], 2));
    let mut b = p.binder(BnMode::TRAIN, false);
    let z = edgan_encoder(&mut tape, &mut b, &cfg, x).unwrap();
    assert_eq!(tape.shape(z), [2, 128]);
    let y = edgan_decoder(&mut tape, &mut b, &cfg, z).unwrap();
    assert_eq!(tape.shape(y), [2, 1, 16, 16, 16]);
    assert!(tape.value(y).data().iter().all(|&v| v > 0.0 && v < 1.0));
    assert_eq!(EdGanConfig::new(Scale::Full).latent_dim(), 16384);
}

#[test]
fn encoder_rejects_bad_volume() {
    let cfg = small_edgan();
    let mut p = ModelParams::<f32>::init(&generator_layout(&cfg), 1).unwrap();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 1, 8, 8, 8]));
    let mut b = p.binder(BnMode::TRAIN, false);
    assert!(edgan_encoder(&mut tape, &mut b, &cfg, x).is_err());
    let z = tape.constant(Tensor::zeros(vec![1, 100]));
    assert!(edgan_decoder(&mut tape, &mut b, &cfg, z).is_err());
}

#[test]
fn zero_input_gives_zero_latent() {
    let cfg = small_edgan();
    let mut p = ModelParams::<f64>::init(&generator_layout(&cfg), 4).unwrap();
    p.set_unit_norms();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![1, 1, 16, 16, 16]));
    let mut b = p.binder(BnMode::Eval, false);
    let z = edgan_encoder(&mut tape, &mut b, &cfg, x).unwrap();
    assert!(tape.value(z).data().iter().all(|&v| v == 0.0));
}

#[test]
fn zero_weights_give_half() {
    let cfg = small_edgan();
    let mut g = ModelParams::<f64>::init(&generator_layout(&cfg), 4).unwrap();
    let mut d = ModelParams::<f64>::init(&discriminator_layout(&cfg), 5).unwrap();
    zero_all(&mut g);
    zero_all(&mut d);
    let mut tape = Tape::new();
    let z = tape.constant(random_tensor(&[2, 128], 6));
    let y = edgan_decoder(&mut tape, &mut g.binder(BnMode::TRAIN, false), &cfg, z).unwrap();
    assert!(tape.value(y).data().iter().all(|&v| v == 0.5));
    let x = tape.constant(random_tensor(&[3, 1, 16, 16, 16], 7));
    let s = discriminator(&mut tape, &mut d.binder(BnMode::TRAIN, false), &cfg, x).unwrap();
    assert_eq!(tape.value(s).data(), [0.5, 0.5, 0.5]);
}

#[test]
fn discriminator_range_and_input_gradient() {
    let cfg = small_edgan();
    let p = ModelParams::<f64>::init(&discriminator_layout(&cfg), 8).unwrap();
    let x = random_tensor(&[2, 1, 16, 16, 16], 9).with_requires_grad(true);
    let report = crate::tensor::grad_check(
        &[x],
        |tape, v| {
            let mut b = p.detached_binder(BnMode::TRAIN_FROZEN, false);
            let s = discriminator(tape, &mut b, &cfg, v[0]).map_err(|e| match e {
                NetError::Tensor(t) => t,
                e => panic!("{e}"),
            })?;
            let vals = tape.value(s).data();
            assert!(vals.iter().all(|&v| v > 0.0 && v < 1.0));
            Ok(tape.sum(s))
        },
        GradCheck {
            step: 1e-5,
            floor: 1e-6,
            max_entries: 40,
        },
    )
    .unwrap();
    assert!(report.passes(1e-3), "{report:?}");
}

#[test]
fn lrcn_encoder_output_width() {
    let cfg = LrcnConfig::new(Scale::Desk);
    let mut p = ModelParams::<f32>::init(&lrcn_layout(&cfg), 1).unwrap();
    p.set_unit_norms();
    let mut tape = Tape::new();
    let x = tape.constant(Tensor::zeros(vec![3, 1, 16, 16, 5]));
    let v = lrcn_encoder(&mut tape, &mut p.binder(BnMode::Eval, false), &cfg, x).unwrap();
    assert_eq!(tape.shape(v), [3, 200]);
    assert!(tape.value(v).data().iter().all(|&e| e == 0.0));
}

#[test]
fn zero_lstm_gives_half_gates() {
    let cfg = tiny_lrcn(3, 4);
    let mut p = ModelParams::<f64>::init(&lrcn_layout(&cfg), 1).unwrap();
    zero_all(&mut p);
    let mut tape = Tape::new();
    let v = tape.constant(random_tensor(&[2, 3], 1));
    let s0 = LstmState::zeros(&mut tape, 2, 4);
    let (o, s1) = lstm_step(&mut tape, &mut p.binder(BnMode::TRAIN, false), &cfg, v, s0).unwrap();
    assert!(tape.value(o).data().iter().all(|&x| x == 0.5));
    assert!(tape.value(s1.c).data().iter().all(|&x| x == 0.0));
    assert!(tape.value(s1.h).data().iter().all(|&x| x == 0.0));
}

#[test]
fn lstm_matches_hand_oracle() {
    let cfg = tiny_lrcn(2, 2);
    let mut p = ModelParams::<f64>::init(&lrcn_layout(&cfg), 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in p.params_mut().iter_mut().filter(|q| q.name.starts_with("lrcn.lstm")) {
        q.value.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    let get = |n: &str| p.get(&format!("lrcn.lstm.{n}")).unwrap().data().to_vec();
    let v = [0.3, -0.7];
    let h0 = [0.1, 0.4];
    let c0 = [-0.5, 0.2];

    // scalar re-computation, one unit at a time
    let dot = |w: &[f64], x: &[f64; 2], r: usize| w[r * 2] * x[0] + w[r * 2 + 1] * x[1];
    let mut c1 = [0.0; 2];
    let mut h1 = [0.0; 2];
    let mut o1 = [0.0; 2];
    for r in 0..2 {
        let pre = |g: &str| dot(&get(&format!("w_v{g}")), &v, r) + dot(&get(&format!("w_h{g}")), &h0, r) + get(&format!("b_{g}"))[r];
        let i = sigmoid(pre("i") + get("w_ci")[r] * c0[r]);
        let f = sigmoid(pre("f") + get("w_cf")[r] * c0[r]);
        let g = pre("c").tanh();
        c1[r] = f * c0[r] + i * g;
        o1[r] = sigmoid(pre("o") + get("w_co")[r] * c1[r]);
        h1[r] = o1[r] * c1[r].tanh();
    }

    let mut tape = Tape::new();
    let vv = tape.constant(Tensor::new(vec![1, 2], v.to_vec()).unwrap());
    let state = LstmState {
        h: tape.constant(Tensor::new(vec![1, 2], h0.to_vec()).unwrap()),
        c: tape.constant(Tensor::new(vec![1, 2], c0.to_vec()).unwrap()),
    };
    let (o, s) = lstm_step(&mut tape, &mut p.binder(BnMode::TRAIN, false), &cfg, vv, state).unwrap();
    for (got, want) in [(o, o1), (s.c, c1), (s.h, h1)] {
        for (a, b) in tape.value(got).data().iter().zip(want) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }
}

#[test]
fn saturated_gates_hold_the_cell() {
    let cfg = tiny_lrcn(3, 4);
    let mut p = ModelParams::<f64>::init(&lrcn_layout(&cfg), 2).unwrap();
    p.get_mut("lrcn.lstm.b_f").unwrap().data_mut().iter_mut().for_each(|v| *v = 50.0);
    p.get_mut("lrcn.lstm.b_i").unwrap().data_mut().iter_mut().for_each(|v| *v = -50.0);
    let mut tape = Tape::new();
    let c0 = random_tensor(&[2, 4], 3);
    let state = LstmState {
        h: tape.constant(random_tensor(&[2, 4], 4)),
        c: tape.constant(c0.clone()),
    };
    let v = tape.constant(random_tensor(&[2, 3], 5));
    let (_, s) = lstm_step(&mut tape, &mut p.binder(BnMode::TRAIN, false), &cfg, v, state).unwrap();
    for (a, b) in tape.value(s.c).data().iter().zip(c0.data()) {
        assert!((a - b).abs() < 1e-4);
    }
}

#[test]
fn lstm_chunks_carry_state_exactly() {
    let cfg = tiny_lrcn(3, 4);
    let p = ModelParams::<f32>::init(&lrcn_layout(&cfg), 3).unwrap();
    let inputs: Vec<Tensor<f32>> = (0..6).map(|k| random_tensor(&[2, 3], 20 + k).cast()).collect();
    let run = |p: &ModelParams<f32>, split: usize| -> Vec<f32> {
        let mut b = p.detached_binder(BnMode::TRAIN, false);
        let mut tape = Tape::new();
        let mut s = LstmState::zeros(&mut tape, 2, 4);
        for x in &inputs[..split] {
            let v = tape.constant(x.clone());
            s = lstm_step(&mut tape, &mut b, &cfg, v, s).unwrap().1;
        }
        // continue on a fresh tape from the carried values
        let (h, c) = (tape.value(s.h).clone(), tape.value(s.c).clone());
        let mut b = p.detached_binder(BnMode::TRAIN, false);
        let mut tape = Tape::new();
        let mut s = LstmState {
            h: tape.constant(h),
            c: tape.constant(c),
        };
        for x in &inputs[split..] {
            let v = tape.constant(x.clone());
            s = lstm_step(&mut tape, &mut b, &cfg, v, s).unwrap().1;
        }
        tape.value(s.h).data().to_vec()
    };
    let whole = run(&p, 6);
    for split in [0, 2, 5] {
        assert_eq!(run(&p, split), whole);
    }
}

#[test]
fn lrcn_decoder_shapes() {
    let mut cfg = LrcnConfig::new(Scale::Desk);
    cfg.d_h = 32;
    let mut p = ModelParams::<f32>::init(&lrcn_layout(&cfg), 1).unwrap();
    let mut tape = Tape::new();
    let h = tape.constant(random_tensor(&[2, 200], 1).cast());
    let y = lrcn_decoder(&mut tape, &mut p.binder(BnMode::TRAIN, false), &cfg, h).unwrap();
    assert_eq!(cfg.seed_extent(), 8);
    assert_eq!(tape.shape(y), [2, 1, 32, 32]);
    assert!(tape.value(y).data().iter().all(|&v| v > 0.0 && v < 1.0));
}

#[test]
fn lrcn_sequence_gradient() {
    let cfg = tiny_lrcn(6, 5);
    let mut p = ModelParams::<f64>::init(&lrcn_layout(&cfg), 9).unwrap();
    // default init leaves decoder activations near the ReLU kink
    for (i, q) in p.params_mut().iter_mut().enumerate() {
        let shape = q.value.shape().to_vec();
        q.value = random_tensor(&shape, 100 + i as u64);
        q.value.data_mut().iter_mut().for_each(|v| *v *= 0.5);
    }
    let slabs = random_tensor(&[16 * 2, 1, 8, 8, 3], 10).data().iter().map(|v| (*v > 0.0) as u8 as f64).collect();
    let slabs = Tensor::new(vec![32, 1, 8, 8, 3], slabs).unwrap();
    let target = random_tensor(&[32, 1, 16, 16], 11).data().iter().map(|v| (*v > 0.3) as u8 as f64).collect();
    let target = Tensor::new(vec![32, 1, 16, 16], target).unwrap();
    let names: Vec<&str> = p.names().collect();
    let report = grad_check_params(
        &p,
        &names,
        GradCheck {
            step: 1e-5,
            floor: 1e-6,
            max_entries: 3,
        },
        |tape, b| {
            let x = tape.constant(slabs.clone());
            let t = tape.constant(target.clone());
            let y = lrcn_sequence(tape, b, &cfg, x, 2)?;
            Ok(tape.l1_mean(y, t)?)
        },
    )
    .unwrap();
    assert!(report.checked >= 20);
    assert!(report.passes(1e-3), "{report:?} {}", names[report.worst.unwrap().0]);
}

#[test]
fn param_count_matches_hand_count() {
    let e = EdGanConfig::new(Scale::Desk);
    let conv = |o: usize, i: usize| o * i * 125 + o;
    let bn = |c: usize| 2 * c;
    let encoder = conv(8, 1) + bn(8) + conv(16, 8) + bn(16) + conv(32, 16) + bn(32);
    let decoder = conv(16, 32) + bn(16) + conv(8, 16) + bn(8) + (8 * 125 + 1);
    assert_eq!(generator_layout(&e).scalar_count(), encoder + decoder);
    assert_eq!(discriminator_layout(&e).scalar_count(), encoder + 256 + 1);

    let l = LrcnConfig::new(Scale::Desk);
    let enc = encoder + 200 * 128 + 200;
    let lstm = 4 * (200 * 200 + 200 * 200 + 200) + 3 * 200;
    let dec = 200 * 16 * 16 * 8 + 16 * 16 * 8 + (8 * 4 * 25 + 4) + bn(4) + (4 * 25 + 1);
    assert_eq!(lrcn_layout(&l).scalar_count(), enc + lstm + dec);
}

#[test]
fn full_scale_count_is_order_ten_million() {
    let e = EdGanConfig::new(Scale::Full);
    let l = LrcnConfig::new(Scale::Full);
    let total = generator_layout(&e).scalar_count() + lrcn_layout(&l).scalar_count();
    eprintln!("full-scale generator + LRCN parameters: {total}");
    assert!((1_000_000..100_000_000).contains(&total), "{total}");
}

fn tiny_model() -> HybridModel {
    let e = EdGanConfig {
        d_l: 8,
        channels: [2, 3, 4],
    };
    let mut m = HybridModel::init(e, tiny_lrcn(5, 6), 3).unwrap();
    m.generator.set_unit_norms();
    m.upsampler.set_unit_norms();
    m
}

#[test]
fn hybrid_shapes_and_determinism() {
    let m = tiny_model();
    let g = VoxelGrid::solid_box(8, [2, 2, 2], [6, 5, 4]);
    let a = hybrid_forward(&m, &g, THRESHOLD).unwrap();
    assert_eq!(a.low.resolution(), 8);
    assert_eq!(a.high.resolution(), 16);
    assert_eq!(a.latent.len(), m.edgan.latent_dim());
    assert_eq!(hybrid_forward(&m, &g, THRESHOLD).unwrap(), a);

    // batching does not change per-volume results
    let h = VoxelGrid::solid_box(8, [1, 3, 1], [7, 4, 7]);
    let batch = hybrid_forward_batch(&m, &[&h, &g], THRESHOLD).unwrap();
    assert_eq!(batch[1], a);
    assert!(hybrid_forward(&m, &VoxelGrid::new(16), THRESHOLD).is_err());
}

#[test]
fn model_save_and_load() {
    let m = tiny_model();
    let dir = tempfile::tempdir().unwrap();
    m.save(dir.path()).unwrap();
    let back = HybridModel::load(dir.path(), m.edgan, m.lrcn).unwrap();
    assert_eq!(back, m);
    let mut other = m.edgan;
    other.channels[0] = 3;
    assert!(HybridModel::load(dir.path(), other, m.lrcn).is_err());
}

