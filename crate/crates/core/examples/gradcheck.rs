//! Finite-difference checks of a few tape ops in f64.
//!
//! cargo run --release --example gradcheck

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shape_inpaint::tensor::{grad_check, BatchNormState, BnMode, GradCheck, Tensor};

fn random(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(shape.to_vec(), |_| rng.random_range(-1.0..1.0)).with_requires_grad(true)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let opts = GradCheck {
        step: 1e-5,
        ..GradCheck::default()
    };

    let conv = grad_check(
        &[random(&[2, 2, 6, 6, 6], 1), random(&[3, 2, 5, 5, 5], 2), random(&[3], 3)],
        |tape, v| {
            let y = tape.conv_nd(v[0], v[1], Some(v[2]), 2, 2)?;
            let y = tape.tanh(y);
            Ok(tape.mean(y))
        },
        opts,
    )?;
    println!("conv3d + tanh:         {conv:?}");

    let deconv = grad_check(
        &[random(&[2, 3, 3, 3], 4), random(&[3, 2, 5, 5], 5)],
        |tape, v| {
            let y = tape.conv_transpose_nd(v[0], v[1], None, 2, 2)?;
            let y = tape.sigmoid(y);
            Ok(tape.sum(y))
        },
        opts,
    )?;
    println!("transposed conv2d:     {deconv:?}");

    let bn = grad_check(
        &[random(&[4, 3, 5], 6), random(&[3], 7), random(&[3], 8)],
        |tape, v| {
            let mut state = BatchNormState::new(3);
            let y = tape.batch_norm(v[0], v[1], v[2], BnMode::TRAIN, &mut state)?;
            let w = tape.constant(Tensor::from_fn(vec![4, 3, 5], |i| (i as f64 * 0.37).sin()));
            let y = tape.mul(y, w)?;
            Ok(tape.sum(y))
        },
        opts,
    )?;
    println!("batch norm (training): {bn:?}");

    for (name, r) in [("conv", &conv), ("deconv", &deconv), ("bn", &bn)] {
        assert!(r.passes(1e-3), "{name} failed");
    }
    println!("all within 1e-3 relative error");
    Ok(())
}
