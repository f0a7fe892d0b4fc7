//! Losses on the tape plus their plain-number combinations.
//!
//! Likelihood-style values (`loss_gan`, `loss_recon`) are reported with their
//! natural sign, so both are `≤ 0` and larger is better for the party that
//! ascends them. The trainers minimize:
//!
//! * discriminator: `−loss_gan`
//! * encoder-decoder: `α1·mean ln(1 − D(fake)) − α2·loss_recon`
//! * LRCN: `loss_l1`
//! * joint stage: `α3·(encoder-decoder objective) + α4·loss_l1`

use crate::tensor::{Real, Tape, TensorError, Var};

use super::LOG_CLAMP;

fn check_unit<T: Real>(tape: &Tape<T>, x: Var, what: &str) -> Result<(), TensorError> {
    if tape.value(x).data().iter().all(|v| (0.0..=1.0).contains(&v.as_f64())) {
        Ok(())
    } else {
        Err(TensorError::contract("loss_gan", format!("{what} outside [0, 1]")))
    }
}

/// `mean ln(1 − p)` with `p` clamped to `[LOG_CLAMP, 1 − LOG_CLAMP]`.
pub fn mean_log_complement<T: Real>(tape: &mut Tape<T>, p: Var) -> Result<Var, TensorError> {
    check_unit(tape, p, "probabilities")?;
    let q = tape.affine(p, -1.0, 1.0);
    let l = tape.log_clamped(q, LOG_CLAMP, 1.0 - LOG_CLAMP);
    Ok(tape.mean(l))
}

/// `mean ln D(real) + mean ln(1 − D(fake))`.
pub fn loss_gan<T: Real>(tape: &mut Tape<T>, d_real: Var, d_fake: Var) -> Result<Var, TensorError> {
    check_unit(tape, d_real, "real scores")?;
    let real = tape.log_clamped(d_real, LOG_CLAMP, 1.0 - LOG_CLAMP);
    let real = tape.mean(real);
    let fake = mean_log_complement(tape, d_fake)?;
    tape.add(real, fake)
}

/// Mean Bernoulli log-likelihood of `target` under `pred`.
pub fn loss_recon<T: Real>(tape: &mut Tape<T>, pred: Var, target: Var) -> Result<Var, TensorError> {
    tape.log_likelihood(pred, target, LOG_CLAMP)
}

pub fn loss_l1<T: Real>(tape: &mut Tape<T>, pred: Var, target: Var) -> Result<Var, TensorError> {
    tape.l1_mean(pred, target)
}

pub fn loss_edgan(gan: f64, recon: f64, alpha1: f64, alpha2: f64) -> f64 {
    alpha1 * gan + alpha2 * recon
}

pub fn loss_hybrid(edgan: f64, lrcn: f64, alpha3: f64, alpha4: f64) -> f64 {
    alpha3 * edgan + alpha4 * lrcn
}

/// Minimized encoder-decoder objective from its logged components.
pub fn generator_objective(gan_fake: f64, recon: f64, alpha1: f64, alpha2: f64) -> f64 {
    alpha1 * gan_fake - alpha2 * recon
}

/// Discriminator accuracy over the `2N` judgments of a batch and whether the
/// next batch may update it. A real score counts as correct above 0.5, a
/// fake score at or below 0.5.
pub fn disc_accuracy_gate(d_real: &[f64], d_fake: &[f64], threshold: f64) -> (f64, bool) {
    let correct = d_real.iter().filter(|&&d| d > 0.5).count() + d_fake.iter().filter(|&&d| d <= 0.5).count();
    let total = d_real.len() + d_fake.len();
    let accuracy = if total == 0 { 0.0 } else { correct as f64 / total as f64 };
    (accuracy, accuracy <= threshold)
}
