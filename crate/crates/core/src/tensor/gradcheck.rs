//! Central finite-difference gradient checks against the tape.

use super::{Real, Tape, Tensor, TensorError, Var};

/// Finite-difference settings.
#[derive(Clone, Copy, Debug)]
pub struct GradCheck {
    /// Central difference half-step.
    pub step: f64,
    /// Denominator floor for the relative error, so entries that are both
    /// essentially zero do not blow up the ratio.
    pub floor: f64,
    /// Check at most this many entries per input (evenly strided).
    pub max_entries: usize,
}

impl Default for GradCheck {
    fn default() -> Self {
        Self {
            step: 1e-3,
            floor: 1e-6,
            max_entries: 10_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub checked: usize,
    /// (input index, flat entry) of the worst relative error.
    pub worst: Option<(usize, usize)>,
}

impl GradCheckReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.checked > 0 && self.max_rel_error < tolerance
    }
}

/// Compares tape gradients of the scalar built by `build` with central
/// differences, for every input tensor that has `requires_grad` set.
pub fn grad_check<T, F>(inputs: &[Tensor<T>], build: F, opts: GradCheck) -> Result<GradCheckReport, TensorError>
where
    T: Real,
    F: Fn(&mut Tape<T>, &[Var]) -> Result<Var, TensorError>,
{
    let eval = |tensors: &[Tensor<T>]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = tensors.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        let v = tape.value(out);
        v.item()
            .map(|x| x.as_f64())
            .ok_or_else(|| TensorError::NonScalarLoss { shape: v.shape().to_vec() })
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        checked: 0,
        worst: None,
    };
    let mut probe: Vec<Tensor<T>> = inputs.to_vec();
    for (k, input) in inputs.iter().enumerate() {
        if !input.requires_grad() {
            continue;
        }
        let analytic = grads.grad(vars[k]).expect("leaf requires grad");
        let stride = input.numel().div_ceil(opts.max_entries.max(1));
        for i in (0..input.numel()).step_by(stride.max(1)) {
            let x0 = input.data()[i];
            probe[k].data_mut()[i] = T::from_f64(x0.as_f64() + opts.step);
            let up = eval(&probe)?;
            probe[k].data_mut()[i] = T::from_f64(x0.as_f64() - opts.step);
            let down = eval(&probe)?;
            probe[k].data_mut()[i] = x0;

            let numeric = (up - down) / (2.0 * opts.step);
            let a = analytic[i].as_f64();
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel.max(report.max_rel_error);
                report.worst = Some((k, i));
            }
        }
    }
    Ok(report)
}
