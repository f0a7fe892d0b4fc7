use super::{Real, TensorError};

/// Bias-corrected Adam.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    /// `beta1 = 0.5`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(lr: f64) -> Result<Self, TensorError> {
        Self::with_betas(lr, 0.5, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Result<Self, TensorError> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(TensorError::contract("adam", format!("learning rate must be > 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || eps <= 0.0 {
            return Err(TensorError::contract(
                "adam",
                format!("betas must lie in [0, 1) and eps > 0, got ({beta1}, {beta2}, {eps})"),
            ));
        }
        Ok(Self { lr, beta1, beta2, eps })
    }

    /// One update of `param` in place. `step` is the 1-based step index.
    pub fn update<T: Real>(
        &self,
        step: u64,
        param: &mut [T],
        grad: &[T],
        m1: &mut [T],
        m2: &mut [T],
    ) -> Result<(), TensorError> {
        if step == 0 {
            return Err(TensorError::contract("adam", "step index starts at 1"));
        }
        let n = param.len();
        if grad.len() != n || m1.len() != n || m2.len() != n {
            return Err(TensorError::contract(
                "adam",
                format!(
                    "lengths differ: param {n}, grad {}, m1 {}, m2 {}",
                    grad.len(),
                    m1.len(),
                    m2.len()
                ),
            ));
        }
        let t = step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..n {
            let g = grad[i].as_f64();
            let m = self.beta1 * m1[i].as_f64() + (1.0 - self.beta1) * g;
            let v = self.beta2 * m2[i].as_f64() + (1.0 - self.beta2) * g * g;
            m1[i] = T::from_f64(m);
            m2[i] = T::from_f64(v);
            let update = self.lr * (m / c1) / ((v / c2).sqrt() + self.eps);
            param[i] = T::from_f64(param[i].as_f64() - update);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_rate() {
        assert!(Adam::new(0.0).is_err());
        assert!(Adam::new(-1e-4).is_err());
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let adam = Adam::new(1e-3).unwrap();
        let mut p = [1.0f64, 1.0];
        let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
        adam.update(1, &mut p, &[5.0, -0.2], &mut m, &mut v).unwrap();
        assert!((p[0] - (1.0 - 1e-3)).abs() < 1e-9);
        assert!((p[1] - (1.0 + 1e-3)).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_from_fresh_state_is_a_no_op() {
        let adam = Adam::new(1e-2).unwrap();
        let mut p = [0.3f32];
        let (mut m, mut v) = ([0.0f32], [0.0f32]);
        adam.update(1, &mut p, &[0.0], &mut m, &mut v).unwrap();
        assert_eq!(p, [0.3]);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let adam = Adam::new(1e-2).unwrap();
        let mut p = [0.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        adam.update(1, &mut p, &[2.0], &mut m, &mut v).unwrap();
        let (m_before, v_before) = (m[0], v[0]);
        adam.update(2, &mut p, &[0.0], &mut m, &mut v).unwrap();
        assert!((m[0] - 0.5 * m_before).abs() < 1e-15);
        assert!((v[0] - 0.999 * v_before).abs() < 1e-15);
    }

    #[test]
    fn three_steps_match_reference() {
        // reference recurrence written out independently in f64
        let (lr, b1, b2, eps) = (1e-2, 0.5, 0.999, 1e-8);
        let grads = [0.7, -1.3, 0.25];
        let mut x = 2.0f64;
        let (mut mm, mut vv) = (0.0f64, 0.0f64);
        for (k, g) in grads.iter().enumerate() {
            let t = (k + 1) as f64;
            mm = b1 * mm + (1.0 - b1) * g;
            vv = b2 * vv + (1.0 - b2) * g * g;
            let mh = mm / (1.0 - b1.powf(t));
            let vh = vv / (1.0 - b2.powf(t));
            x -= lr * mh / (vh.sqrt() + eps);
        }

        let adam = Adam::with_betas(lr, b1, b2, eps).unwrap();
        let mut p = [2.0f64];
        let (mut m, mut v) = ([0.0], [0.0]);
        for (k, g) in grads.iter().enumerate() {
            adam.update(k as u64 + 1, &mut p, &[*g], &mut m, &mut v).unwrap();
        }
        assert!((p[0] - x).abs() < 1e-7, "{} vs {}", p[0], x);
    }
}
