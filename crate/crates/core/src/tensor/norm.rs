use super::{Real, TensorError};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// How a batch-norm layer treats statistics on this call.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize by batch statistics; fold them into the running state when
    /// `update_running` is set.
    Train { update_running: bool },
    /// Normalize by the running state.
    Eval,
}

impl BnMode {
    pub const TRAIN: BnMode = BnMode::Train { update_running: true };
    pub const TRAIN_FROZEN: BnMode = BnMode::Train { update_running: false };
}

/// Running mean/variance for one batch-norm layer.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchNormState {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    /// Number of batches folded in; eval mode requires at least one.
    pub updates: u64,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNormState {
    /// Fresh state: eval mode refuses it until a training batch has been seen.
    pub fn new(channels: usize) -> Self {
        Self {
            mean: vec![0.0; channels],
            var: vec![1.0; channels],
            updates: 0,
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    /// Zero mean, unit variance, marked initialized.
    pub fn unit(channels: usize) -> Self {
        Self {
            updates: 1,
            ..Self::new(channels)
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn is_initialized(&self) -> bool {
        self.updates > 0
    }
}

/// Saved forward quantities needed by the backward rule.
#[derive(Clone, Debug)]
pub(crate) struct BnSaved {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
    pub batch_stats: bool,
}

pub(crate) struct BnShape {
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
}

impl BnShape {
    pub fn of(shape: &[usize]) -> Result<Self, TensorError> {
        if shape.len() < 2 {
            return Err(TensorError::contract(
                "batch_norm",
                format!("need [N, C, ...] input, got {shape:?}"),
            ));
        }
        Ok(Self {
            batch: shape[0],
            channels: shape[1],
            len: shape[2..].iter().product(),
        })
    }
}

pub(crate) fn forward<T: Real>(
    x: &[T],
    gamma: &[T],
    beta: &[T],
    dims: &BnShape,
    mode: BnMode,
    state: &mut BatchNormState,
) -> Result<(Vec<T>, BnSaved), TensorError> {
    let BnShape { batch, channels, len } = *dims;
    let count = (batch * len) as f64;
    let (mean, inv_std, batch_stats) = match mode {
        BnMode::Eval => {
            if !state.is_initialized() {
                return Err(TensorError::UninitializedStatistics);
            }
            let inv: Vec<f64> = state.var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
            (state.mean.clone(), inv, false)
        }
        BnMode::Train { update_running } => {
            let mut mean = vec![0.0f64; channels];
            let mut var = vec![0.0f64; channels];
            for c in 0..channels {
                let mut s = 0.0;
                for n in 0..batch {
                    s += x[(n * channels + c) * len..][..len].iter().map(|v| v.as_f64()).sum::<f64>();
                }
                let m = s / count;
                let mut ss = 0.0;
                for n in 0..batch {
                    ss += x[(n * channels + c) * len..][..len]
                        .iter()
                        .map(|v| {
                            let d = v.as_f64() - m;
                            d * d
                        })
                        .sum::<f64>();
                }
                mean[c] = m;
                var[c] = ss / count;
            }
            if update_running {
                let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
                let mom = state.momentum;
                if state.updates == 0 {
                    state.mean.clone_from(&mean);
                    state.var = var.iter().map(|v| v * unbias).collect();
                } else {
                    for c in 0..channels {
                        state.mean[c] = (1.0 - mom) * state.mean[c] + mom * mean[c];
                        state.var[c] = (1.0 - mom) * state.var[c] + mom * var[c] * unbias;
                    }
                }
                state.updates += 1;
            }
            let inv = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
            (mean, inv, true)
        }
    };

    let mut out = Vec::with_capacity(x.len());
    let mut xhat = Vec::with_capacity(x.len());
    for n in 0..batch {
        for c in 0..channels {
            let g = gamma[c].as_f64();
            let b = beta[c].as_f64();
            for v in &x[(n * channels + c) * len..][..len] {
                let h = (v.as_f64() - mean[c]) * inv_std[c];
                xhat.push(h);
                out.push(T::from_f64(g * h + b));
            }
        }
    }
    Ok((
        out,
        BnSaved {
            xhat,
            inv_std,
            batch_stats,
        },
    ))
}

/// Returns (d input, d gamma, d beta).
pub(crate) fn backward<T: Real>(
    g: &[f64],
    gamma: &[T],
    dims: &BnShape,
    saved: &BnSaved,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let BnShape { batch, channels, len } = *dims;
    let count = (batch * len) as f64;
    let mut dgamma = vec![0.0f64; channels];
    let mut dbeta = vec![0.0f64; channels];
    for n in 0..batch {
        for c in 0..channels {
            let off = (n * channels + c) * len;
            for i in 0..len {
                let gv = g[off + i];
                dbeta[c] += gv;
                dgamma[c] += gv * saved.xhat[off + i];
            }
        }
    }
    let mut dx = vec![0.0f64; g.len()];
    for n in 0..batch {
        for c in 0..channels {
            let off = (n * channels + c) * len;
            let scale = gamma[c].as_f64() * saved.inv_std[c];
            for i in 0..len {
                let gv = g[off + i];
                dx[off + i] = if saved.batch_stats {
                    scale * (gv - dbeta[c] / count - saved.xhat[off + i] * dgamma[c] / count)
                } else {
                    scale * gv
                };
            }
        }
    }
    (dx, dgamma, dbeta)
}
