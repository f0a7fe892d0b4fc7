//! Multinomial logistic regression on standardized features, trained by
//! full-batch gradient descent from zero weights.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub epochs: usize,
    pub lr: f64,
    /// L2 penalty on the weights (not the biases).
    pub l2: f64,
    /// Seeds the label shuffles of [`shuffled_baseline`].
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            lr: 0.5,
            l2: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub classes: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

fn check(features: &[Vec<f32>], labels: &[usize], train: &[bool]) -> Result<(usize, usize), EvalError> {
    let n = features.len();
    if labels.len() != n || train.len() != n {
        return Err(EvalError::Contract(format!(
            "{n} feature rows, {} labels, {} split flags",
            labels.len(),
            train.len()
        )));
    }
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 || features.iter().any(|f| f.len() != dim) {
        return Err(EvalError::Contract("feature rows must share one nonzero width".into()));
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let counts = (0..classes).map(|c| labels.iter().filter(|&&l| l == c).count());
    if classes < 2 || counts.clone().any(|k| k < 5) {
        return Err(EvalError::Contract(format!(
            "probe needs at least 2 classes with 5 samples each, got counts {:?}",
            counts.collect::<Vec<_>>()
        )));
    }
    if !train.iter().any(|&t| t) || train.iter().all(|&t| t) {
        return Err(EvalError::Contract("probe needs both train and test rows".into()));
    }
    Ok((dim, classes))
}

/// Trains on rows with `train[i]` set and reports accuracy on both parts.
pub fn linear_probe(
    features: &[Vec<f32>],
    labels: &[usize],
    train: &[bool],
    cfg: &ProbeConfig,
) -> Result<ProbeResult, EvalError> {
    let (dim, classes) = check(features, labels, train)?;
    let train_rows: Vec<usize> = (0..features.len()).filter(|&i| train[i]).collect();

    let m = train_rows.len() as f64;
    let mut mean = vec![0.0; dim];
    let mut scale = vec![0.0; dim];
    for &i in &train_rows {
        for (a, &v) in mean.iter_mut().zip(&features[i]) {
            *a += v as f64 / m;
        }
    }
    for &i in &train_rows {
        for ((s, &v), mu) in scale.iter_mut().zip(&features[i]).zip(&mean) {
            *s += (v as f64 - mu).powi(2) / m;
        }
    }
    for s in scale.iter_mut() {
        *s = if *s > 1e-12 { 1.0 / s.sqrt() } else { 0.0 };
    }
    let x: Vec<Vec<f64>> = features
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&scale).map(|((&v, mu), s)| (v as f64 - mu) * s).collect())
        .collect();

    let mut w = vec![vec![0.0; dim]; classes];
    let mut b = vec![0.0; classes];
    let logits = |w: &[Vec<f64>], b: &[f64], row: &[f64]| -> Vec<f64> {
        w.iter()
            .zip(b)
            .map(|(wc, bc)| bc + wc.iter().zip(row).map(|(a, v)| a * v).sum::<f64>())
            .collect()
    };
    for _ in 0..cfg.epochs {
        let mut gw = vec![vec![0.0; dim]; classes];
        let mut gb = vec![0.0; classes];
        for &i in &train_rows {
            let z = logits(&w, &b, &x[i]);
            let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
            let sum: f64 = e.iter().sum();
            for c in 0..classes {
                let d = (e[c] / sum - (labels[i] == c) as u8 as f64) / m;
                gb[c] += d;
                for (g, v) in gw[c].iter_mut().zip(&x[i]) {
                    *g += d * v;
                }
            }
        }
        for c in 0..classes {
            b[c] -= cfg.lr * gb[c];
            for (wv, g) in w[c].iter_mut().zip(&gw[c]) {
                *wv -= cfg.lr * (g + cfg.l2 * *wv);
            }
        }
    }

    let predict = |i: usize| {
        let z = logits(&w, &b, &x[i]);
        (0..classes).max_by(|&p, &q| z[p].total_cmp(&z[q]).then(q.cmp(&p))).unwrap_or(0)
    };
    let accuracy = |want_train: bool| {
        let rows: Vec<usize> = (0..x.len()).filter(|&i| train[i] == want_train).collect();
        rows.iter().filter(|&&i| predict(i) == labels[i]).count() as f64 / rows.len() as f64
    };
    Ok(ProbeResult {
        classes,
        train_accuracy: accuracy(true),
        test_accuracy: accuracy(false),
    })
}

/// Mean test accuracy of the probe over `shuffles` random permutations of
/// the labels.
pub fn shuffled_baseline(
    features: &[Vec<f32>],
    labels: &[usize],
    train: &[bool],
    cfg: &ProbeConfig,
    shuffles: usize,
) -> Result<f64, EvalError> {
    check(features, labels, train)?;
    if shuffles == 0 {
        return Err(EvalError::Contract("need at least one shuffle".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut total = 0.0;
    for _ in 0..shuffles {
        let mut permuted = labels.to_vec();
        permuted.shuffle(&mut rng);
        total += linear_probe(features, &permuted, train, cfg)?.test_accuracy;
    }
    Ok(total / shuffles as f64)
}
