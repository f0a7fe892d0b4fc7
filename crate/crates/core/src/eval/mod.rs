//! Reconstruction error, evaluation reports, noise sweeps, latent
//! interpolation and the linear probe on latent codes.

mod probe;
mod report;

pub use probe::{linear_probe, shuffled_baseline, ProbeConfig, ProbeResult};
pub use report::{EvalReport, EvalRow, LevelSummary, CSV_HEADER};

use thiserror::Error;

use crate::data::{inject_random_noise, Sample};
use crate::nets::{complete_low, decode_latents, hybrid_forward_batch, HybridModel, NetError, THRESHOLD};
use crate::voxel::{upsample_nearest, VoxelError, VoxelGrid};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Contract(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Voxel(#[from] VoxelError),
}

/// Fraction of voxels on which `pred` and `truth` differ.
pub fn reconstruction_error(pred: &VoxelGrid, truth: &VoxelGrid) -> Result<f64, EvalError> {
    Ok(pred.hamming(truth)? as f64 / truth.len() as f64)
}

/// Error of a low-resolution grid after nearest upsampling to the truth's
/// resolution.
pub fn upsampled_error(low: &VoxelGrid, truth: &VoxelGrid) -> Result<f64, EvalError> {
    let (dl, dh) = (low.resolution(), truth.resolution());
    if dl == 0 || dh % dl != 0 {
        return Err(EvalError::Contract(format!("resolution {dh} is not a multiple of {dl}")));
    }
    reconstruction_error(&upsample_nearest(low, dh / dl), truth)
}

/// Encoder-decoder output, binarized and nearest-upsampled, scored against
/// the high-resolution truth.
pub fn eval_lowres_path(model: &HybridModel, input: &VoxelGrid, truth: &VoxelGrid) -> Result<f64, EvalError> {
    let (lows, _) = complete_low(model, &[input])?;
    upsampled_error(&lows[0].binarize(THRESHOLD), truth)
}

/// Scores for `inputs[k]` against `truths[k]`: upsampled input, upsampled
/// encoder-decoder output and the hybrid output.
fn score(model: &HybridModel, inputs: &[&VoxelGrid], truths: &[&VoxelGrid]) -> Result<Vec<[f64; 3]>, EvalError> {
    let outputs = hybrid_forward_batch(model, inputs, THRESHOLD)?;
    inputs
        .iter()
        .zip(truths)
        .zip(outputs)
        .map(|((input, truth), out)| {
            Ok([
                upsampled_error(input, truth)?,
                upsampled_error(&out.low.binarize(THRESHOLD), truth)?,
                reconstruction_error(&out.high.binarize(THRESHOLD), truth)?,
            ])
        })
        .collect()
}

/// Evaluates each sample's stored corrupted input against its high-resolution
/// truth.
pub fn evaluate(model: &HybridModel, samples: &[&Sample]) -> Result<EvalReport, EvalError> {
    let inputs: Vec<&VoxelGrid> = samples.iter().map(|s| &s.corrupted).collect();
    let truths: Vec<&VoxelGrid> = samples.iter().map(|s| &s.high).collect();
    let scores = score(model, &inputs, &truths)?;
    Ok(EvalReport {
        rows: samples
            .iter()
            .zip(scores)
            .map(|(s, [input, lowres, hybrid])| EvalRow {
                id: s.id.clone(),
                category: s.category.to_string(),
                corruption: s.corruption.to_string(),
                noise: None,
                input,
                lowres,
                hybrid,
            })
            .collect(),
    })
}

/// Deletes a fraction of each clean low-resolution grid, for every fraction,
/// and scores the completions. Sample `k` at any fraction uses the noise seed
/// `seed ^ recipe_seed`.
pub fn noise_sweep(
    model: &HybridModel,
    samples: &[&Sample],
    fractions: &[f64],
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::Contract("noise sweep needs at least one sample".into()));
    }
    if fractions.windows(2).any(|w| w[0] > w[1]) || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(EvalError::Contract(format!("fractions must be ascending within [0, 1], got {fractions:?}")));
    }
    let truths: Vec<&VoxelGrid> = samples.iter().map(|s| &s.high).collect();
    let mut rows = Vec::with_capacity(samples.len() * fractions.len());
    for &f in fractions {
        let noisy: Vec<VoxelGrid> = samples
            .iter()
            .map(|s| inject_random_noise(&s.low, f, seed ^ s.recipe_seed))
            .collect();
        let inputs: Vec<&VoxelGrid> = noisy.iter().collect();
        for (s, [input, lowres, hybrid]) in samples.iter().zip(score(model, &inputs, &truths)?) {
            rows.push(EvalRow {
                id: s.id.clone(),
                category: s.category.to_string(),
                corruption: format!("deletion:{f}:{seed}"),
                noise: Some(f),
                input,
                lowres,
                hybrid,
            });
        }
    }
    Ok(EvalReport { rows })
}

/// Latent code of one grid.
pub fn extract_latent(model: &HybridModel, grid: &VoxelGrid) -> Result<Vec<f32>, EvalError> {
    Ok(complete_low(model, &[grid])?.1.remove(0))
}

/// Latent codes of many grids.
pub fn extract_latents(model: &HybridModel, grids: &[&VoxelGrid]) -> Result<Vec<Vec<f32>>, EvalError> {
    Ok(complete_low(model, grids)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interpolation {
    pub gamma: f64,
    pub latent: Vec<f32>,
    pub grid: VoxelGrid,
}

/// `γ·z_a + (1 − γ)·z_b`, computed in `f64` and rounded once.
pub fn mix_latents(a: &[f32], b: &[f32], gamma: f64) -> Vec<f32> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (gamma * x as f64 + (1.0 - gamma) * y as f64) as f32)
        .collect()
}

/// Decodes convex combinations of the latent codes of `a` and `b`.
pub fn interpolate_latent(
    model: &HybridModel,
    a: &VoxelGrid,
    b: &VoxelGrid,
    gammas: &[f64],
) -> Result<Vec<Interpolation>, EvalError> {
    if let Some(g) = gammas.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(EvalError::Contract(format!("interpolation weight {g} outside [0, 1]")));
    }
    let (_, z) = complete_low(model, &[a, b])?;
    let latents: Vec<Vec<f32>> = gammas.iter().map(|&g| mix_latents(&z[0], &z[1], g)).collect();
    let decoded = decode_latents(model, &latents)?;
    Ok(gammas
        .iter()
        .zip(latents)
        .zip(decoded)
        .map(|((&gamma, latent), p)| Interpolation {
            gamma,
            latent,
            grid: p.binarize(THRESHOLD),
        })
        .collect())
}
