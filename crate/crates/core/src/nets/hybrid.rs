//! The three parameter groups together, batched tensor packing, and the
//! inference pipeline: complete at low resolution, binarize, slice, upsample.

use std::path::Path;

use crate::tensor::{BnMode, Real, Tape, Tensor};
use crate::voxel::{assemble_slices, plane, slice_volume, ProbVolume, SliceSequence, VoxelGrid};

use super::checkpoint::{load_checkpoint, save_checkpoint};
use super::edgan::{discriminator_layout, edgan_decoder, edgan_encoder, generator_layout};
use super::lrcn::{lrcn_layout, lrcn_sequence};
use super::{EdGanConfig, LrcnConfig, ModelParams, NetError, Scale};

pub const GENERATOR_FILE: &str = "generator.edgc";
pub const DISCRIMINATOR_FILE: &str = "discriminator.edgc";
pub const LRCN_FILE: &str = "lrcn.edgc";

/// Default occupancy threshold between stages and for metrics.
pub const THRESHOLD: f32 = 0.5;

/// Volumes evaluated per tape during inference.
const INFERENCE_CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct HybridModel {
    pub edgan: EdGanConfig,
    pub lrcn: LrcnConfig,
    pub generator: ModelParams,
    pub discriminator: ModelParams,
    pub upsampler: ModelParams,
}

impl HybridModel {
    pub fn init(edgan: EdGanConfig, lrcn: LrcnConfig, seed: u64) -> Result<Self, NetError> {
        edgan.validate()?;
        lrcn.validate()?;
        if edgan.d_l != lrcn.d_l {
            return Err(NetError::Contract(format!(
                "encoder-decoder d_l {} differs from LRCN d_l {}",
                edgan.d_l, lrcn.d_l
            )));
        }
        Ok(Self {
            generator: ModelParams::init(&generator_layout(&edgan), seed)?,
            discriminator: ModelParams::init(&discriminator_layout(&edgan), seed.wrapping_add(1))?,
            upsampler: ModelParams::init(&lrcn_layout(&lrcn), seed.wrapping_add(2))?,
            edgan,
            lrcn,
        })
    }

    pub fn for_scale(scale: Scale, seed: u64) -> Result<Self, NetError> {
        Self::init(EdGanConfig::new(scale), LrcnConfig::new(scale), seed)
    }

    /// Trainable scalars in the generator and LRCN, the networks used at
    /// inference time.
    pub fn inference_param_count(&self) -> usize {
        self.generator.scalar_count() + self.upsampler.scalar_count()
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), NetError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| NetError::io(dir, e))?;
        save_checkpoint(dir.join(GENERATOR_FILE), &self.generator)?;
        save_checkpoint(dir.join(DISCRIMINATOR_FILE), &self.discriminator)?;
        save_checkpoint(dir.join(LRCN_FILE), &self.upsampler)
    }

    /// Loads the three groups and checks them against the configs.
    pub fn load(dir: impl AsRef<Path>, edgan: EdGanConfig, lrcn: LrcnConfig) -> Result<Self, NetError> {
        let dir = dir.as_ref();
        let generator = load_checkpoint(dir.join(GENERATOR_FILE))?;
        generator.check_layout(&generator_layout(&edgan))?;
        let discriminator = load_checkpoint(dir.join(DISCRIMINATOR_FILE))?;
        discriminator.check_layout(&discriminator_layout(&edgan))?;
        let upsampler = load_checkpoint(dir.join(LRCN_FILE))?;
        upsampler.check_layout(&lrcn_layout(&lrcn))?;
        Ok(Self {
            edgan,
            lrcn,
            generator,
            discriminator,
            upsampler,
        })
    }
}

/// `[N, 1, d, d, d]` occupancy tensor.
pub fn volume_tensor<T: Real>(grids: &[&VoxelGrid]) -> Result<Tensor<T>, NetError> {
    let d = grids.first().map(|g| g.resolution()).unwrap_or(0);
    let mut data = Vec::with_capacity(grids.len() * d * d * d);
    for g in grids {
        if g.resolution() != d {
            return Err(NetError::Contract(format!("mixed resolutions {d} and {}", g.resolution())));
        }
        data.extend(g.occupancy().iter().map(|&b| if b { T::ONE } else { T::ZERO }));
    }
    Ok(Tensor::new(vec![grids.len(), 1, d, d, d], data)?)
}

/// Step-major `[T·N, 1, d_l, d_l, c]` slab tensor.
pub fn slab_tensor<T: Real>(seqs: &[SliceSequence]) -> Result<Tensor<T>, NetError> {
    let first = seqs.first().ok_or_else(|| NetError::Contract("no slice sequences".into()))?;
    let (steps, d_l, c) = (first.steps.len(), first.d_l, first.c);
    if seqs.iter().any(|s| s.steps.len() != steps || s.d_l != d_l || s.c != c) {
        return Err(NetError::Contract("slice sequences differ in shape".into()));
    }
    let mut data = Vec::with_capacity(steps * seqs.len() * d_l * d_l * c);
    for t in 0..steps {
        for s in seqs {
            data.extend(s.steps[t].slab.iter().map(|&b| if b { T::ONE } else { T::ZERO }));
        }
    }
    Ok(Tensor::new(vec![steps * seqs.len(), 1, d_l, d_l, c], data)?)
}

/// Step-major `[d·N, 1, d, d]` tensor of the `x`-planes of each grid, the
/// targets matching [`slab_tensor`] order.
pub fn plane_tensor<T: Real>(grids: &[&VoxelGrid]) -> Result<Tensor<T>, NetError> {
    let d = grids.first().map(|g| g.resolution()).unwrap_or(0);
    if d == 0 || grids.iter().any(|g| g.resolution() != d) {
        return Err(NetError::Contract("plane targets need grids of one resolution".into()));
    }
    let mut data = Vec::with_capacity(grids.len() * d * d * d);
    for t in 0..d {
        for g in grids {
            data.extend(plane(g, t).into_iter().map(|v| T::from_f64(v as f64)));
        }
    }
    Ok(Tensor::new(vec![d * grids.len(), 1, d, d], data)?)
}

/// `[T·N, 1, d_h, d_h]` step-major images → one high-resolution volume per
/// input.
pub fn images_to_volumes<T: Real>(images: &[T], n: usize, d_h: usize) -> Result<Vec<ProbVolume>, NetError> {
    let px = d_h * d_h;
    if images.len() != n * d_h * px {
        return Err(NetError::Contract(format!("{} image values for {n} volumes at {d_h}", images.len())));
    }
    (0..n)
        .map(|k| {
            let per_step: Vec<Vec<f32>> = (0..d_h)
                .map(|t| images[(t * n + k) * px..][..px].iter().map(|v| v.as_f64() as f32).collect())
                .collect();
            Ok(assemble_slices(&per_step)?)
        })
        .collect()
}

fn split_volumes<T: Real>(data: &[T], n: usize, d: usize) -> Vec<ProbVolume> {
    let len = d * d * d;
    (0..n)
        .map(|k| ProbVolume::new(d, data[k * len..][..len].iter().map(|v| v.as_f64() as f32).collect()).expect("sized"))
        .collect()
}

/// Output of [`hybrid_forward`] for one volume.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridOutput {
    pub low: ProbVolume,
    pub high: ProbVolume,
    pub latent: Vec<f32>,
}

/// Encoder-decoder completion in eval mode: low-resolution probabilities and
/// latent codes.
pub fn complete_low(model: &HybridModel, grids: &[&VoxelGrid]) -> Result<(Vec<ProbVolume>, Vec<Vec<f32>>), NetError> {
    let mut lows = Vec::with_capacity(grids.len());
    let mut latents = Vec::with_capacity(grids.len());
    for chunk in grids.chunks(INFERENCE_CHUNK) {
        check_resolution(chunk, model.edgan.d_l)?;
        let mut tape = Tape::<f32>::new();
        let mut b = model.generator.detached_binder(BnMode::Eval, false);
        let x = tape.constant(volume_tensor(chunk)?);
        let z = edgan_encoder(&mut tape, &mut b, &model.edgan, x)?;
        let y = edgan_decoder(&mut tape, &mut b, &model.edgan, z)?;
        lows.extend(split_volumes(tape.value(y).data(), chunk.len(), model.edgan.d_l));
        let dim = model.edgan.latent_dim();
        latents.extend(tape.value(z).data().chunks(dim).map(<[f32]>::to_vec));
    }
    Ok((lows, latents))
}

/// Decodes latent codes in eval mode.
pub fn decode_latents(model: &HybridModel, latents: &[Vec<f32>]) -> Result<Vec<ProbVolume>, NetError> {
    let dim = model.edgan.latent_dim();
    let mut out = Vec::with_capacity(latents.len());
    for chunk in latents.chunks(INFERENCE_CHUNK) {
        if chunk.iter().any(|z| z.len() != dim) {
            return Err(NetError::Contract(format!("latent codes must have length {dim}")));
        }
        let mut tape = Tape::<f32>::new();
        let mut b = model.generator.detached_binder(BnMode::Eval, false);
        let z = tape.constant(Tensor::new(vec![chunk.len(), dim], chunk.concat())?);
        let y = edgan_decoder(&mut tape, &mut b, &model.edgan, z)?;
        out.extend(split_volumes(tape.value(y).data(), chunk.len(), model.edgan.d_l));
    }
    Ok(out)
}

/// LRCN upsampling of binary low-resolution grids in eval mode.
pub fn upsample_lrcn(model: &HybridModel, grids: &[&VoxelGrid]) -> Result<Vec<ProbVolume>, NetError> {
    let cfg = &model.lrcn;
    let mut out = Vec::with_capacity(grids.len());
    for chunk in grids.chunks(INFERENCE_CHUNK) {
        check_resolution(chunk, cfg.d_l)?;
        let seqs = chunk
            .iter()
            .map(|g| slice_volume(g, cfg.d_h, cfg.c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut tape = Tape::<f32>::new();
        let mut b = model.upsampler.detached_binder(BnMode::Eval, false);
        let slabs = tape.constant(slab_tensor(&seqs)?);
        let images = lrcn_sequence(&mut tape, &mut b, cfg, slabs, chunk.len())?;
        out.extend(images_to_volumes(tape.value(images).data(), chunk.len(), cfg.d_h)?);
    }
    Ok(out)
}

fn check_resolution(grids: &[&VoxelGrid], d: usize) -> Result<(), NetError> {
    match grids.iter().find(|g| g.resolution() != d) {
        Some(g) => Err(NetError::Contract(format!("grid resolution {} but model expects {d}", g.resolution()))),
        None => Ok(()),
    }
}

/// Full pipeline on PCA-aligned low-resolution inputs.
pub fn hybrid_forward_batch(
    model: &HybridModel,
    grids: &[&VoxelGrid],
    threshold: f32,
) -> Result<Vec<HybridOutput>, NetError> {
    let (lows, latents) = complete_low(model, grids)?;
    let binary: Vec<VoxelGrid> = lows.iter().map(|p| p.binarize(threshold)).collect();
    let highs = upsample_lrcn(model, &binary.iter().collect::<Vec<_>>())?;
    Ok(lows
        .into_iter()
        .zip(highs)
        .zip(latents)
        .map(|((low, high), latent)| HybridOutput { low, high, latent })
        .collect())
}

pub fn hybrid_forward(model: &HybridModel, grid: &VoxelGrid, threshold: f32) -> Result<HybridOutput, NetError> {
    Ok(hybrid_forward_batch(model, &[grid], threshold)?.remove(0))
}
