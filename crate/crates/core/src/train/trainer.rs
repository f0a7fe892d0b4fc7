use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Sample;
use crate::nets::{
    discriminator, edgan_decoder, edgan_encoder, lrcn_sequence, plane_tensor, slab_tensor, volume_tensor,
    HybridModel, ModelParams, ParamGrads, THRESHOLD,
};
use crate::tensor::{Adam, BnMode, Tape, Var};
use crate::voxel::{slice_volume, ProbVolume, VoxelGrid};

use super::{
    disc_accuracy_gate, generator_objective, loss_edgan, loss_gan, loss_hybrid, loss_l1, loss_recon,
    mean_log_complement, Stage, TrainConfig, TrainError, TrainLog, TrainRecord,
};

/// Mean minimized objective of the first and last epoch of a stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageSummary {
    pub stage: Stage,
    pub steps: usize,
    pub first_epoch: f64,
    pub last_epoch: f64,
}

/// Called after every epoch with the stage, epoch index and mean objective.
pub type EpochHook = Box<dyn FnMut(Stage, usize, f64) + Send>;

struct EdStats {
    recon: f64,
    gan: Option<f64>,
    gan_fake: Option<f64>,
    d_loss: Option<f64>,
    accuracy: Option<f64>,
    prev_accuracy: Option<f64>,
    d_update: Option<bool>,
    d_delta: Option<f64>,
    fake: Vec<ProbVolume>,
}

/// Owns a model while it is trained; every step appends one record.
pub struct Trainer {
    pub model: HybridModel,
    pub cfg: TrainConfig,
    pub log: TrainLog,
    prev_accuracy: Option<f64>,
    step: u64,
    hook: Option<EpochHook>,
}

impl Trainer {
    pub fn new(model: HybridModel, cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        if model.edgan != cfg.edgan || model.lrcn != cfg.lrcn {
            return Err(TrainError::Contract("model architecture differs from the training config".into()));
        }
        Ok(Self {
            model,
            cfg,
            log: TrainLog::new(),
            prev_accuracy: None,
            step: 0,
            hook: None,
        })
    }

    /// Fresh model initialized from `cfg.seed`.
    pub fn from_config(cfg: TrainConfig) -> Result<Self, TrainError> {
        let model = HybridModel::init(cfg.edgan.clone(), cfg.lrcn.clone(), cfg.seed)?;
        Self::new(model, cfg)
    }

    pub fn with_log(mut self, log: TrainLog) -> Self {
        self.step = log.records.last().map_or(0, |r| r.step);
        self.log = log;
        self
    }

    pub fn on_epoch(&mut self, hook: EpochHook) {
        self.hook = Some(hook);
    }

    pub fn into_parts(self) -> (HybridModel, TrainLog) {
        (self.model, self.log)
    }

    /// Stages 1a then 1b.
    pub fn train_stage1(&mut self, samples: &[&Sample]) -> Result<[StageSummary; 2], TrainError> {
        Ok([
            self.run_stage(Stage::Reconstruction, samples)?,
            self.run_stage(Stage::Adversarial, samples)?,
        ])
    }

    pub fn train_stage2(&mut self, samples: &[&Sample]) -> Result<StageSummary, TrainError> {
        self.run_stage(Stage::Upsampler, samples)
    }

    pub fn train_stage3(&mut self, samples: &[&Sample]) -> Result<StageSummary, TrainError> {
        self.run_stage(Stage::Joint, samples)
    }

    pub fn train_all(&mut self, samples: &[&Sample]) -> Result<Vec<StageSummary>, TrainError> {
        Stage::ALL.into_iter().map(|s| self.run_stage(s, samples)).collect()
    }

    pub fn run_stage(&mut self, stage: Stage, samples: &[&Sample]) -> Result<StageSummary, TrainError> {
        if samples.is_empty() {
            return Err(TrainError::Contract(format!("stage {stage}: no training samples")));
        }
        let sc = *self.cfg.stage(stage);
        self.prev_accuracy = None;
        let mut epoch_means = Vec::with_capacity(sc.epochs);
        let mut steps = 0;
        for epoch in 0..sc.epochs {
            let mut order: Vec<usize> = (0..samples.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(stage.shuffle_seed(self.cfg.seed, epoch)));
            let mut sum = 0.0;
            let mut count = 0;
            for chunk in order.chunks(sc.batch) {
                let batch: Vec<&Sample> = chunk.iter().map(|&i| samples[i]).collect();
                let record = self.step(stage, epoch, &batch)?;
                sum += record.total();
                count += 1;
                self.log.push(record)?;
            }
            steps += count;
            let mean = sum / count as f64;
            if let Some(hook) = self.hook.as_mut() {
                hook(stage, epoch, mean);
            }
            epoch_means.push(mean);
        }
        Ok(StageSummary {
            stage,
            steps,
            first_epoch: epoch_means.first().copied().unwrap_or(f64::NAN),
            last_epoch: epoch_means.last().copied().unwrap_or(f64::NAN),
        })
    }

    fn step(&mut self, stage: Stage, epoch: usize, batch: &[&Sample]) -> Result<TrainRecord, TrainError> {
        let started = Instant::now();
        self.step += 1;
        let sc = *self.cfg.stage(stage);
        let (a1, a2, a3, a4) = (self.cfg.alpha1, self.cfg.alpha2, self.cfg.alpha3, self.cfg.alpha4);
        let mut losses: Vec<(String, f64)> = Vec::new();
        let mut push = |name: &str, v: f64| losses.push((name.to_string(), v));
        let mut ed = None;
        match stage {
            Stage::Reconstruction => {
                let s = self.ed_step(stage, batch, false, 1.0, sc.lr, sc.disc_lr)?;
                push("recon", s.recon);
                push("total", -s.recon);
                ed = Some(s);
            }
            Stage::Adversarial => {
                let s = self.ed_step(stage, batch, true, 1.0, sc.lr, sc.disc_lr)?;
                let (gan, gan_fake) = (s.gan.unwrap_or(0.0), s.gan_fake.unwrap_or(0.0));
                let g = generator_objective(gan_fake, s.recon, a1, a2);
                push("recon", s.recon);
                push("gan", gan);
                push("gan_fake", gan_fake);
                push("d_loss", s.d_loss.unwrap_or(-gan));
                push("edgan", loss_edgan(gan, s.recon, a1, a2));
                push("g_obj", g);
                push("total", g);
                ed = Some(s);
            }
            Stage::Upsampler => {
                let inputs: Vec<&VoxelGrid> = batch.iter().map(|s| &s.low).collect();
                let targets: Vec<&VoxelGrid> = batch.iter().map(|s| &s.high).collect();
                let l1 = self.lrcn_step(stage, &inputs, &targets, 1.0, sc.lr)?;
                push("l1", l1);
                push("total", l1);
            }
            Stage::Joint => {
                let s = self.ed_step(stage, batch, true, a3, sc.lr, sc.disc_lr)?;
                let binary: Vec<VoxelGrid> = s.fake.iter().map(|p| p.binarize(THRESHOLD)).collect();
                let inputs: Vec<&VoxelGrid> = binary.iter().collect();
                let targets: Vec<&VoxelGrid> = batch.iter().map(|s| &s.high).collect();
                let l1 = self.lrcn_step(stage, &inputs, &targets, a4, sc.lr)?;
                let (gan, gan_fake) = (s.gan.unwrap_or(0.0), s.gan_fake.unwrap_or(0.0));
                let g = generator_objective(gan_fake, s.recon, a1, a2);
                let edgan = loss_edgan(gan, s.recon, a1, a2);
                push("recon", s.recon);
                push("gan", gan);
                push("gan_fake", gan_fake);
                push("d_loss", s.d_loss.unwrap_or(-gan));
                push("edgan", edgan);
                push("g_obj", g);
                push("l1", l1);
                push("hybrid", loss_hybrid(edgan, l1, a3, a4));
                push("total", a3 * g + a4 * l1);
                ed = Some(s);
            }
        }
        if let Some((name, v)) = losses.iter().find(|(_, v)| !v.is_finite()) {
            return Err(TrainError::NonFinite {
                stage,
                step: self.step,
                what: format!("{name} = {v}"),
            });
        }
        Ok(TrainRecord {
            stage,
            epoch,
            step: self.step,
            losses,
            accuracy: ed.as_ref().and_then(|s| s.accuracy),
            prev_accuracy: ed.as_ref().and_then(|s| s.prev_accuracy),
            d_update: ed.as_ref().and_then(|s| s.d_update),
            d_delta: ed.as_ref().and_then(|s| s.d_delta),
            wall_ms: started.elapsed().as_micros() as f64 / 1e3,
        })
    }

    fn adam(&self, lr: f64) -> Result<Adam, TrainError> {
        Ok(Adam::with_betas(lr, self.cfg.beta1, self.cfg.beta2, 1e-8)?)
    }

    /// One encoder-decoder step, with the gated discriminator when
    /// `adversarial`. The encoder-decoder objective is scaled by `weight`.
    fn ed_step(
        &mut self,
        stage: Stage,
        batch: &[&Sample],
        adversarial: bool,
        weight: f64,
        lr: f64,
        disc_lr: f64,
    ) -> Result<EdStats, TrainError> {
        let cfg = self.cfg.edgan.clone();
        let (a1, a2) = (self.cfg.alpha1, self.cfg.alpha2);
        let n = batch.len();
        let inputs: Vec<&VoxelGrid> = batch.iter().map(|s| &s.corrupted).collect();
        let clean: Vec<&VoxelGrid> = batch.iter().map(|s| &s.low).collect();
        let update_d = adversarial && self.prev_accuracy.is_none_or(|a| a <= self.cfg.gate);

        let mut tape = Tape::<f32>::new();
        let x = tape.constant(volume_tensor(&inputs)?);
        let real = tape.constant(volume_tensor(&clean)?);
        let HybridModel {
            generator,
            discriminator: disc,
            ..
        } = &mut self.model;
        let mut gb = generator.binder(BnMode::TRAIN, true);
        let z = edgan_encoder(&mut tape, &mut gb, &cfg, x)?;
        let fake = edgan_decoder(&mut tape, &mut gb, &cfg, z)?;
        let recon = loss_recon(&mut tape, fake, real)?;
        let fake_values = tape.value(fake).clone();

        let mut stats = EdStats {
            recon: scalar(&tape, recon),
            gan: None,
            gan_fake: None,
            d_loss: None,
            accuracy: None,
            prev_accuracy: self.prev_accuracy.filter(|_| adversarial),
            d_update: adversarial.then_some(update_d),
            d_delta: None,
            fake: Vec::new(),
        };

        let mut objective = if adversarial {
            let both = tape.concat_rows(&[real, fake])?;
            let scores = {
                let mut frozen = disc.detached_binder(BnMode::TRAIN_FROZEN, false);
                discriminator(&mut tape, &mut frozen, &cfg, both)?
            };
            let (d_real, d_fake) = split_scores(&mut tape, scores, n)?;
            let gan = loss_gan(&mut tape, d_real, d_fake)?;
            let gan_fake = mean_log_complement(&mut tape, d_fake)?;
            let (acc, _) = disc_accuracy_gate(&values(&tape, d_real), &values(&tape, d_fake), self.cfg.gate);
            stats.gan = Some(scalar(&tape, gan));
            stats.gan_fake = Some(scalar(&tape, gan_fake));
            stats.accuracy = Some(acc);
            let adv = tape.scale(gan_fake, a1);
            let fit = tape.scale(recon, a2);
            tape.sub(adv, fit)?
        } else {
            tape.scale(recon, -1.0)
        };
        objective = tape.scale(objective, weight);
        if !scalar(&tape, objective).is_finite() {
            return Err(non_finite(stage, self.step, "encoder-decoder objective"));
        }

        let mut total = objective;
        let mut db = None;
        if update_d {
            let detached = tape.constant(fake_values.clone());
            let both = tape.concat_rows(&[real, detached])?;
            let mut b = disc.binder(BnMode::TRAIN, true);
            let scores = discriminator(&mut tape, &mut b, &cfg, both)?;
            let (d_real, d_fake) = split_scores(&mut tape, scores, n)?;
            let gan = loss_gan(&mut tape, d_real, d_fake)?;
            let d_loss = tape.scale(gan, -1.0);
            stats.d_loss = Some(scalar(&tape, d_loss));
            total = tape.add(total, d_loss)?;
            db = Some(b);
        }

        let grads = tape.backward(total)?;
        let g_grads = gb.grads(&grads);
        let d_grads = db.map(|b| b.grads(&grads));
        drop(gb);
        check_grads(&g_grads).map_err(|_| non_finite(stage, self.step, "encoder-decoder gradient"))?;
        let adam = self.adam(lr)?;
        self.model.generator.adam_step(&adam, &g_grads)?;
        self.model.generator.round_norms();

        if adversarial {
            let before = snapshot(&self.model.discriminator);
            if let Some(d_grads) = d_grads {
                check_grads(&d_grads).map_err(|_| non_finite(stage, self.step, "discriminator gradient"))?;
                let adam = self.adam(disc_lr)?;
                self.model.discriminator.adam_step(&adam, &d_grads)?;
                self.model.discriminator.round_norms();
            }
            stats.d_delta = Some(max_delta(&before, &self.model.discriminator));
            self.prev_accuracy = stats.accuracy;
        }
        stats.fake = split_volumes(&fake_values.into_data(), n, cfg.d_l);
        Ok(stats)
    }

    /// One LRCN step on `inputs` (low resolution) against `targets`.
    fn lrcn_step(
        &mut self,
        stage: Stage,
        inputs: &[&VoxelGrid],
        targets: &[&VoxelGrid],
        weight: f64,
        lr: f64,
    ) -> Result<f64, TrainError> {
        let cfg = self.cfg.lrcn.clone();
        let seqs = inputs
            .iter()
            .map(|g| slice_volume(g, cfg.d_h, cfg.c))
            .collect::<Result<Vec<_>, _>>()?;
        let mut tape = Tape::<f32>::new();
        let slabs = tape.constant(slab_tensor(&seqs)?);
        let target = tape.constant(plane_tensor(targets)?);
        let mut b = self.model.upsampler.binder(BnMode::TRAIN, true);
        let images = lrcn_sequence(&mut tape, &mut b, &cfg, slabs, inputs.len())?;
        let l1 = loss_l1(&mut tape, images, target)?;
        let value = scalar(&tape, l1);
        if !value.is_finite() {
            return Err(non_finite(stage, self.step, "l1"));
        }
        let objective = tape.scale(l1, weight);
        let grads = tape.backward(objective)?;
        let grads = b.grads(&grads);
        check_grads(&grads).map_err(|_| non_finite(stage, self.step, "LRCN gradient"))?;
        let adam = self.adam(lr)?;
        self.model.upsampler.adam_step(&adam, &grads)?;
        self.model.upsampler.round_norms();
        Ok(value)
    }
}

fn non_finite(stage: Stage, step: u64, what: &str) -> TrainError {
    TrainError::NonFinite {
        stage,
        step,
        what: what.to_string(),
    }
}

fn scalar(tape: &Tape<f32>, v: Var) -> f64 {
    tape.value(v).data()[0] as f64
}

fn values(tape: &Tape<f32>, v: Var) -> Vec<f64> {
    tape.value(v).data().iter().map(|&x| x as f64).collect()
}

fn split_scores(tape: &mut Tape<f32>, scores: Var, n: usize) -> Result<(Var, Var), TrainError> {
    Ok((tape.slice_rows(scores, 0, n)?, tape.slice_rows(scores, n, n)?))
}

fn check_grads(grads: &ParamGrads<f32>) -> Result<(), ()> {
    let finite = grads.iter().flatten().all(|g| g.iter().all(|v| v.is_finite()));
    if finite {
        Ok(())
    } else {
        Err(())
    }
}

fn snapshot(p: &ModelParams) -> Vec<f32> {
    p.params().iter().flat_map(|q| q.value.data().iter().copied()).collect()
}

fn max_delta(before: &[f32], p: &ModelParams) -> f64 {
    before
        .iter()
        .zip(p.params().iter().flat_map(|q| q.value.data().iter()))
        .map(|(a, b)| (*a as f64 - *b as f64).abs())
        .fold(0.0, f64::max)
}

fn split_volumes(data: &[f32], n: usize, d: usize) -> Vec<ProbVolume> {
    let len = d * d * d;
    (0..n)
        .map(|k| ProbVolume::new(d, data[k * len..][..len].to_vec()).expect("sized"))
        .collect()
}
