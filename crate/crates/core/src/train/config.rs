use std::fmt;

use crate::nets::{EdGanConfig, LrcnConfig, Scale};

use super::TrainError;

/// Probability clamp for every logarithm in the losses.
pub const LOG_CLAMP: f64 = 1e-7;

/// Training phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    /// Encoder-decoder alone on the reconstruction loss.
    Reconstruction,
    /// Encoder-decoder against the gated discriminator.
    Adversarial,
    /// LRCN as a pure upsampler on clean input.
    Upsampler,
    /// Joint finetuning of the whole hybrid.
    Joint,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Reconstruction, Stage::Adversarial, Stage::Upsampler, Stage::Joint];

    pub fn tag(self) -> &'static str {
        match self {
            Stage::Reconstruction => "1a",
            Stage::Adversarial => "1b",
            Stage::Upsampler => "2",
            Stage::Joint => "3",
        }
    }

    fn salt(self) -> u64 {
        match self {
            Stage::Reconstruction => 0x1a,
            Stage::Adversarial => 0x1b,
            Stage::Upsampler => 0x2,
            Stage::Joint => 0x3,
        }
    }

    /// Seed of the shuffle for `epoch` of this stage.
    pub fn shuffle_seed(self, seed: u64, epoch: usize) -> u64 {
        seed ^ (self.salt() << 56) ^ (epoch as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Stage {
    type Err = TrainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.tag() == s)
            .ok_or_else(|| TrainError::Contract(format!("unknown stage {s:?} (expected 1a, 1b, 2 or 3)")))
    }
}

/// Epochs, batch size and learning rates of one stage. `disc_lr` is used only
/// by stages that train the discriminator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StageConfig {
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub disc_lr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub scale: Scale,
    pub edgan: EdGanConfig,
    pub lrcn: LrcnConfig,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub alpha4: f64,
    /// Discriminator updates only while the previous batch accuracy is at
    /// most this value.
    pub gate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub reconstruction: StageConfig,
    pub adversarial: StageConfig,
    pub upsampler: StageConfig,
    pub joint: StageConfig,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(scale: Scale) -> Self {
        let stage = |epochs, batch, lr, disc_lr| StageConfig { epochs, batch, lr, disc_lr };
        let [reconstruction, adversarial, upsampler, joint] = match scale {
            Scale::Desk => [
                stage(20, 1, 1e-3, 1e-6),
                stage(30, 1, 1e-3, 1e-6),
                stage(100, 1, 1e-3, 1e-6),
                stage(10, 1, 1e-4, 1e-5),
            ],
            Scale::Full => [
                stage(20, 4, 1e-5, 1e-6),
                stage(100, 4, 1e-4, 1e-6),
                stage(100, 4, 1e-4, 1e-6),
                stage(10, 1, 1e-6, 1e-7),
            ],
        };
        Self {
            scale,
            edgan: EdGanConfig::new(scale),
            lrcn: LrcnConfig::new(scale),
            alpha1: 0.001,
            alpha2: 0.999,
            alpha3: 0.5,
            alpha4: 0.5,
            gate: 0.8,
            beta1: 0.5,
            beta2: 0.999,
            reconstruction,
            adversarial,
            upsampler,
            joint,
            seed: 0,
        }
    }

    pub fn stage(&self, stage: Stage) -> &StageConfig {
        match stage {
            Stage::Reconstruction => &self.reconstruction,
            Stage::Adversarial => &self.adversarial,
            Stage::Upsampler => &self.upsampler,
            Stage::Joint => &self.joint,
        }
    }

    pub fn stage_mut(&mut self, stage: Stage) -> &mut StageConfig {
        match stage {
            Stage::Reconstruction => &mut self.reconstruction,
            Stage::Adversarial => &mut self.adversarial,
            Stage::Upsampler => &mut self.upsampler,
            Stage::Joint => &mut self.joint,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |msg: String| Err(TrainError::Contract(msg));
        self.edgan.validate()?;
        self.lrcn.validate()?;
        if self.edgan.d_l != self.lrcn.d_l {
            return bad(format!("edgan d_l {} differs from lrcn d_l {}", self.edgan.d_l, self.lrcn.d_l));
        }
        if (self.alpha1 + self.alpha2 - 1.0).abs() > 1e-12 {
            return bad(format!("alpha1 + alpha2 must be 1, got {}", self.alpha1 + self.alpha2));
        }
        let alphas = [self.alpha1, self.alpha2, self.alpha3, self.alpha4];
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return bad(format!("loss weights must lie in [0, 1], got {alphas:?}"));
        }
        if !(self.gate > 0.0 && self.gate <= 1.0) {
            return bad(format!("gate threshold must lie in (0, 1], got {}", self.gate));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad(format!("Adam betas must lie in [0, 1), got {} and {}", self.beta1, self.beta2));
        }
        for stage in Stage::ALL {
            let s = self.stage(stage);
            if s.batch == 0 {
                return bad(format!("stage {stage}: batch size must be positive"));
            }
            if !(s.lr > 0.0 && s.lr.is_finite() && s.disc_lr > 0.0 && s.disc_lr.is_finite()) {
                return bad(format!("stage {stage}: learning rates must be positive"));
            }
        }
        Ok(())
    }
}
