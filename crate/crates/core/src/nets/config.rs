use super::NetError;

/// Number of k5/s2 stages in every encoder.
pub const ENCODER_DEPTH: usize = 3;
pub const KERNEL: usize = 5;
pub const STRIDE: usize = 2;
pub const PAD: usize = 2;

/// Extent after one k5/s2/p2 layer.
pub fn halve(n: usize) -> usize {
    n.div_ceil(STRIDE)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

impl std::str::FromStr for Scale {
    type Err = NetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(NetError::Contract(format!("unknown scale {s:?}, expected desk or full"))),
        }
    }
}

impl std::fmt::Display for Scale {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        })
    }
}

/// Encoder-decoder GAN over `d_l³` volumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdGanConfig {
    pub d_l: usize,
    /// Encoder widths; the decoder mirrors them.
    pub channels: [usize; 3],
}

impl EdGanConfig {
    pub fn new(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self {
                d_l: 16,
                channels: [8, 16, 32],
            },
            Scale::Full => Self {
                d_l: 32,
                channels: [64, 128, 256],
            },
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.d_l == 0 || self.d_l % 8 != 0 {
            return Err(NetError::Contract(format!("d_l {} is not a positive multiple of 8", self.d_l)));
        }
        if self.channels.contains(&0) {
            return Err(NetError::Contract(format!("zero channel width in {:?}", self.channels)));
        }
        Ok(())
    }

    /// Spatial extent of the last encoder feature map.
    pub fn latent_extent(&self) -> usize {
        self.d_l / 8
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_extent().pow(3) * self.channels[2]
    }
}

/// Slice-sequence upsampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LrcnConfig {
    pub d_l: usize,
    pub d_h: usize,
    /// Slices per step; odd.
    pub c: usize,
    pub channels: [usize; 3],
    pub feature_dim: usize,
    pub hidden_dim: usize,
    /// Channels of the `(d_h/4)²` map the decoder starts from.
    pub seed_channels: usize,
    /// Channels between the two decoder layers.
    pub mid_channels: usize,
}

impl LrcnConfig {
    pub fn new(scale: Scale) -> Self {
        match scale {
            Scale::Desk => Self {
                d_l: 16,
                d_h: 64,
                c: 5,
                channels: [8, 16, 32],
                feature_dim: 200,
                hidden_dim: 200,
                seed_channels: 8,
                mid_channels: 4,
            },
            Scale::Full => Self {
                d_l: 32,
                d_h: 128,
                c: 5,
                channels: [64, 128, 256],
                feature_dim: 200,
                hidden_dim: 200,
                seed_channels: 32,
                mid_channels: 16,
            },
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let fail = |m: String| Err(NetError::Contract(m));
        if self.d_l == 0 || self.d_l % 8 != 0 {
            return fail(format!("d_l {} is not a positive multiple of 8", self.d_l));
        }
        if self.d_h % self.d_l != 0 {
            return fail(format!("d_h {} is not a multiple of d_l {}", self.d_h, self.d_l));
        }
        if self.d_h % 4 != 0 {
            return fail(format!("d_h {} is not a multiple of 4", self.d_h));
        }
        if self.c % 2 == 0 {
            return fail(format!("slice count c = {} must be odd", self.c));
        }
        if self.channels.contains(&0)
            || [self.feature_dim, self.hidden_dim, self.seed_channels, self.mid_channels].contains(&0)
        {
            return fail("zero layer width".into());
        }
        Ok(())
    }

    /// Thickness of the slab after the three encoder layers.
    pub fn thickness_out(&self) -> usize {
        halve(halve(halve(self.c)))
    }

    pub fn encoder_flat(&self) -> usize {
        (self.d_l / 8).pow(2) * self.thickness_out() * self.channels[2]
    }

    pub fn seed_extent(&self) -> usize {
        self.d_h / 4
    }

    pub fn ratio(&self) -> usize {
        self.d_h / self.d_l
    }
}
