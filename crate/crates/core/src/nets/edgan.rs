//! 3D encoder-decoder generator and discriminator.

use crate::tensor::{Real, Tape, Var};

use super::params::Layout;
use super::{Binder, EdGanConfig, NetError};

/// Generator parameters: `enc.*` and `dec.*`.
pub fn generator_layout(cfg: &EdGanConfig) -> Layout {
    let [c1, c2, c3] = cfg.channels;
    let mut l = Layout::default();
    encoder_layers(&mut l, "enc", cfg);
    l.deconv("dec.deconv1", c3, c2, 3);
    l.batch_norm("dec.bn1", c2);
    l.deconv("dec.deconv2", c2, c1, 3);
    l.batch_norm("dec.bn2", c1);
    l.deconv("dec.deconv3", c1, 1, 3);
    l
}

/// Discriminator parameters: `disc.*`.
pub fn discriminator_layout(cfg: &EdGanConfig) -> Layout {
    let mut l = Layout::default();
    encoder_layers(&mut l, "disc", cfg);
    l.linear("disc.fc", 1, cfg.latent_dim());
    l
}

fn encoder_layers(l: &mut Layout, prefix: &str, cfg: &EdGanConfig) {
    let mut c_in = 1;
    for (k, &c) in cfg.channels.iter().enumerate() {
        l.conv(&format!("{prefix}.conv{}", k + 1), c, c_in, 3);
        l.batch_norm(&format!("{prefix}.bn{}", k + 1), c);
        c_in = c;
    }
}

fn check_volume<T: Real>(tape: &Tape<T>, x: Var, d: usize) -> Result<usize, NetError> {
    let s = tape.shape(x);
    if s.len() != 5 || s[1] != 1 || s[2..] != [d, d, d] {
        return Err(NetError::Contract(format!("expected [N, 1, {d}, {d}, {d}] volume, got {s:?}")));
    }
    Ok(s[0])
}

fn conv_stack<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    prefix: &str,
    mut x: Var,
) -> Result<Var, NetError> {
    for k in 1..=3 {
        x = b.conv(tape, x, &format!("{prefix}.conv{k}"))?;
        x = b.batch_norm(tape, x, &format!("{prefix}.bn{k}"))?;
        x = tape.relu(x);
    }
    Ok(x)
}

/// `[N, 1, d_l, d_l, d_l]` → `z: [N, latent_dim]`.
pub fn edgan_encoder<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &EdGanConfig,
    x: Var,
) -> Result<Var, NetError> {
    let n = check_volume(tape, x, cfg.d_l)?;
    let h = conv_stack(tape, b, "enc", x)?;
    Ok(tape.reshape(h, &[n, cfg.latent_dim()])?)
}

/// `z: [N, latent_dim]` → occupancy probabilities `[N, 1, d_l, d_l, d_l]` in (0, 1).
pub fn edgan_decoder<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &EdGanConfig,
    z: Var,
) -> Result<Var, NetError> {
    let s = tape.shape(z);
    if s.len() != 2 || s[1] != cfg.latent_dim() {
        return Err(NetError::Contract(format!("latent {s:?}, expected [N, {}]", cfg.latent_dim())));
    }
    let (n, e) = (s[0], cfg.latent_extent());
    let mut x = tape.reshape(z, &[n, cfg.channels[2], e, e, e])?;
    for k in 1..=2 {
        x = b.deconv(tape, x, &format!("dec.deconv{k}"))?;
        x = b.batch_norm(tape, x, &format!("dec.bn{k}"))?;
        x = tape.relu(x);
    }
    x = b.deconv(tape, x, "dec.deconv3")?;
    x = tape.tanh(x);
    Ok(tape.affine(x, 0.5, 0.5))
}

/// Realness score `[N]` in (0, 1).
pub fn discriminator<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &EdGanConfig,
    x: Var,
) -> Result<Var, NetError> {
    let n = check_volume(tape, x, cfg.d_l)?;
    let h = conv_stack(tape, b, "disc", x)?;
    let h = tape.reshape(h, &[n, cfg.latent_dim()])?;
    let logit = b.linear(tape, h, "disc.fc")?;
    let p = tape.sigmoid(logit);
    Ok(tape.reshape(p, &[n])?)
}
