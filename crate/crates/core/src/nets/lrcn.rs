//! Slice-sequence upsampler: a 3D slab encoder, a peephole LSTM, and a 2D
//! transposed-convolution decoder.

use crate::tensor::{Real, Tape, Tensor, Var};

use super::params::{Init, Layout};
use super::{Binder, LrcnConfig, NetError};

const GATES: [&str; 4] = ["i", "f", "c", "o"];

pub fn lrcn_layout(cfg: &LrcnConfig) -> Layout {
    let mut l = Layout::default();
    let mut c_in = 1;
    for (k, &c) in cfg.channels.iter().enumerate() {
        l.conv(&format!("lrcn.enc.conv{}", k + 1), c, c_in, 3);
        l.batch_norm(&format!("lrcn.enc.bn{}", k + 1), c);
        c_in = c;
    }
    l.linear("lrcn.enc.fc", cfg.feature_dim, cfg.encoder_flat());

    let (h, f) = (cfg.hidden_dim, cfg.feature_dim);
    for g in GATES {
        l.push(format!("lrcn.lstm.w_v{g}"), vec![h, f], Init::Normal);
        l.push(format!("lrcn.lstm.w_h{g}"), vec![h, h], Init::Normal);
        l.push(format!("lrcn.lstm.b_{g}"), vec![h], Init::Zero);
    }
    for g in ["i", "f", "o"] {
        l.push(format!("lrcn.lstm.w_c{g}"), vec![h], Init::Normal);
    }

    let s = cfg.seed_extent();
    l.linear("lrcn.dec.fc", s * s * cfg.seed_channels, h);
    l.deconv("lrcn.dec.deconv1", cfg.seed_channels, cfg.mid_channels, 2);
    l.batch_norm("lrcn.dec.bn1", cfg.mid_channels);
    l.deconv("lrcn.dec.deconv2", cfg.mid_channels, 1, 2);
    l
}

/// `[M, 1, d_l, d_l, c]` slabs → features `[M, feature_dim]`.
pub fn lrcn_encoder<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &LrcnConfig,
    slabs: Var,
) -> Result<Var, NetError> {
    let s = tape.shape(slabs);
    if s.len() != 5 || s[1] != 1 || s[2..] != [cfg.d_l, cfg.d_l, cfg.c] {
        return Err(NetError::Contract(format!(
            "slabs {s:?}, expected [M, 1, {0}, {0}, {1}]",
            cfg.d_l, cfg.c
        )));
    }
    let m = s[0];
    let mut x = slabs;
    for k in 1..=3 {
        x = b.conv(tape, x, &format!("lrcn.enc.conv{k}"))?;
        x = b.batch_norm(tape, x, &format!("lrcn.enc.bn{k}"))?;
        x = tape.relu(x);
    }
    let x = tape.reshape(x, &[m, cfg.encoder_flat()])?;
    b.linear(tape, x, "lrcn.enc.fc")
}

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros<T: Real>(tape: &mut Tape<T>, n: usize, hidden: usize) -> Self {
        LstmState {
            h: tape.constant(Tensor::zeros(vec![n, hidden])),
            c: tape.constant(Tensor::zeros(vec![n, hidden])),
        }
    }
}

/// Input-side pre-activations `W_v· v + b` for the four gates.
fn input_projection<T: Real>(tape: &mut Tape<T>, b: &mut Binder<T>, v: Var) -> Result<[Var; 4], NetError> {
    let mut out = [v; 4];
    for (k, g) in GATES.iter().enumerate() {
        let w = b.var(tape, &format!("lrcn.lstm.w_v{g}"))?;
        let bias = b.var(tape, &format!("lrcn.lstm.b_{g}"))?;
        out[k] = tape.linear(v, w, Some(bias))?;
    }
    Ok(out)
}

fn cell<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    pre: [Var; 4],
    state: LstmState,
) -> Result<(Var, LstmState), NetError> {
    let mut gate = |tape: &mut Tape<T>, k: usize, peep: Option<Var>| -> Result<Var, NetError> {
        let w = b.var(tape, &format!("lrcn.lstm.w_h{}", GATES[k]))?;
        let mut a = tape.linear(state.h, w, None)?;
        a = tape.add(pre[k], a)?;
        if let Some(c) = peep {
            let w = b.var(tape, &format!("lrcn.lstm.w_c{}", GATES[k]))?;
            let pc = tape.mul_row(c, w)?;
            a = tape.add(a, pc)?;
        }
        Ok(a)
    };
    let i = gate(tape, 0, Some(state.c))?;
    let i = tape.sigmoid(i);
    let f = gate(tape, 1, Some(state.c))?;
    let f = tape.sigmoid(f);
    let g = gate(tape, 2, None)?;
    let g = tape.tanh(g);
    let fc = tape.mul(f, state.c)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let o = gate(tape, 3, Some(c))?;
    let o = tape.sigmoid(o);
    let tc = tape.tanh(c);
    let h = tape.mul(o, tc)?;
    Ok((o, LstmState { h, c }))
}

/// One peephole LSTM update on `v: [N, feature_dim]`; returns the output gate
/// and the new state.
pub fn lstm_step<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &LrcnConfig,
    v: Var,
    state: LstmState,
) -> Result<(Var, LstmState), NetError> {
    let n = tape.shape(v)[0];
    let expect = [n, cfg.hidden_dim];
    if tape.shape(v) != [n, cfg.feature_dim] || tape.shape(state.h) != expect || tape.shape(state.c) != expect {
        return Err(NetError::Contract(format!(
            "lstm input {:?}, state {:?}/{:?}, expected [{n}, {}] and {expect:?}",
            tape.shape(v),
            tape.shape(state.h),
            tape.shape(state.c),
            cfg.feature_dim
        )));
    }
    let pre = input_projection(tape, b, v)?;
    cell(tape, b, pre, state)
}

/// `h: [M, hidden_dim]` → slice images `[M, 1, d_h, d_h]` in (0, 1).
pub fn lrcn_decoder<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &LrcnConfig,
    h: Var,
) -> Result<Var, NetError> {
    let s = tape.shape(h);
    if s.len() != 2 || s[1] != cfg.hidden_dim {
        return Err(NetError::Contract(format!("decoder input {s:?}, expected [M, {}]", cfg.hidden_dim)));
    }
    let (m, e) = (s[0], cfg.seed_extent());
    let x = b.linear(tape, h, "lrcn.dec.fc")?;
    let x = tape.reshape(x, &[m, cfg.seed_channels, e, e])?;
    let x = b.deconv(tape, x, "lrcn.dec.deconv1")?;
    let x = b.batch_norm(tape, x, "lrcn.dec.bn1")?;
    let x = tape.relu(x);
    let x = b.deconv(tape, x, "lrcn.dec.deconv2")?;
    let x = tape.tanh(x);
    Ok(tape.affine(x, 0.5, 0.5))
}

/// Runs the whole sequence for `n` volumes. `slabs` is `[T·n, 1, d_l, d_l, c]`
/// in step-major order (row `t·n + k` is step `t` of volume `k`); the result
/// has the same row order with shape `[T·n, 1, d_h, d_h]`.
pub fn lrcn_sequence<T: Real>(
    tape: &mut Tape<T>,
    b: &mut Binder<T>,
    cfg: &LrcnConfig,
    slabs: Var,
    n: usize,
) -> Result<Var, NetError> {
    let rows = tape.shape(slabs)[0];
    if n == 0 || rows % n != 0 {
        return Err(NetError::Contract(format!("{rows} slab rows do not split into {n} volumes")));
    }
    let steps = rows / n;
    let v = lrcn_encoder(tape, b, cfg, slabs)?;
    let pre_all = input_projection(tape, b, v)?;
    let mut state = LstmState::zeros(tape, n, cfg.hidden_dim);
    let mut hs = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut pre = pre_all;
        for p in &mut pre {
            *p = tape.slice_rows(*p, t * n, n)?;
        }
        let (_, next) = cell(tape, b, pre, state)?;
        state = next;
        hs.push(state.h);
    }
    let h = tape.concat_rows(&hs)?;
    lrcn_decoder(tape, b, cfg, h)
}
