//! Named parameter store with Adam moments and batch-norm running state.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::tensor::{
    grad_check, Adam, BatchNormState, BnMode, GradCheck, GradCheckReport, Gradients, Real, Tape, Tensor, TensorError,
    Var,
};

use super::config::KERNEL;
use super::NetError;

pub const INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Init {
    Normal,
    Zero,
    One,
}

/// Declared parameter shapes and batch-norm layers of one network group.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Layout {
    pub params: Vec<(String, Vec<usize>, Init)>,
    pub norms: Vec<(String, usize)>,
}

impl Layout {
    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, init: Init) {
        self.params.push((name.into(), shape, init));
    }

    /// `[c_out, c_in, 5, ..]` weight and `[c_out]` bias.
    pub fn conv(&mut self, name: &str, c_out: usize, c_in: usize, spatial: usize) {
        let mut shape = vec![c_out, c_in];
        shape.extend(std::iter::repeat_n(KERNEL, spatial));
        self.push(format!("{name}.w"), shape, Init::Normal);
        self.push(format!("{name}.b"), vec![c_out], Init::Zero);
    }

    /// `[c_in, c_out, 5, ..]` weight and `[c_out]` bias.
    pub fn deconv(&mut self, name: &str, c_in: usize, c_out: usize, spatial: usize) {
        let mut shape = vec![c_in, c_out];
        shape.extend(std::iter::repeat_n(KERNEL, spatial));
        self.push(format!("{name}.w"), shape, Init::Normal);
        self.push(format!("{name}.b"), vec![c_out], Init::Zero);
    }

    pub fn batch_norm(&mut self, name: &str, channels: usize) {
        self.push(format!("{name}.gamma"), vec![channels], Init::One);
        self.push(format!("{name}.beta"), vec![channels], Init::Zero);
        self.norms.push((name.to_string(), channels));
    }

    pub fn linear(&mut self, name: &str, out: usize, input: usize) {
        self.push(format!("{name}.w"), vec![out, input], Init::Normal);
        self.push(format!("{name}.b"), vec![out], Init::Zero);
    }

    /// Total scalar count over all parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|(_, s, _)| s.iter().product::<usize>()).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param<T: Real = f32> {
    pub name: String,
    pub value: Tensor<T>,
    pub m1: Vec<T>,
    pub m2: Vec<T>,
}

/// Parameters of one network group, their optimizer state, and the running
/// statistics of its batch-norm layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T: Real = f32> {
    params: Vec<Param<T>>,
    index: BTreeMap<String, usize>,
    pub norms: BTreeMap<String, BatchNormState>,
    /// Adam steps taken so far.
    pub step: u64,
}

/// Per-parameter gradients from one backward pass, indexed like the store.
pub type ParamGrads<T> = Vec<Option<Vec<T>>>;

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            params: Vec::new(),
            index: BTreeMap::new(),
            norms: BTreeMap::new(),
            step: 0,
        }
    }
}

impl<T: Real> ModelParams<T> {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fresh parameters for `layout`: normal(0, 0.02) weights, zero biases and
    /// betas, unit gammas, drawn in declaration order from `seed`.
    pub fn init(layout: &Layout, seed: u64) -> Result<Self, NetError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid normal");
        let mut out = Self::new();
        for (name, shape, init) in &layout.params {
            let tensor = match init {
                Init::Normal => Tensor::from_fn(shape.clone(), |_| T::from_f64(normal.sample(&mut rng))),
                Init::Zero => Tensor::zeros(shape.clone()),
                Init::One => Tensor::full(shape.clone(), T::ONE),
            };
            out.insert(name, tensor)?;
        }
        for (name, channels) in &layout.norms {
            out.norms.insert(name.clone(), BatchNormState::new(*channels));
        }
        Ok(out)
    }

    pub fn insert(&mut self, name: &str, value: Tensor<T>) -> Result<(), NetError> {
        if self.index.contains_key(name) {
            return Err(NetError::Contract(format!("duplicate parameter {name:?}")));
        }
        let n = value.numel();
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            value: value.with_requires_grad(false),
            m1: vec![T::ZERO; n],
            m2: vec![T::ZERO; n],
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.iter().map(|p| p.name.as_str())
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.position(name).map(|i| &self.params[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.position(name).map(move |i| &mut self.params[i].value)
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.numel()).sum()
    }

    /// Same names, shapes, and batch-norm layers as `layout`.
    pub fn check_layout(&self, layout: &Layout) -> Result<(), NetError> {
        if self.params.len() != layout.params.len() {
            return Err(NetError::Contract(format!(
                "expected {} parameters, found {}",
                layout.params.len(),
                self.params.len()
            )));
        }
        for (name, shape, _) in &layout.params {
            match self.get(name) {
                None => return Err(NetError::MissingParam(name.clone())),
                Some(t) if t.shape() != shape.as_slice() => {
                    return Err(NetError::Contract(format!(
                        "parameter {name} has shape {:?}, expected {shape:?}",
                        t.shape()
                    )))
                }
                Some(_) => {}
            }
        }
        for (name, channels) in &layout.norms {
            match self.norms.get(name) {
                Some(s) if s.channels() == *channels => {}
                _ => return Err(NetError::MissingParam(format!("{name} running statistics"))),
            }
        }
        Ok(())
    }

    /// Marks every batch-norm layer as having zero mean, unit variance.
    pub fn set_unit_norms(&mut self) {
        for state in self.norms.values_mut() {
            *state = BatchNormState::unit(state.channels());
        }
    }

    /// Rounds running statistics to `f32` so checkpoints restore them exactly.
    pub fn round_norms(&mut self) {
        for state in self.norms.values_mut() {
            for v in state.mean.iter_mut().chain(state.var.iter_mut()) {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn binder(&mut self, mode: BnMode, trainable: bool) -> Binder<'_, T> {
        Binder {
            bound: vec![None; self.params.len()],
            params: &self.params,
            index: &self.index,
            norms: Norms::Shared(&mut self.norms),
            mode,
            trainable,
        }
    }

    /// Binder over a private copy of the running statistics, for passes that
    /// must not change the store.
    pub fn detached_binder(&self, mode: BnMode, trainable: bool) -> Binder<'_, T> {
        Binder {
            bound: vec![None; self.params.len()],
            params: &self.params,
            index: &self.index,
            norms: Norms::Owned(self.norms.clone()),
            mode,
            trainable,
        }
    }

    /// One Adam step over every parameter that received a gradient.
    pub fn adam_step(&mut self, adam: &Adam, grads: &ParamGrads<T>) -> Result<(), NetError> {
        if grads.len() != self.params.len() {
            return Err(NetError::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.params.len()
            )));
        }
        self.step += 1;
        for (p, g) in self.params.iter_mut().zip(grads) {
            if let Some(g) = g {
                adam.update(self.step, p.value.data_mut(), g, &mut p.m1, &mut p.m2)?;
            }
        }
        Ok(())
    }

    /// FNV-1a over names and value bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        for p in &self.params {
            h.write(p.name.as_bytes());
            for v in p.value.data() {
                h.write(&v.as_f64().to_bits().to_le_bytes());
            }
        }
        h.0
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            params: self
                .params
                .iter()
                .map(|p| Param {
                    name: p.name.clone(),
                    value: p.value.cast(),
                    m1: p.m1.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                    m2: p.m2.iter().map(|v| U::from_f64(v.as_f64())).collect(),
                })
                .collect(),
            index: self.index.clone(),
            norms: self.norms.clone(),
            step: self.step,
        }
    }
}

/// Finite-difference check of the scalar built by `build` with respect to
/// the named parameters; all other parameters are held fixed. Batch norm
/// uses batch statistics without touching the stored running state.
pub fn grad_check_params<F>(
    params: &ModelParams<f64>,
    names: &[&str],
    opts: GradCheck,
    build: F,
) -> Result<GradCheckReport, NetError>
where
    F: Fn(&mut Tape<f64>, &mut Binder<f64>) -> Result<Var, NetError>,
{
    let inputs = names
        .iter()
        .map(|n| {
            params
                .get(n)
                .map(|t| t.clone().with_requires_grad(true))
                .ok_or_else(|| NetError::MissingParam(n.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let report = grad_check(
        &inputs,
        |tape, vars| {
            let mut b = params.detached_binder(BnMode::TRAIN_FROZEN, false);
            for (n, &v) in names.iter().zip(vars) {
                b.preset(n, v).map_err(|e| TensorError::contract("grad_check_params", e.to_string()))?;
            }
            build(tape, &mut b).map_err(|e| match e {
                NetError::Tensor(t) => t,
                other => TensorError::contract("grad_check_params", other.to_string()),
            })
        },
        opts,
    )?;
    Ok(report)
}

struct Fnv(u64);

impl Fnv {
    fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }
}

enum Norms<'a> {
    Shared(&'a mut BTreeMap<String, BatchNormState>),
    Owned(BTreeMap<String, BatchNormState>),
}

impl Norms<'_> {
    fn get_mut(&mut self, name: &str) -> Option<&mut BatchNormState> {
        match self {
            Norms::Shared(m) => m.get_mut(name),
            Norms::Owned(m) => m.get_mut(name),
        }
    }
}

/// Places a group's parameters on a tape on first use and remembers the
/// handles so gradients can be routed back by name.
pub struct Binder<'a, T: Real> {
    params: &'a [Param<T>],
    index: &'a BTreeMap<String, usize>,
    norms: Norms<'a>,
    mode: BnMode,
    trainable: bool,
    bound: Vec<Option<Var>>,
}

impl<T: Real> Binder<'_, T> {
    pub fn mode(&self) -> BnMode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: BnMode) {
        self.mode = mode;
    }

    pub fn var(&mut self, tape: &mut Tape<T>, name: &str) -> Result<Var, NetError> {
        let i = *self.index.get(name).ok_or_else(|| NetError::MissingParam(name.to_string()))?;
        if let Some(v) = self.bound[i] {
            return Ok(v);
        }
        let tensor = self.params[i].value.clone().with_requires_grad(self.trainable);
        let v = tape.leaf(tensor);
        self.bound[i] = Some(v);
        Ok(v)
    }

    /// Routes `name` to an existing tape value instead of a fresh leaf.
    pub fn preset(&mut self, name: &str, var: Var) -> Result<(), NetError> {
        let i = *self.index.get(name).ok_or_else(|| NetError::MissingParam(name.to_string()))?;
        self.bound[i] = Some(var);
        Ok(())
    }

    pub fn conv(&mut self, tape: &mut Tape<T>, x: Var, name: &str) -> Result<Var, NetError> {
        let w = self.var(tape, &format!("{name}.w"))?;
        let b = self.var(tape, &format!("{name}.b"))?;
        Ok(tape.conv_nd(x, w, Some(b), super::config::STRIDE, super::config::PAD)?)
    }

    pub fn deconv(&mut self, tape: &mut Tape<T>, x: Var, name: &str) -> Result<Var, NetError> {
        let w = self.var(tape, &format!("{name}.w"))?;
        let b = self.var(tape, &format!("{name}.b"))?;
        Ok(tape.conv_transpose_nd(x, w, Some(b), super::config::STRIDE, super::config::PAD)?)
    }

    pub fn linear(&mut self, tape: &mut Tape<T>, x: Var, name: &str) -> Result<Var, NetError> {
        let w = self.var(tape, &format!("{name}.w"))?;
        let b = self.var(tape, &format!("{name}.b"))?;
        Ok(tape.linear(x, w, Some(b))?)
    }

    pub fn batch_norm(&mut self, tape: &mut Tape<T>, x: Var, name: &str) -> Result<Var, NetError> {
        let gamma = self.var(tape, &format!("{name}.gamma"))?;
        let beta = self.var(tape, &format!("{name}.beta"))?;
        let state = self
            .norms
            .get_mut(name)
            .ok_or_else(|| NetError::MissingParam(format!("{name} running statistics")))?;
        Ok(tape.batch_norm(x, gamma, beta, self.mode, state)?)
    }

    /// Gradients of every bound parameter, in store order.
    pub fn grads(&self, gradients: &Gradients<T>) -> ParamGrads<T> {
        self.bound
            .iter()
            .map(|v| v.and_then(|v| gradients.grad(v)).map(<[T]>::to_vec))
            .collect()
    }

    /// Names of the parameters bound so far.
    pub fn touched(&self) -> Vec<&str> {
        self.bound
            .iter()
            .zip(self.params)
            .filter(|(v, _)| v.is_some())
            .map(|(_, p)| p.name.as_str())
            .collect()
    }
}
