//! Reverse-mode tape.
//!
//! Every op evaluates eagerly, stores its output on the tape, and records
//! the inputs it needs for its backward rule. [`Tape::backward`] walks the
//! records in reverse, accumulating gradients in `f64`, and hands the leaf
//! gradients back as [`Gradients`]. The tape is consumed by that call.

use super::conv::{self, conv_out_extent, gemm_acc, ConvGeom, Mat};
use super::norm::{self, BatchNormState, BnMode, BnSaved, BnShape};
use super::{Real, Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the output value `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Copy, Debug)]
struct ConvDims {
    batch: usize,
    c_big: usize,
    c_small: usize,
    geom: ConvGeom,
}

enum Op {
    Leaf,
    Conv {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
    ConvTranspose {
        input: Var,
        weight: Var,
        bias: Option<Var>,
        dims: ConvDims,
    },
    BatchNorm {
        input: Var,
        gamma: Var,
        beta: Var,
        saved: BnSaved,
    },
    Act {
        input: Var,
        kind: Activation,
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Option<Var>,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulRow {
        x: Var,
        row: Var,
    },
    Affine {
        x: Var,
        scale: f64,
    },
    Reshape(Var),
    Log {
        x: Var,
        lo: f64,
        hi: f64,
    },
    Sum(Var),
    Mean(Var),
    ConcatRows(Vec<Var>),
    SliceRows {
        x: Var,
        offset: usize,
    },
    LogLikelihood {
        pred: Var,
        target: Var,
        lo: f64,
    },
    L1Mean {
        pred: Var,
        target: Var,
    },
}

struct Node<T: Real> {
    value: Tensor<T>,
    op: Op,
}

/// Recorded computation graph over `Tensor<T>` values.
pub struct Tape<T: Real = f32> {
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Leaf gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients<T: Real = f32> {
    leaves: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    /// The leaf tensor with its `grad` slot populated, if `var` is a leaf
    /// that requires gradients.
    pub fn leaf(&self, var: Var) -> Option<&Tensor<T>> {
        self.leaves.get(var.0).and_then(Option::as_ref)
    }

    pub fn grad(&self, var: Var) -> Option<&[T]> {
        self.leaf(var).and_then(Tensor::grad)
    }
}

fn contract(op: &'static str, detail: String) -> TensorError {
    TensorError::contract(op, detail)
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a leaf; gradients flow to it iff `tensor.requires_grad()`.
    pub fn leaf(&mut self, tensor: Tensor<T>) -> Var {
        let mut tensor = tensor;
        tensor.clear_grad();
        self.nodes.push(Node {
            value: tensor,
            op: Op::Leaf,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf that never receives gradients.
    pub fn constant(&mut self, tensor: Tensor<T>) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, var: Var) -> &Tensor<T> {
        &self.nodes[var.0].value
    }

    pub fn shape(&self, var: Var) -> &[usize] {
        self.nodes[var.0].value.shape()
    }

    fn needs(&self, var: Var) -> bool {
        self.nodes[var.0].value.requires_grad()
    }

    fn push(&mut self, shape: Vec<usize>, data: Vec<T>, op: Op, inputs: &[Var]) -> Var {
        let requires = inputs.iter().any(|&v| self.needs(v));
        let value = Tensor::new(shape, data)
            .expect("op produced consistent shape")
            .with_requires_grad(requires);
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn push_f64(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let data = data.into_iter().map(T::from_f64).collect();
        self.push(shape, data, op, inputs)
    }

    fn conv_dims(
        &self,
        op: &'static str,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
        transpose: bool,
    ) -> Result<(ConvDims, Vec<usize>), TensorError> {
        let xs = self.shape(input);
        let ws = self.shape(weight);
        let spatial = xs.len().saturating_sub(2);
        if !(spatial == 2 || spatial == 3) {
            return Err(contract(op, format!("input must be [N, C, 2 or 3 spatial], got {xs:?}")));
        }
        if ws.len() != xs.len() {
            return Err(contract(op, format!("weight {ws:?} does not match input rank {}", xs.len())));
        }
        let k = ws[2];
        if ws[2..].iter().any(|&e| e != k) {
            return Err(contract(op, format!("kernel must be cubic/square, got {ws:?}")));
        }
        if stride == 0 {
            return Err(contract(op, "stride must be positive".into()));
        }
        // weight layout is [c_small, c_big, K..] in both directions
        let (c_small, c_big) = (ws[0], ws[1]);
        let c_in = xs[1];
        let expected_in = if transpose { c_small } else { c_big };
        if c_in != expected_in {
            return Err(contract(
                op,
                format!("input has {c_in} channels, weight {ws:?} expects {expected_in}"),
            ));
        }
        let c_out = if transpose { c_big } else { c_small };
        if let Some(b) = bias {
            let bs = self.shape(b);
            if bs != [c_out] {
                return Err(contract(op, format!("bias {bs:?}, expected [{c_out}]")));
            }
        }

        let lift = |v: &[usize], fill: usize| -> [usize; 3] {
            let mut out = [fill; 3];
            out[3 - v.len()..].copy_from_slice(v);
            out
        };
        let in_ext = &xs[2..];
        let (big, small) = if transpose {
            let big: Vec<usize> = in_ext.iter().map(|e| e * stride).collect();
            for (b, s) in big.iter().zip(in_ext) {
                if conv_out_extent(*b, k, stride, pad) != Some(*s) {
                    return Err(contract(
                        op,
                        format!("kernel {k} stride {stride} pad {pad} cannot map {s} to {b}"),
                    ));
                }
            }
            (big, in_ext.to_vec())
        } else {
            let small = in_ext
                .iter()
                .map(|&e| conv_out_extent(e, k, stride, pad))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| contract(op, format!("kernel {k} larger than padded input {xs:?}")))?;
            (in_ext.to_vec(), small)
        };
        let geom = ConvGeom {
            big: lift(&big, 1),
            small: lift(&small, 1),
            kernel: lift(&ws[2..], 1),
            stride: lift(&vec![stride; spatial], 1),
            pad: lift(&vec![pad; spatial], 0),
        };
        let out_ext = if transpose { big } else { small };
        let mut out_shape = vec![xs[0], c_out];
        out_shape.extend(out_ext);
        Ok((
            ConvDims {
                batch: xs[0],
                c_big,
                c_small,
                geom,
            },
            out_shape,
        ))
    }

    /// Strided cross-correlation with zero padding over 2 or 3 spatial axes.
    /// Input `[N, C_in, D..]`, weight `[C_out, C_in, K..]`, bias `[C_out]`.
    pub fn conv_nd(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var, TensorError> {
        let (dims, shape) = self.conv_dims("conv_nd", input, weight, bias, stride, pad, false)?;
        let out = conv::gather(
            self.value(input).data(),
            self.value(weight).data(),
            bias.map(|b| self.value(b).data()),
            dims.batch,
            dims.c_big,
            dims.c_small,
            &dims.geom,
        );
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push_f64(
            shape,
            out,
            Op::Conv {
                input,
                weight,
                bias,
                dims,
            },
            &inputs,
        ))
    }

    /// Transposed convolution; output extent is `input extent × stride`.
    /// Input `[N, C_in, D..]`, weight `[C_in, C_out, K..]`, bias `[C_out]`.
    /// With the same weight this is the adjoint of [`Tape::conv_nd`].
    pub fn conv_transpose_nd(
        &mut self,
        input: Var,
        weight: Var,
        bias: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var, TensorError> {
        let (dims, shape) = self.conv_dims("conv_transpose_nd", input, weight, bias, stride, pad, true)?;
        let mut out = conv::scatter(
            self.value(input).data(),
            self.value(weight).data(),
            dims.batch,
            dims.c_big,
            dims.c_small,
            &dims.geom,
        );
        if let Some(b) = bias {
            let b: Vec<f64> = self.value(b).data().iter().map(|v| v.as_f64()).collect();
            conv::add_channel_bias(&mut out, &b, dims.batch, dims.geom.big_len());
        }
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push_f64(
            shape,
            out,
            Op::ConvTranspose {
                input,
                weight,
                bias,
                dims,
            },
            &inputs,
        ))
    }

    /// Per-channel normalization over batch and spatial axes.
    pub fn batch_norm(
        &mut self,
        input: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode,
        state: &mut BatchNormState,
    ) -> Result<Var, TensorError> {
        let shape = self.shape(input).to_vec();
        let dims = BnShape::of(&shape)?;
        for (name, v) in [("gamma", gamma), ("beta", beta)] {
            if self.shape(v) != [dims.channels] {
                return Err(contract(
                    "batch_norm",
                    format!("{name} {:?}, expected [{}]", self.shape(v), dims.channels),
                ));
            }
        }
        if state.channels() != dims.channels {
            return Err(contract(
                "batch_norm",
                format!("state has {} channels, input {}", state.channels(), dims.channels),
            ));
        }
        let (out, saved) = norm::forward(
            self.value(input).data(),
            self.value(gamma).data(),
            self.value(beta).data(),
            &dims,
            mode,
            state,
        )?;
        Ok(self.push(
            shape,
            out,
            Op::BatchNorm {
                input,
                gamma,
                beta,
                saved,
            },
            &[input, gamma, beta],
        ))
    }

    pub fn activation(&mut self, input: Var, kind: Activation) -> Var {
        let x = self.value(input);
        let shape = x.shape().to_vec();
        let out = x.data().iter().map(|v| kind.apply(v.as_f64())).collect();
        self.push_f64(shape, out, Op::Act { input, kind }, &[input])
    }

    pub fn relu(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Relu)
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Tanh)
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.activation(input, Activation::Sigmoid)
    }

    /// `y = x Wᵀ + b` for `x: [N, F_in]`, `W: [F_out, F_in]`, `b: [F_out]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Option<Var>) -> Result<Var, TensorError> {
        let xs = self.shape(input);
        let ws = self.shape(weight);
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(contract("linear", format!("input {xs:?} vs weight {ws:?}")));
        }
        let (n, f_in, f_out) = (xs[0], xs[1], ws[0]);
        if let Some(b) = bias {
            if self.shape(b) != [f_out] {
                return Err(contract("linear", format!("bias {:?}, expected [{f_out}]", self.shape(b))));
            }
        }
        let x = self.value(input).data();
        let w = self.value(weight).data();
        let b = bias.map(|b| self.value(b).data());
        let mut out = vec![0.0; n * f_out];
        if let Some(b) = b {
            for row in out.chunks_exact_mut(f_out) {
                row.iter_mut().zip(b).for_each(|(o, bv)| *o = bv.as_f64());
            }
        }
        let (x, w) = (f64s(x), f64s(w));
        gemm_acc(Mat::new(&x, n, f_in), Mat::new(&w, f_out, f_in).t(), &mut out);
        let mut inputs = vec![input, weight];
        inputs.extend(bias);
        Ok(self.push_f64(vec![n, f_out], out, Op::Linear { input, weight, bias }, &inputs))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(contract(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(sa.to_vec())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let shape = self.shape(a).to_vec();
        let out = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(x.as_f64(), y.as_f64()))
            .collect();
        self.push_f64(shape, out, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// `x[n, j] · row[j]` for `x: [N, H]`, `row: [H]`.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Result<Var, TensorError> {
        let xs = self.shape(x);
        let rs = self.shape(row);
        if xs.len() != 2 || rs != [xs[1]] {
            return Err(contract("mul_row", format!("{xs:?} vs row {rs:?}")));
        }
        let shape = xs.to_vec();
        let h = shape[1];
        let r = self.value(row).data();
        let out = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v.as_f64() * r[i % h].as_f64())
            .collect();
        Ok(self.push_f64(shape, out, Op::MulRow { x, row }, &[x, row]))
    }

    /// `scale · x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self
            .value(x)
            .data()
            .iter()
            .map(|v| scale * v.as_f64() + shift)
            .collect();
        self.push_f64(shape, out, Op::Affine { x, scale }, &[x])
    }

    pub fn scale(&mut self, x: Var, scale: f64) -> Var {
        self.affine(x, scale, 0.0)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let v = self.value(x);
        let numel: usize = shape.iter().product();
        if numel != v.numel() || shape.contains(&0) {
            return Err(contract("reshape", format!("cannot view {:?} as {shape:?}", v.shape())));
        }
        let data = v.data().to_vec();
        Ok(self.push(shape.to_vec(), data, Op::Reshape(x), &[x]))
    }

    /// `ln(clamp(x, lo, hi))`; the gradient is zero where the clamp is active.
    pub fn log_clamped(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let shape = self.shape(x).to_vec();
        let out = self
            .value(x)
            .data()
            .iter()
            .map(|v| v.as_f64().clamp(lo, hi).ln())
            .collect();
        self.push_f64(shape, out, Op::Log { x, lo, hi }, &[x])
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().map(|v| v.as_f64()).sum::<f64>();
        self.push_f64(Vec::new(), vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let s = v.data().iter().map(|v| v.as_f64()).sum::<f64>() / v.numel() as f64;
        self.push_f64(Vec::new(), vec![s], Op::Mean(x), &[x])
    }

    /// Concatenates along axis 0; trailing extents must agree.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts
            .first()
            .ok_or_else(|| contract("concat_rows", "no inputs".into()))?;
        let tail = self.shape(first)[1..].to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[1..] != tail[..] {
                return Err(contract("concat_rows", format!("{s:?} vs trailing {tail:?}")));
            }
            rows += s[0];
            data.extend_from_slice(self.value(p).data());
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        Ok(self.push(shape, data, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Rows `start..start + len` along axis 0.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let s = self.shape(x);
        if s.is_empty() || len == 0 || start + len > s[0] {
            return Err(contract("slice_rows", format!("rows {start}..{} of {s:?}", start + len)));
        }
        let row: usize = s[1..].iter().product();
        let mut shape = s.to_vec();
        shape[0] = len;
        let data = self.value(x).data()[start * row..(start + len) * row].to_vec();
        Ok(self.push(
            shape,
            data,
            Op::SliceRows {
                x,
                offset: start * row,
            },
            &[x],
        ))
    }

    /// Mean Bernoulli log-likelihood `(1/N) Σ t ln p + (1 − t) ln(1 − p)` with
    /// `p` clamped to `[lo, 1 − lo]`. Both inputs must lie in `[0, 1]`.
    pub fn log_likelihood(&mut self, pred: Var, target: Var, lo: f64) -> Result<Var, TensorError> {
        self.same_shape("log_likelihood", pred, target)?;
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let in_unit = |v: &T| (0.0..=1.0).contains(&v.as_f64());
        if !p.iter().all(in_unit) || !t.iter().all(in_unit) {
            return Err(contract("log_likelihood", "probabilities outside [0, 1]".into()));
        }
        let n = p.len() as f64;
        let s = p
            .iter()
            .zip(t)
            .map(|(p, t)| {
                let p = p.as_f64().clamp(lo, 1.0 - lo);
                let t = t.as_f64();
                t * p.ln() + (1.0 - t) * (1.0 - p).ln()
            })
            .sum::<f64>();
        Ok(self.push_f64(Vec::new(), vec![s / n], Op::LogLikelihood { pred, target, lo }, &[pred, target]))
    }

    /// Mean absolute difference.
    pub fn l1_mean(&mut self, pred: Var, target: Var) -> Result<Var, TensorError> {
        self.same_shape("l1_mean", pred, target)?;
        let p = self.value(pred).data();
        let t = self.value(target).data();
        let s = p
            .iter()
            .zip(t)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .sum::<f64>();
        let n = p.len() as f64;
        Ok(self.push_f64(Vec::new(), vec![s / n], Op::L1Mean { pred, target }, &[pred, target]))
    }

    /// Reverse pass from a scalar `loss`. Consumes the tape.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>, TensorError> {
        let loss_numel = self.value(loss).numel();
        if loss_numel != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape(loss).to_vec(),
            });
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.op, Op::Leaf) || !node.value.requires_grad() {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.backward_node(node, &g, &mut grads);
        }

        let leaves = self
            .nodes
            .into_iter()
            .zip(grads)
            .map(|(node, g)| match node.op {
                Op::Leaf if node.value.requires_grad() => {
                    let mut t = node.value;
                    let g = g.unwrap_or_else(|| vec![0.0; t.numel()]);
                    t.set_grad(g.into_iter().map(T::from_f64).collect())
                        .expect("gradient matches leaf shape");
                    Some(t)
                }
                _ => None,
            })
            .collect();
        Ok(Gradients { leaves })
    }

    fn backward_node(&self, node: &Node<T>, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, delta: Vec<f64>| {
            if !self.needs(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.iter_mut().zip(&delta).for_each(|(e, d)| *e += d),
                slot @ None => *slot = Some(delta),
            }
        };
        let data = |v: Var| self.value(v).data();
        let y = node.value.data();

        match &node.op {
            Op::Leaf => {}
            Op::Conv {
                input,
                weight,
                bias,
                dims,
            } => {
                let ConvDims {
                    batch,
                    c_big,
                    c_small,
                    geom,
                } = *dims;
                if self.needs(*input) {
                    acc(*input, conv::scatter(g, data(*weight), batch, c_big, c_small, &geom));
                }
                if self.needs(*weight) {
                    acc(*weight, conv::weight_grad(data(*input), g, batch, c_big, c_small, &geom));
                }
                if let Some(b) = bias {
                    acc(*b, conv::channel_sums(g, batch, c_small, geom.small_len()));
                }
            }
            Op::ConvTranspose {
                input,
                weight,
                bias,
                dims,
            } => {
                let ConvDims {
                    batch,
                    c_big,
                    c_small,
                    geom,
                } = *dims;
                if self.needs(*input) {
                    acc(
                        *input,
                        conv::gather::<f64, T>(g, data(*weight), None, batch, c_big, c_small, &geom),
                    );
                }
                if self.needs(*weight) {
                    acc(*weight, conv::weight_grad(g, data(*input), batch, c_big, c_small, &geom));
                }
                if let Some(b) = bias {
                    acc(*b, conv::channel_sums(g, batch, c_big, geom.big_len()));
                }
            }
            Op::BatchNorm {
                input,
                gamma,
                beta,
                saved,
            } => {
                let dims = BnShape::of(node.value.shape()).expect("validated in forward");
                let (dx, dgamma, dbeta) = norm::backward(g, data(*gamma), &dims, saved);
                acc(*input, dx);
                acc(*gamma, dgamma);
                acc(*beta, dbeta);
            }
            Op::Act { input, kind } => {
                let dx = g
                    .iter()
                    .zip(y)
                    .map(|(g, y)| g * kind.slope(y.as_f64()))
                    .collect();
                acc(*input, dx);
            }
            Op::Linear { input, weight, bias } => {
                let x = data(*input);
                let w = data(*weight);
                let f_in = self.shape(*input)[1];
                let f_out = self.shape(*weight)[0];
                let n = x.len() / f_in;
                if self.needs(*input) {
                    let mut dx = vec![0.0f64; x.len()];
                    gemm_acc(Mat::new(g, n, f_out), Mat::new(&f64s(w), f_out, f_in), &mut dx);
                    acc(*input, dx);
                }
                if self.needs(*weight) {
                    let mut dw = vec![0.0f64; w.len()];
                    gemm_acc(Mat::new(g, n, f_out).t(), Mat::new(&f64s(x), n, f_in), &mut dw);
                    acc(*weight, dw);
                }
                if let Some(b) = bias {
                    let mut db = vec![0.0f64; f_out];
                    for g_row in g.chunks_exact(f_out) {
                        db.iter_mut().zip(g_row).for_each(|(d, gv)| *d += gv);
                    }
                    acc(*b, db);
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (xa, xb) = (data(*a), data(*b));
                acc(*a, g.iter().zip(xb).map(|(g, v)| g * v.as_f64()).collect());
                acc(*b, g.iter().zip(xa).map(|(g, v)| g * v.as_f64()).collect());
            }
            Op::MulRow { x, row } => {
                let xv = data(*x);
                let r = data(*row);
                let h = r.len();
                acc(*x, g.iter().enumerate().map(|(i, g)| g * r[i % h].as_f64()).collect());
                let mut dr = vec![0.0f64; h];
                for (i, gv) in g.iter().enumerate() {
                    dr[i % h] += gv * xv[i].as_f64();
                }
                acc(*row, dr);
            }
            Op::Affine { x, scale } => acc(*x, g.iter().map(|v| v * scale).collect()),
            Op::Reshape(x) => acc(*x, g.to_vec()),
            Op::Log { x, lo, hi } => {
                let dx = g
                    .iter()
                    .zip(data(*x))
                    .map(|(g, v)| {
                        let v = v.as_f64();
                        if v < *lo || v > *hi {
                            0.0
                        } else {
                            g / v
                        }
                    })
                    .collect();
                acc(*x, dx);
            }
            Op::Sum(x) => {
                let n = self.value(*x).numel();
                acc(*x, vec![g[0]; n]);
            }
            Op::Mean(x) => {
                let n = self.value(*x).numel();
                acc(*x, vec![g[0] / n as f64; n]);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).numel();
                    acc(p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::SliceRows { x, offset } => {
                if self.needs(*x) {
                    let mut dx = vec![0.0f64; self.value(*x).numel()];
                    dx[*offset..*offset + g.len()].copy_from_slice(g);
                    acc(*x, dx);
                }
            }
            Op::LogLikelihood { pred, target, lo } => {
                let p = data(*pred);
                let t = data(*target);
                let n = p.len() as f64;
                let scale = g[0] / n;
                if self.needs(*pred) {
                    let dp = p
                        .iter()
                        .zip(t)
                        .map(|(p, t)| {
                            let p = p.as_f64();
                            if p < *lo || p > 1.0 - lo {
                                return 0.0;
                            }
                            let t = t.as_f64();
                            scale * (t / p - (1.0 - t) / (1.0 - p))
                        })
                        .collect();
                    acc(*pred, dp);
                }
                if self.needs(*target) {
                    let dt = p
                        .iter()
                        .map(|p| {
                            let p = p.as_f64().clamp(*lo, 1.0 - lo);
                            scale * (p.ln() - (1.0 - p).ln())
                        })
                        .collect();
                    acc(*target, dt);
                }
            }
            Op::L1Mean { pred, target } => {
                let p = data(*pred);
                let t = data(*target);
                let scale = g[0] / p.len() as f64;
                let signs: Vec<f64> = p
                    .iter()
                    .zip(t)
                    .map(|(a, b)| {
                        let d = a.as_f64() - b.as_f64();
                        if d > 0.0 {
                            scale
                        } else if d < 0.0 {
                            -scale
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if self.needs(*target) {
                    acc(*target, signs.iter().map(|v| -v).collect());
                }
                acc(*pred, signs);
            }
        }
    }
}

fn f64s<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}
