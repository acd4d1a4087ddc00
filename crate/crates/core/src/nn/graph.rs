//! Tape-based reverse-mode differentiation over tensors.
//!
//! Every op appends a node holding its output value; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into every node
//! that (transitively) depends on a trainable leaf.

use super::conv::{self, ConvGeom};
use super::params::{ParamId, ParamStore};
use super::sigmoid;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

#[derive(Debug, Clone)]
pub(crate) enum Op<T> {
    Leaf,
    Conv1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    /// Transposed convolution; `geom` is the forward conv it is the adjoint of
    /// (its `len_in`/`c_in` describe this op's output).
    ConvTranspose1d { x: Var, w: Var, b: Option<Var>, geom: ConvGeom },
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Relu(Var),
    Gain { x: Var, g: Var },
    MeanTime(Var),
    Reshape(Var),
    Sum(Var),
    Bce { logits: Var, targets: Vec<T> },
    SoftmaxCe { logits: Var, classes: Vec<usize> },
    NtXent { reps: Var, tau: f64 },
    Mse { pred: Var, target: Vec<T> },
}

impl<T> Op<T> {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Conv1d { .. } => "conv1d",
            Op::ConvTranspose1d { .. } => "conv_transpose1d",
            Op::Linear { .. } => "linear",
            Op::Add(..) => "add",
            Op::Relu(_) => "relu",
            Op::Gain { .. } => "gain",
            Op::MeanTime(_) => "global_avg_pool",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::Bce { .. } => "bce_loss",
            Op::SoftmaxCe { .. } => "softmax_ce_loss",
            Op::NtXent { .. } => "ntxent_loss",
            Op::Mse { .. } => "mse_loss",
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Node<T> {
    pub value: Tensor<T>,
    pub op: Op<T>,
    pub needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph<T> {
    pub(crate) nodes: Vec<Node<T>>,
}

/// Leaf variables created for every tensor of a [`ParamStore`], indexed by
/// [`ParamId`].
#[derive(Debug, Clone)]
pub struct Binding {
    vars: Vec<Var>,
}

impl Binding {
    pub fn var(&self, id: ParamId) -> Var {
        self.vars[id.0]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradients aligned with the store the binding was made from; frozen
    /// parameters yield `None`.
    pub fn collect(&mut self, binding: &Binding) -> Vec<Option<Tensor<T>>> {
        binding.vars.iter().map(|v| self.grads.get_mut(v.0).and_then(Option::take)).collect()
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Which inputs of every ReLU recorded so far are positive, in
    /// recording order. Two passes with equal patterns lie on the same
    /// linear piece of the network.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(x) => Some(self.value(x).data().iter().map(|&v| v > T::zero())),
                _ => None,
            })
            .flatten()
            .collect()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn input(&mut self, t: Tensor<T>, requires_grad: bool) -> Var {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub fn bind(&mut self, store: &ParamStore<T>) -> Binding {
        let vars = store
            .iter()
            .map(|(_, t, trainable)| self.input(t.clone(), trainable))
            .collect();
        Binding { vars }
    }

    /// Binds every parameter as a constant.
    pub fn bind_frozen(&mut self, store: &ParamStore<T>) -> Binding {
        let vars = store.iter().map(|(_, t, _)| self.input(t.clone(), false)).collect();
        Binding { vars }
    }

    pub fn conv1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        groups: usize,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || stride == 0 || groups == 0 {
            return Err(Error::ShapeMismatch(format!("conv1d input {xs:?}, weight {ws:?}")));
        }
        let (c_out, kernel) = (ws[0], ws[2]);
        if !xs[1].is_multiple_of(groups) || c_out % groups != 0 || ws[1] * groups != xs[1] {
            return Err(Error::ShapeMismatch(format!(
                "conv1d: input channels {} / weight {ws:?} / groups {groups}",
                xs[1]
            )));
        }
        if xs[2] + 2 * pad < kernel {
            return Err(Error::ShapeMismatch(format!("conv1d: length {} shorter than kernel", xs[2])));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(Error::ShapeMismatch("conv1d bias".into()));
            }
        }
        let geom = ConvGeom {
            batch: xs[0],
            c_in: xs[1],
            c_out,
            len_in: xs[2],
            len_out: conv::conv_len(xs[2], kernel, stride, pad),
            kernel,
            stride,
            pad,
            groups,
        };
        let mut y = conv::conv_forward(self.value(x).data(), self.value(w).data(), &geom);
        if let Some(b) = b {
            conv::add_channel_bias(&mut y, self.value(b).data(), geom.batch, geom.len_out);
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        let value = Tensor::new([geom.batch, c_out, geom.len_out], y)?;
        Ok(self.push(value, Op::Conv1d { x, w, b, geom }, ng))
    }

    /// Transposed convolution with weight `[c_in, c_out, kernel]`; output
    /// length `(L - 1) * stride - 2 * pad + kernel + out_pad`.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
        out_pad: usize,
    ) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 3 || ws.len() != 3 || ws[0] != xs[1] || out_pad >= stride.max(1) {
            return Err(Error::ShapeMismatch(format!(
                "conv_transpose1d input {xs:?}, weight {ws:?}, out_pad {out_pad}"
            )));
        }
        let (c_out, kernel) = (ws[1], ws[2]);
        let len_out = ((xs[2] - 1) * stride + kernel + out_pad)
            .checked_sub(2 * pad)
            .ok_or_else(|| Error::ShapeMismatch("conv_transpose1d: negative length".into()))?;
        let geom = ConvGeom {
            batch: xs[0],
            c_in: c_out,
            c_out: xs[1],
            len_in: len_out,
            len_out: xs[2],
            kernel,
            stride,
            pad,
            groups: 1,
        };
        debug_assert_eq!(conv::conv_len(len_out, kernel, stride, pad), xs[2]);
        let mut y = conv::conv_backward_data(self.value(x).data(), self.value(w).data(), &geom);
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(Error::ShapeMismatch("conv_transpose1d bias".into()));
            }
            conv::add_channel_bias(&mut y, self.value(b).data(), geom.batch, len_out);
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        let value = Tensor::new([geom.batch, c_out, len_out], y)?;
        Ok(self.push(value, Op::ConvTranspose1d { x, w, b, geom }, ng))
    }

    /// `x [B, D] * w[K, D]^T + b[K]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let xs = self.value(x).shape().to_vec();
        let ws = self.value(w).shape().to_vec();
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(Error::ShapeMismatch(format!("linear input {xs:?}, weight {ws:?}")));
        }
        let (batch, k) = (xs[0], ws[0]);
        let mut y = vec![T::zero(); batch * k];
        T::gemm(false, true, batch, k, xs[1], T::one(), self.value(x).data(), self.value(w).data(), T::zero(), &mut y);
        if let Some(b) = b {
            let bv = self.value(b).data();
            if bv.len() != k {
                return Err(Error::ShapeMismatch("linear bias".into()));
            }
            for row in y.chunks_mut(k) {
                for (v, &bb) in row.iter_mut().zip(bv) {
                    *v += bb;
                }
            }
        }
        let ng = self.ng(x) || self.ng(w) || b.is_some_and(|b| self.ng(b));
        let value = Tensor::new([batch, k], y)?;
        Ok(self.push(value, Op::Linear { x, w, b }, ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::ShapeMismatch(format!(
                "add {:?} + {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let mut v = self.value(a).clone();
        v.add_assign(self.value(b));
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let v = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        let ng = self.ng(x);
        self.push(v, Op::Relu(x), ng)
    }

    /// Multiplies by a learnable scalar `g` (shape `[1]`).
    pub fn gain(&mut self, x: Var, g: Var) -> Result<Var> {
        if self.value(g).len() != 1 {
            return Err(Error::ShapeMismatch("gain must be a scalar".into()));
        }
        let gv = self.value(g).data()[0];
        let v = self.value(x).map(|v| v * gv);
        let ng = self.ng(x) || self.ng(g);
        Ok(self.push(v, Op::Gain { x, g }, ng))
    }

    /// Global average pooling `[B, C, L] -> [B, C]`.
    pub fn mean_time(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).shape().to_vec();
        if s.len() != 3 || s[2] == 0 {
            return Err(Error::ShapeMismatch(format!("mean_time on {s:?}")));
        }
        let len = s[2];
        let data = self
            .value(x)
            .data()
            .chunks(len)
            .map(|c| T::lit(c.iter().map(|v| v.f64()).sum::<f64>() / len as f64))
            .collect();
        let ng = self.ng(x);
        let value = Tensor::new([s[0], s[1]], data)?;
        Ok(self.push(value, Op::MeanTime(x), ng))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let v = self.value(x).clone().reshape(shape.to_vec())?;
        let ng = self.ng(x);
        Ok(self.push(v, Op::Reshape(x), ng))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let v = Tensor::scalar(T::lit(self.value(x).sum_f64()));
        let ng = self.ng(x);
        self.push(v, Op::Sum(x), ng)
    }

    /// Mean over batch and outputs of the logistic loss, in the stable
    /// `max(l, 0) - l t + ln(1 + e^{-|l|})` form.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[T]) -> Result<Var> {
        let l = self.value(logits);
        if l.len() != targets.len() || l.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "bce: {} logits, {} targets",
                l.len(),
                targets.len()
            )));
        }
        if targets.iter().any(|&t| t != T::zero() && t != T::one()) {
            return Err(Error::InvalidParameter("bce targets must be 0 or 1".into()));
        }
        let n = l.len() as f64;
        let loss: f64 = l
            .data()
            .iter()
            .zip(targets)
            .map(|(&l, &t)| {
                let (l, t) = (l.f64(), t.f64());
                l.max(0.0) - l * t + (-l.abs()).exp().ln_1p()
            })
            .sum::<f64>()
            / n;
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(T::lit(loss)),
            Op::Bce { logits, targets: targets.to_vec() },
            ng,
        ))
    }

    /// Mean softmax cross-entropy of `logits [B, K]` against class indices.
    pub fn softmax_ce(&mut self, logits: Var, classes: &[usize]) -> Result<Var> {
        let l = self.value(logits);
        let s = l.shape();
        if s.len() != 2 || s[0] != classes.len() || classes.iter().any(|&c| c >= s[1]) {
            return Err(Error::ShapeMismatch(format!("softmax_ce logits {s:?}")));
        }
        let loss = l
            .data()
            .chunks(s[1])
            .zip(classes)
            .map(|(row, &c)| log_sum_exp(row) - row[c].f64())
            .sum::<f64>()
            / classes.len() as f64;
        let ng = self.ng(logits);
        Ok(self.push(
            Tensor::scalar(T::lit(loss)),
            Op::SoftmaxCe { logits, classes: classes.to_vec() },
            ng,
        ))
    }

    /// NT-Xent over `reps [2N, d]`; row `i` and row `(i + N) mod 2N` are
    /// positives, every other row is a negative. Mean over the `2N` anchors.
    pub fn ntxent(&mut self, reps: Var, tau: f64) -> Result<Var> {
        let r = self.value(reps);
        let s = r.shape();
        if s.len() != 2 || s[0] < 2 || !s[0].is_multiple_of(2) {
            return Err(Error::ShapeMismatch(format!("ntxent needs [2N, d], got {s:?}")));
        }
        if !(tau > 0.0) {
            return Err(Error::InvalidParameter("ntxent temperature must be positive".into()));
        }
        let sim = ntxent_sim(r)?.1;
        let m = s[0];
        let loss = (0..m)
            .map(|i| {
                let row: Vec<f64> = (0..m).filter(|&k| k != i).map(|k| sim[i * m + k] / tau).collect();
                lse(&row) - sim[i * m + partner(i, m)] / tau
            })
            .sum::<f64>()
            / m as f64;
        let ng = self.ng(reps);
        Ok(self.push(Tensor::scalar(T::lit(loss)), Op::NtXent { reps, tau }, ng))
    }

    /// Mean squared error against a constant target.
    pub fn mse(&mut self, pred: Var, target: &[T]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() || p.is_empty() {
            return Err(Error::ShapeMismatch("mse target size".into()));
        }
        let loss = p
            .data()
            .iter()
            .zip(target)
            .map(|(&a, &b)| (a.f64() - b.f64()).powi(2))
            .sum::<f64>()
            / p.len() as f64;
        let ng = self.ng(pred);
        Ok(self.push(Tensor::scalar(T::lit(loss)), Op::Mse { pred, target: target.to_vec() }, ng))
    }

    /// Reverse sweep seeded with ones at `root`.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        if root.0 >= self.nodes.len() {
            return Err(Error::NoForwardGraph);
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        let shape = self.value(root).shape().to_vec();
        grads[root.0] = Some(Tensor::full(shape, T::one()));

        for i in (0..=root.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(gy) = grads[i].take() else { continue };
            self.backprop_node(node, &gy, &mut grads)?;
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor<T>>], v: Var, g: Tensor<T>) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn backprop_node(&self, node: &Node<T>, gy: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let g0 = gy.data()[0];
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                if self.ng(*w) {
                    let dw = conv::conv_backward_weight(self.value(*x).data(), gy.data(), geom);
                    self.accumulate(grads, *w, Tensor::new(self.value(*w).shape(), dw)?);
                }
                if let Some(b) = b {
                    if self.ng(*b) {
                        let db = conv::channel_sums(gy.data(), geom.batch, geom.c_out, geom.len_out);
                        self.accumulate(grads, *b, Tensor::new([geom.c_out], db)?);
                    }
                }
                if self.ng(*x) {
                    let dx = conv::conv_backward_data(gy.data(), self.value(*w).data(), geom);
                    self.accumulate(grads, *x, Tensor::new(self.value(*x).shape(), dx)?);
                }
            }
            Op::ConvTranspose1d { x, w, b, geom } => {
                // y = conv^T(x)  =>  dx = conv(gy), dw = conv_weight_grad(gy, x)
                if self.ng(*w) {
                    let dw = conv::conv_backward_weight(gy.data(), self.value(*x).data(), geom);
                    self.accumulate(grads, *w, Tensor::new(self.value(*w).shape(), dw)?);
                }
                if let Some(b) = b {
                    if self.ng(*b) {
                        let db = conv::channel_sums(gy.data(), geom.batch, geom.c_in, geom.len_in);
                        self.accumulate(grads, *b, Tensor::new([geom.c_in], db)?);
                    }
                }
                if self.ng(*x) {
                    let dx = conv::conv_forward(gy.data(), self.value(*w).data(), geom);
                    self.accumulate(grads, *x, Tensor::new(self.value(*x).shape(), dx)?);
                }
            }
            Op::Linear { x, w, b } => {
                let (batch, d) = (self.value(*x).dim(0), self.value(*x).dim(1));
                let k = self.value(*w).dim(0);
                if self.ng(*x) {
                    let mut dx = vec![T::zero(); batch * d];
                    T::gemm(false, false, batch, d, k, T::one(), gy.data(), self.value(*w).data(), T::zero(), &mut dx);
                    self.accumulate(grads, *x, Tensor::new([batch, d], dx)?);
                }
                if self.ng(*w) {
                    let mut dw = vec![T::zero(); k * d];
                    T::gemm(true, false, k, d, batch, T::one(), gy.data(), self.value(*x).data(), T::zero(), &mut dw);
                    self.accumulate(grads, *w, Tensor::new([k, d], dw)?);
                }
                if let Some(b) = b {
                    if self.ng(*b) {
                        let db = conv::channel_sums(gy.data(), batch, k, 1);
                        self.accumulate(grads, *b, Tensor::new([k], db)?);
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, gy.clone());
                self.accumulate(grads, *b, gy.clone());
            }
            Op::Relu(x) => {
                let y = &node.value;
                let mut dx = gy.clone();
                for (d, &yv) in dx.data_mut().iter_mut().zip(y.data()) {
                    if yv <= T::zero() {
                        *d = T::zero();
                    }
                }
                self.accumulate(grads, *x, dx);
            }
            Op::Gain { x, g } => {
                let gv = self.value(*g).data()[0];
                if self.ng(*g) {
                    let dg: f64 = gy.data().iter().zip(self.value(*x).data()).map(|(a, b)| a.f64() * b.f64()).sum();
                    self.accumulate(grads, *g, Tensor::scalar(T::lit(dg)));
                }
                if self.ng(*x) {
                    self.accumulate(grads, *x, gy.map(|v| v * gv));
                }
            }
            Op::MeanTime(x) => {
                let s = self.value(*x).shape();
                let len = s[2];
                let scale = T::lit(1.0 / len as f64);
                let dx: Vec<T> = gy.data().iter().flat_map(|&g| std::iter::repeat_n(g * scale, len)).collect();
                self.accumulate(grads, *x, Tensor::new(s, dx)?);
            }
            Op::Reshape(x) => {
                let dx = gy.clone().reshape(self.value(*x).shape().to_vec())?;
                self.accumulate(grads, *x, dx);
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, Tensor::full(self.value(*x).shape(), g0));
            }
            Op::Bce { logits, targets } => {
                let l = self.value(*logits);
                let scale = g0.f64() / l.len() as f64;
                let d = l.data().iter().zip(targets).map(|(&l, &t)| T::lit((sigmoid(l.f64()) - t.f64()) * scale)).collect();
                self.accumulate(grads, *logits, Tensor::new(l.shape(), d)?);
            }
            Op::SoftmaxCe { logits, classes } => {
                let l = self.value(*logits);
                let k = l.dim(1);
                let scale = g0.f64() / classes.len() as f64;
                let mut d = Vec::with_capacity(l.len());
                for (row, &c) in l.data().chunks(k).zip(classes) {
                    let z = log_sum_exp(row);
                    for (j, &v) in row.iter().enumerate() {
                        let p = (v.f64() - z).exp();
                        d.push(T::lit((p - (j == c) as u8 as f64) * scale));
                    }
                }
                self.accumulate(grads, *logits, Tensor::new(l.shape(), d)?);
            }
            Op::NtXent { reps, tau } => {
                let r = self.value(*reps);
                let d = ntxent_grad(r, *tau, g0.f64())?;
                self.accumulate(grads, *reps, d);
            }
            Op::Mse { pred, target } => {
                let p = self.value(*pred);
                let scale = 2.0 * g0.f64() / p.len() as f64;
                let d = p.data().iter().zip(target).map(|(&a, &b)| T::lit((a.f64() - b.f64()) * scale)).collect();
                self.accumulate(grads, *pred, Tensor::new(p.shape(), d)?);
            }
        }
        Ok(())
    }
}

fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn log_sum_exp<T: Real>(row: &[T]) -> f64 {
    let v: Vec<f64> = row.iter().map(|x| x.f64()).collect();
    lse(&v)
}

fn partner(i: usize, m: usize) -> usize {
    (i + m / 2) % m
}

/// Unit rows, flattened cosine-similarity matrix, row norms.
type Similarity = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

/// Unit-normalized rows and their cosine-similarity matrix.
fn ntxent_sim<T: Real>(r: &Tensor<T>) -> Result<Similarity> {
    let (m, d) = (r.dim(0), r.dim(1));
    let mut units = Vec::with_capacity(m);
    let mut norms = Vec::with_capacity(m);
    for i in 0..m {
        let row: Vec<f64> = r.row(i).iter().map(|v| v.f64()).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::Numeric(format!("ntxent: representation row {i} has zero norm")));
        }
        units.push(row.iter().map(|v| v / norm).collect::<Vec<_>>());
        norms.push(norm);
    }
    let mut sim = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            sim[i * m + j] = (0..d).map(|k| units[i][k] * units[j][k]).sum();
        }
    }
    Ok((units, sim, norms))
}

fn ntxent_grad<T: Real>(r: &Tensor<T>, tau: f64, upstream: f64) -> Result<Tensor<T>> {
    let (m, d) = (r.dim(0), r.dim(1));
    let (units, sim, norms) = ntxent_sim(r)?;
    // G[i][j] = dL/ds_ij with s_ij = sim_ij / tau.
    let mut gmat = vec![0.0; m * m];
    for i in 0..m {
        let logits: Vec<f64> = (0..m).map(|k| if k == i { f64::NEG_INFINITY } else { sim[i * m + k] / tau }).collect();
        let z = lse(&logits);
        for k in 0..m {
            if k != i {
                gmat[i * m + k] = (logits[k] - z).exp() / m as f64;
            }
        }
        gmat[i * m + partner(i, m)] -= 1.0 / m as f64;
    }
    let mut out = Vec::with_capacity(m * d);
    for i in 0..m {
        // dL/du_i = sum_j (G_ij + G_ji) u_j / tau
        let mut du = vec![0.0; d];
        for j in 0..m {
            let c = (gmat[i * m + j] + gmat[j * m + i]) / tau;
            if c != 0.0 {
                for (a, b) in du.iter_mut().zip(&units[j]) {
                    *a += c * b;
                }
            }
        }
        // Through u = z / |z|: (I - u u^T) du / |z|
        let proj: f64 = du.iter().zip(&units[i]).map(|(a, b)| a * b).sum();
        out.extend(du.iter().zip(&units[i]).map(|(a, u)| T::lit(upstream * (a - proj * u) / norms[i])));
    }
    Tensor::new([m, d], out)
}
