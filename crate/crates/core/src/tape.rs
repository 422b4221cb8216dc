//! Reverse-mode differentiation over a recorded tape of matrix operations.
//!
//! Operations are appended in execution order, so the node list is already
//! topologically sorted and backpropagation walks it in reverse. Only the
//! operations the models need are supported; there is no broadcasting.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;

use crate::csr::CsrMat;
use crate::dense::DenseMat;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sparse::{spmm, spmm_transpose, SparseAdj};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OpKind {
    Leaf,
    MatMul,
    SparseMatMul,
    SpMM,
    Hadamard,
    Add,
    Concat,
    LeakyRelu,
    Dropout,
    BatchNorm,
    SoftmaxCrossEntropy,
    Sum,
}

impl OpKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "matmul" => Self::MatMul,
            "sparse_matmul" => Self::SparseMatMul,
            "spmm" => Self::SpMM,
            "hadamard" => Self::Hadamard,
            "add" => Self::Add,
            "concat" => Self::Concat,
            "leaky_relu" => Self::LeakyRelu,
            "dropout" => Self::Dropout,
            "batch_norm" => Self::BatchNorm,
            "softmax_cross_entropy" => Self::SoftmaxCrossEntropy,
            "sum" => Self::Sum,
            _ => return None,
        })
    }
}

/// Running statistics of one batch-norm layer, updated in training mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T = f64> {
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(width: usize) -> Self {
        Self {
            running_mean: vec![T::zero(); width],
            running_var: vec![T::one(); width],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchNormOptions {
    pub eps: f64,
    /// Weight of the previous running value: `r ← m·r + (1−m)·batch`.
    pub momentum: f64,
    pub training: bool,
}

impl Default for BatchNormOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            momentum: 0.9,
            training: true,
        }
    }
}

enum Op<'g, T: Clone> {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Cow<'g, CsrMat<T>>, Var),
    SpMM(&'g SparseAdj<T>, Var),
    Hadamard(Var, Var),
    Add(Var, Var),
    Concat {
        parts: Vec<Var>,
        offsets: Vec<usize>,
    },
    LeakyRelu {
        x: Var,
        slope: T,
    },
    Dropout {
        x: Var,
        mask: Vec<T>,
    },
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: DenseMat<T>,
        inv_std: Vec<T>,
        training: bool,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        probs: DenseMat<T>,
        labels: Vec<usize>,
        rows: Vec<usize>,
    },
    Sum(Var),
}

impl<T: Clone> Op<'_, T> {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::SparseMatMul(..) => OpKind::SparseMatMul,
            Op::SpMM(..) => OpKind::SpMM,
            Op::Hadamard(..) => OpKind::Hadamard,
            Op::Add(..) => OpKind::Add,
            Op::Concat { .. } => OpKind::Concat,
            Op::LeakyRelu { .. } => OpKind::LeakyRelu,
            Op::Dropout { .. } => OpKind::Dropout,
            Op::BatchNorm { .. } => OpKind::BatchNorm,
            Op::SoftmaxCrossEntropy { .. } => OpKind::SoftmaxCrossEntropy,
            Op::Sum(..) => OpKind::Sum,
        }
    }
}

struct Node<'g, T: Clone> {
    value: Cow<'g, DenseMat<T>>,
    op: Op<'g, T>,
    requires_grad: bool,
}

pub struct Tape<'g, T: Scalar = f64> {
    nodes: Vec<Node<'g, T>>,
    params: Vec<Var>,
    fault: Option<OpKind>,
}

/// Gradients of the trainable leaves, keyed by their [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients<T: Scalar = f64> {
    grads: BTreeMap<Var, DenseMat<T>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&DenseMat<T>> {
        self.grads.get(&var)
    }

    pub fn take(&mut self, var: Var) -> Option<DenseMat<T>> {
        self.grads.remove(&var)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Var, &DenseMat<T>)> {
        self.grads.iter().map(|(v, g)| (*v, g))
    }
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'g, T: Scalar> Tape<'g, T> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: Vec::new(),
            fault: None,
        }
    }

    /// Perturbs the backward rule of one operation kind. Only used to prove
    /// that the gradient checks catch a wrong derivative.
    #[doc(hidden)]
    pub fn inject_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A trainable leaf; it receives a gradient from [`Tape::backward`].
    pub fn param(&mut self, value: DenseMat<T>) -> Var {
        let v = self.push(Cow::Owned(value), Op::Leaf, true);
        self.params.push(v);
        v
    }

    /// A leaf that never receives a gradient (inputs, fixed operators).
    pub fn constant(&mut self, value: DenseMat<T>) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, false)
    }

    /// A constant borrowed for the lifetime of the tape (no copy).
    pub fn input(&mut self, value: &'g DenseMat<T>) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, false)
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    pub fn value(&self, v: Var) -> &DenseMat<T> {
        &self.nodes[v.0].value
    }

    pub fn op_kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Column offsets of a concatenation's blocks (`parts.len() + 1` entries).
    pub fn concat_offsets(&self, v: Var) -> Option<&[usize]> {
        match &self.nodes[v.0].op {
            Op::Concat { offsets, .. } => Some(offsets),
            _ => None,
        }
    }

    fn push(&mut self, value: Cow<'g, DenseMat<T>>, op: Op<'g, T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: DenseMat<T>, op: Op<'g, T>, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                op: op_name(op.kind()),
            });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(Cow::Owned(value), op, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        self.record(out, Op::MatMul(a, b), &[a, b])
    }

    /// `x · w` for a fixed sparse `x` (typically dropped-out input features).
    pub fn sparse_matmul(&mut self, x: Cow<'g, CsrMat<T>>, w: Var) -> Result<Var> {
        let out = x.matmul(self.value(w))?;
        self.record(out, Op::SparseMatMul(x, w), &[w])
    }

    /// `Â · x` for a fixed sparse operator.
    pub fn spmm(&mut self, adj: &'g SparseAdj<T>, x: Var) -> Result<Var> {
        let out = spmm(adj, self.value(x))?;
        self.record(out, Op::SpMM(adj, x), &[x])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        self.record(out, Op::Hadamard(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        self.record(out, Op::Add(a, b), &[a, b])
    }

    /// Appends the columns of `parts` left to right.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| Error::shape("concat_cols", "no inputs"))?;
        if parts.len() == 1 {
            return Ok(first);
        }
        let rows = self.value(first).rows();
        let mut offsets = vec![0];
        for &p in parts {
            let m = self.value(p);
            if m.rows() != rows {
                return Err(Error::shape(
                    "concat_cols",
                    format!("{} rows vs {rows}", m.rows()),
                ));
            }
            offsets.push(offsets.last().unwrap() + m.cols());
        }
        let width = *offsets.last().unwrap();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = DenseMat::from_vec(rows, width, data)?;
        let parts = parts.to_vec();
        let inputs = parts.clone();
        self.record(out, Op::Concat { parts, offsets }, &inputs)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "leaky relu slope {slope} outside (0, 1)"
            )));
        }
        let s = T::from_f64(slope);
        let out = self
            .value(x)
            .map(|v| if v >= T::zero() { v } else { s * v });
        self.record(out, Op::LeakyRelu { x, slope: s }, &[x])
    }

    /// Inverted dropout. Evaluation mode and a zero rate return `x` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        training: bool,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate {rate} outside [0, 1)"
            )));
        }
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let keep = T::from_f64(1.0 / (1.0 - rate));
        let src = self.value(x);
        let mask: Vec<T> = (0..src.len())
            .map(|_| {
                if rng.gen::<f64>() < rate {
                    T::zero()
                } else {
                    keep
                }
            })
            .collect();
        let data = src
            .as_slice()
            .iter()
            .zip(&mask)
            .map(|(&v, &m)| v * m)
            .collect();
        let out = DenseMat::from_vec(src.rows(), src.cols(), data)?;
        self.record(out, Op::Dropout { x, mask }, &[x])
    }

    /// Per-column batch normalisation over all rows of `x`. `gamma` and
    /// `beta` are `1 x cols`.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        state: &mut BatchNormState<T>,
        opts: BatchNormOptions,
    ) -> Result<Var> {
        let xv = self.value(x);
        let (n, c) = xv.shape();
        if self.value(gamma).shape() != (1, c) || self.value(beta).shape() != (1, c) {
            return Err(Error::shape(
                "batch_norm",
                format!("gamma/beta must be 1x{c}"),
            ));
        }
        if state.running_mean.len() != c || state.running_var.len() != c {
            return Err(Error::shape("batch_norm", "running stats width"));
        }
        if n == 0 {
            return Err(Error::shape("batch_norm", "empty batch"));
        }
        let eps = T::from_f64(opts.eps);
        let (mean, var) = if opts.training {
            let mut mean = vec![T::zero(); c];
            for r in 0..n {
                for (m, &v) in mean.iter_mut().zip(xv.row(r)) {
                    *m += v;
                }
            }
            let inv_n = T::one() / T::from_usize(n);
            mean.iter_mut().for_each(|m| *m *= inv_n);
            let mut var = vec![T::zero(); c];
            for r in 0..n {
                for ((s, &v), &m) in var.iter_mut().zip(xv.row(r)).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            var.iter_mut().for_each(|s| *s *= inv_n);
            (mean, var)
        } else {
            (state.running_mean.clone(), state.running_var.clone())
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let mut xhat = DenseMat::zeros(n, c);
        for r in 0..n {
            for (k, (o, &v)) in xhat.row_mut(r).iter_mut().zip(xv.row(r)).enumerate() {
                *o = (v - mean[k]) * inv_std[k];
            }
        }
        let g = self.value(gamma).as_slice();
        let b = self.value(beta).as_slice();
        let mut out = xhat.clone();
        for r in 0..n {
            for (k, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = g[k] * *o + b[k];
            }
        }
        if opts.training {
            let m = T::from_f64(opts.momentum);
            let unbias = if n > 1 {
                T::from_usize(n) / T::from_usize(n - 1)
            } else {
                T::one()
            };
            for k in 0..c {
                state.running_mean[k] = m * state.running_mean[k] + (T::one() - m) * mean[k];
                state.running_var[k] = m * state.running_var[k] + (T::one() - m) * var[k] * unbias;
            }
        }
        self.record(
            out,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                training: opts.training,
            },
            &[x, gamma, beta],
        )
    }

    /// Mean negative log-likelihood over the rows in `mask`. Returns a 1x1
    /// value.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        mask: &[usize],
    ) -> Result<Var> {
        if mask.is_empty() {
            return Err(Error::EmptyMask("softmax_cross_entropy"));
        }
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for {} rows", labels.len(), lv.rows()),
            ));
        }
        let classes = lv.cols();
        let mut probs = DenseMat::zeros(mask.len(), classes);
        let mut total = T::zero();
        for (i, &r) in mask.iter().enumerate() {
            let label = labels[r];
            if r >= lv.rows() || label >= classes {
                return Err(Error::InvalidArgument(format!(
                    "row {r} / label {label} out of range"
                )));
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut z = T::zero();
            for (p, &v) in probs.row_mut(i).iter_mut().zip(row) {
                *p = (v - max).exp();
                z += *p;
            }
            probs.row_mut(i).iter_mut().for_each(|p| *p = *p / z);
            total += max + z.ln() - row[label];
        }
        let loss = total / T::from_usize(mask.len());
        self.record(
            DenseMat::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: mask.iter().map(|&r| labels[r]).collect(),
                rows: mask.to_vec(),
            },
            &[logits],
        )
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).sum();
        self.record(DenseMat::scalar(s), Op::Sum(x), &[x])
    }

    /// Backpropagates from a 1x1 `output` and returns gradients for every
    /// [`Tape::param`] that the output depends on; unreachable parameters
    /// get zero gradients.
    pub fn backward(&self, output: Var) -> Result<Gradients<T>> {
        if self.value(output).shape() != (1, 1) {
            return Err(Error::shape("backward", "output must be 1x1"));
        }
        let mut grads: Vec<Option<DenseMat<T>>> = (0..=output.0).map(|_| None).collect();
        grads[output.0] = Some(DenseMat::scalar(T::one()));
        let mut result = BTreeMap::new();

        for id in (0..=output.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let kind = node.op.kind();
            let send = |grads: &mut Vec<Option<DenseMat<T>>>,
                        target: Var,
                        contribution: DenseMat<T>|
             -> Result<()> {
                if !self.nodes[target.0].requires_grad {
                    return Ok(());
                }
                let contribution = if self.fault == Some(kind) {
                    contribution.scale(T::from_f64(1.01))
                } else {
                    contribution
                };
                match &mut grads[target.0] {
                    Some(acc) => acc.add_assign(&contribution),
                    slot @ None => {
                        *slot = Some(contribution);
                        Ok(())
                    }
                }
            };
            match &node.op {
                Op::Leaf => {
                    result.insert(Var(id), g);
                }
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        send(&mut grads, *a, g.matmul_nt(self.value(*b))?)?;
                    }
                    if self.nodes[b.0].requires_grad {
                        send(&mut grads, *b, self.value(*a).matmul_tn(&g)?)?;
                    }
                }
                Op::SparseMatMul(x, w) => {
                    send(&mut grads, *w, x.matmul_tn(&g)?)?;
                }
                Op::SpMM(adj, x) => {
                    send(&mut grads, *x, spmm_transpose(adj, &g)?)?;
                }
                Op::Hadamard(a, b) => {
                    if self.nodes[a.0].requires_grad {
                        send(&mut grads, *a, g.hadamard(self.value(*b))?)?;
                    }
                    if self.nodes[b.0].requires_grad {
                        send(&mut grads, *b, g.hadamard(self.value(*a))?)?;
                    }
                }
                Op::Add(a, b) => {
                    send(&mut grads, *a, g.clone())?;
                    send(&mut grads, *b, g)?;
                }
                Op::Concat { parts, offsets } => {
                    for (k, &p) in parts.iter().enumerate() {
                        if self.nodes[p.0].requires_grad {
                            send(&mut grads, p, g.slice_cols(offsets[k], offsets[k + 1]))?;
                        }
                    }
                }
                Op::LeakyRelu { x, slope } => {
                    let xv = self.value(*x);
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(xv.as_slice())
                        .map(|(&gi, &xi)| if xi >= T::zero() { gi } else { gi * *slope })
                        .collect();
                    send(
                        &mut grads,
                        *x,
                        DenseMat::from_vec(g.rows(), g.cols(), data)?,
                    )?;
                }
                Op::Dropout { x, mask } => {
                    let data = g
                        .as_slice()
                        .iter()
                        .zip(mask)
                        .map(|(&gi, &m)| gi * m)
                        .collect();
                    send(
                        &mut grads,
                        *x,
                        DenseMat::from_vec(g.rows(), g.cols(), data)?,
                    )?;
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    training,
                } => {
                    let (n, c) = g.shape();
                    let gam = self.value(*gamma).as_slice();
                    let mut dgamma = vec![T::zero(); c];
                    let mut dbeta = vec![T::zero(); c];
                    for r in 0..n {
                        for k in 0..c {
                            let gi = g.get(r, k);
                            dgamma[k] += gi * xhat.get(r, k);
                            dbeta[k] += gi;
                        }
                    }
                    if self.nodes[x.0].requires_grad {
                        let mut dx = DenseMat::zeros(n, c);
                        if *training {
                            // dxhat = g·γ; dx = inv_std/n · (n·dxhat − Σdxhat − x̂·Σ(dxhat·x̂))
                            let nn = T::from_usize(n);
                            for r in 0..n {
                                for k in 0..c {
                                    let dxhat = g.get(r, k) * gam[k];
                                    let sum1 = dbeta[k] * gam[k];
                                    let sum2 = dgamma[k] * gam[k];
                                    dx.set(
                                        r,
                                        k,
                                        inv_std[k] / nn
                                            * (nn * dxhat - sum1 - xhat.get(r, k) * sum2),
                                    );
                                }
                            }
                        } else {
                            for r in 0..n {
                                for k in 0..c {
                                    dx.set(r, k, g.get(r, k) * gam[k] * inv_std[k]);
                                }
                            }
                        }
                        send(&mut grads, *x, dx)?;
                    }
                    send(&mut grads, *gamma, DenseMat::from_vec(1, c, dgamma)?)?;
                    send(&mut grads, *beta, DenseMat::from_vec(1, c, dbeta)?)?;
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    probs,
                    labels,
                    rows,
                } => {
                    let lv = self.value(*logits);
                    let scale = g.item() / T::from_usize(rows.len());
                    let mut d = DenseMat::zeros(lv.rows(), lv.cols());
                    for (i, (&r, &label)) in rows.iter().zip(labels).enumerate() {
                        for (k, (o, &p)) in d.row_mut(r).iter_mut().zip(probs.row(i)).enumerate() {
                            let onehot = if k == label { T::one() } else { T::zero() };
                            *o += (p - onehot) * scale;
                        }
                    }
                    send(&mut grads, *logits, d)?;
                }
                Op::Sum(x) => {
                    let (r, c) = self.value(*x).shape();
                    send(&mut grads, *x, DenseMat::filled(r, c, g.item()))?;
                }
            }
        }
        for &p in &self.params {
            if p.0 <= output.0 {
                result.entry(p).or_insert_with(|| {
                    let (r, c) = self.value(p).shape();
                    DenseMat::zeros(r, c)
                });
            } else {
                let (r, c) = self.value(p).shape();
                result.insert(p, DenseMat::zeros(r, c));
            }
        }
        for g in result.values() {
            if !g.is_finite() {
                return Err(Error::NonFinite { op: "backward" });
            }
        }
        Ok(Gradients { grads: result })
    }
}

fn op_name(kind: OpKind) -> &'static str {
    match kind {
        OpKind::Leaf => "leaf",
        OpKind::MatMul => "matmul",
        OpKind::SparseMatMul => "sparse_matmul",
        OpKind::SpMM => "spmm",
        OpKind::Hadamard => "hadamard",
        OpKind::Add => "add",
        OpKind::Concat => "concat_cols",
        OpKind::LeakyRelu => "leaky_relu",
        OpKind::Dropout => "dropout",
        OpKind::BatchNorm => "batch_norm",
        OpKind::SoftmaxCrossEntropy => "softmax_cross_entropy",
        OpKind::Sum => "sum",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[f64]]) -> DenseMat {
        DenseMat::from_rows(rows).unwrap()
    }

    #[test]
    fn hadamard_examples() {
        let mut t = Tape::<f64>::new();
        let p = t.constant(m(&[&[2.0, 3.0]]));
        let q = t.constant(m(&[&[4.0, 5.0]]));
        let out = t.hadamard(p, q).unwrap();
        assert_eq!(t.value(out).as_slice(), &[8.0, 15.0]);
        let ones = t.constant(DenseMat::filled(1, 2, 1.0));
        let same = t.hadamard(p, ones).unwrap();
        assert_eq!(t.value(same), t.value(p));
    }

    #[test]
    fn concat_examples() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(m(&[&[1.0]]));
        let b = t.constant(m(&[&[2.0]]));
        let c = t.concat_cols(&[a, b]).unwrap();
        assert_eq!(t.value(c).as_slice(), &[1.0, 2.0]);
        assert_eq!(t.concat_offsets(c).unwrap(), &[0, 1, 2]);
        assert_eq!(t.concat_cols(&[a]).unwrap(), a);
        let tall = t.constant(DenseMat::zeros(2, 1));
        assert!(t.concat_cols(&[a, tall]).is_err());
    }

    #[test]
    fn leaky_relu_examples() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(&[&[-1.0, 2.0]]));
        let y = t.leaky_relu(x, 0.01).unwrap();
        assert_eq!(t.value(y).as_slice(), &[-0.01, 2.0]);
        let pos = t.constant(m(&[&[0.0, 3.0]]));
        let same = t.leaky_relu(pos, 0.01).unwrap();
        assert_eq!(t.value(same), t.value(pos));
        assert!(t.leaky_relu(x, 1.5).is_err());
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut t = Tape::<f64>::new();
        let x = t.constant(m(&[&[1.0, 2.0, 3.0]]));
        assert_eq!(t.dropout(x, 0.0, true, &mut rng).unwrap(), x);
        assert_eq!(t.dropout(x, 0.7, false, &mut rng).unwrap(), x);
        assert!(t.dropout(x, 1.0, true, &mut rng).is_err());
    }

    #[test]
    fn dropout_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut t = Tape::<f64>::new();
        let n = 1_000_000;
        let x = t.constant(DenseMat::filled(1000, 1000, 1.0));
        let y = t.dropout(x, 0.9, true, &mut rng).unwrap();
        let v = t.value(y);
        let survivors = v.as_slice().iter().filter(|&&e| e != 0.0).count();
        let frac = survivors as f64 / n as f64;
        assert!((frac - 0.1).abs() < 0.002, "survivor fraction {frac}");
        let mean = v.sum() / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn batch_norm_examples() {
        let mut t = Tape::<f64>::new();
        let gamma = t.param(DenseMat::filled(1, 1, 1.0));
        let beta = t.param(DenseMat::zeros(1, 1));
        let mut state = BatchNormState::new(1);

        let constant = t.constant(DenseMat::column(&[4.0, 4.0, 4.0]));
        let y = t
            .batch_norm(
                constant,
                gamma,
                beta,
                &mut state,
                BatchNormOptions::default(),
            )
            .unwrap();
        assert!(t.value(y).as_slice().iter().all(|v| v.abs() < 1e-12));

        let opts = BatchNormOptions {
            eps: 0.0,
            ..Default::default()
        };
        let std = t.constant(DenseMat::column(&[-1.0, 1.0]));
        let mut state = BatchNormState::new(1);
        let y = t.batch_norm(std, gamma, beta, &mut state, opts).unwrap();
        assert_eq!(t.value(y).as_slice(), &[-1.0, 1.0]);
        // running stats moved toward the batch statistics
        assert!((state.running_mean[0] - 0.0).abs() < 1e-15);
        assert!((state.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn batch_norm_eval_uses_running_stats() {
        let mut t = Tape::<f64>::new();
        let gamma = t.param(DenseMat::filled(1, 1, 2.0));
        let beta = t.param(DenseMat::filled(1, 1, 0.5));
        let mut state = BatchNormState {
            running_mean: vec![1.0],
            running_var: vec![4.0],
        };
        let x = t.constant(DenseMat::column(&[3.0, 5.0]));
        let opts = BatchNormOptions {
            eps: 0.0,
            training: false,
            ..Default::default()
        };
        let y = t.batch_norm(x, gamma, beta, &mut state, opts).unwrap();
        assert_eq!(t.value(y).as_slice(), &[2.5, 4.5]);
        assert_eq!(state.running_mean, vec![1.0]);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut t = Tape::<f64>::new();
        let uniform = t.constant(m(&[&[0.0, 0.0]]));
        let loss = t.softmax_cross_entropy(uniform, &[0], &[0]).unwrap();
        assert!((t.value(loss).item() - std::f64::consts::LN_2).abs() < 1e-15);

        let big = t.constant(m(&[&[1000.0, 0.0]]));
        let loss = t.softmax_cross_entropy(big, &[0], &[0]).unwrap();
        let v = t.value(loss).item();
        assert!(v.is_finite() && v.abs() < 1e-12);

        assert!(matches!(
            t.softmax_cross_entropy(big, &[0], &[]),
            Err(Error::EmptyMask(_))
        ));
    }

    #[test]
    fn cross_entropy_gradient_is_zero_outside_mask() {
        let mut t = Tape::<f64>::new();
        let logits = t.param(m(&[&[0.3, -0.2], &[1.0, 2.0]]));
        let loss = t.softmax_cross_entropy(logits, &[1, 0], &[0]).unwrap();
        let g = t.backward(loss).unwrap();
        let g = g.get(logits).unwrap();
        assert_eq!(g.row(1), &[0.0, 0.0]);
        assert!((g.row(0).iter().sum::<f64>()).abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut t = Tape::<f64>::new();
        let a = t.constant(m(&[&[f64::MAX]]));
        let b = t.constant(m(&[&[10.0]]));
        assert!(matches!(t.hadamard(a, b), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn unreachable_params_get_zero_gradients() {
        let mut t = Tape::<f64>::new();
        let used = t.param(m(&[&[2.0]]));
        let unused = t.param(m(&[&[5.0, 1.0]]));
        let s = t.sum(used).unwrap();
        let g = t.backward(s).unwrap();
        assert_eq!(g.get(used).unwrap().as_slice(), &[1.0]);
        assert_eq!(g.get(unused).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn concat_backward_routes_blocks_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut t = Tape::<f64>::new();
        let a = t.param(DenseMat::uniform(3, 2, 1.0, &mut rng));
        let b = t.param(DenseMat::uniform(3, 4, 1.0, &mut rng));
        let weights = t.constant(DenseMat::uniform(3, 6, 1.0, &mut rng));
        let c = t.concat_cols(&[a, b]).unwrap();
        let prod = t.hadamard(c, weights).unwrap();
        let s = t.sum(prod).unwrap();
        let g = t.backward(s).unwrap();
        let w = t.value(weights);
        assert_eq!(g.get(a).unwrap(), &w.slice_cols(0, 2));
        assert_eq!(g.get(b).unwrap(), &w.slice_cols(2, 6));
    }
}
