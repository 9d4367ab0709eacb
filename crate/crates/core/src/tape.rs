//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every forward operation as a node. Inputs always
//! precede their outputs on the tape, so the backward pass is a single sweep
//! in reverse recording order. All reductions sum in row-major,
//! left-to-right order so results are bit-reproducible.
//!
//! Values are viewed as matrices (see [`Tensor::dims2`]); vectors are
//! `1 x n` rows.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{ParamStore, Tensor};
use crate::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    MeanRows(Var),
    SumRows(Var),
    Dot(Var, Var),
    ConcatRows(Vec<Var>),
    Row(Var, usize),
    NeighborSum(Var, Vec<Vec<usize>>),
    BatchNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<f64>,
        inv_std: Vec<f64>,
        batch_stats: bool,
    },
    SoftmaxNll {
        logits: Var,
        probs: Vec<f64>,
        target: usize,
    },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Running-statistics update produced by a train-mode batch norm; applied to
/// the model's buffers once the optimizer step is done.
#[derive(Debug, Clone, PartialEq)]
pub struct BnUpdate {
    pub prefix: String,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: BTreeMap<String, Var>,
    bn_updates: Vec<BnUpdate>,
}

fn mismatch(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `a (n x k) * b (k x m)`, accumulating over `k` in ascending order.
fn matmul_raw(a: &[f64], n: usize, k: usize, b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let row = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * m..(p + 1) * m];
            for (o, &bv) in row.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn transpose_raw(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Softmax restricted to entries where `mask` is true (all entries when
/// `mask` is `None`). Masked entries get probability exactly 0.
pub fn masked_softmax(logits: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    let valid = |i: usize| mask.is_none_or(|m| m[i]);
    if let Some(m) = mask {
        if m.len() != logits.len() {
            return Err(mismatch("softmax", format!("mask {} vs logits {}", m.len(), logits.len())));
        }
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let max = (0..logits.len())
        .filter(|&i| valid(i))
        .map(|i| logits[i])
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(mismatch("softmax", "no unmasked entries".into()));
    }
    let mut probs: Vec<f64> = (0..logits.len())
        .map(|i| if valid(i) { libm::exp(logits[i] - max) } else { 0.0 })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// The value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data()[0]
    }

    pub fn bn_updates(&self) -> &[BnUpdate] {
        &self.bn_updates
    }

    pub fn take_bn_updates(&mut self) -> Vec<BnUpdate> {
        core::mem::take(&mut self.bn_updates)
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput);
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// A constant input; gradients flow to it but it is not a parameter.
    pub fn constant(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Leaf)
    }

    /// The parameter `name` from `store`. Repeated requests for the same name
    /// return the same node so gradients accumulate.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        if let Some(&v) = self.params.get(name) {
            return Ok(v);
        }
        let value = store.require(name)?.clone();
        let v = self.push(value, Op::Leaf)?;
        self.params.insert(name.into(), v);
        Ok(v)
    }

    fn dims(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dims2()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (n, k) = self.dims(a);
        let (k2, m) = self.dims(b);
        if k != k2 {
            return Err(mismatch("matmul", format!("{n}x{k} * {k2}x{m}")));
        }
        let out = matmul_raw(self.data(a), n, k, self.data(b), m);
        self.push(Tensor::matrix(n, m, out)?, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = transpose_raw(self.data(a), r, c);
        self.push(Tensor::matrix(c, r, out)?, Op::Transpose(a))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(mismatch("add", format!("{da:?} + {db:?}")));
        }
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        self.push(Tensor::matrix(da.0, da.1, out)?, Op::Add(a, b))
    }

    /// Adds the `1 x c` row `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if self.dims(b) != (1, c) {
            return Err(mismatch("add_row", format!("{r}x{c} + {:?}", self.dims(b))));
        }
        let bias = self.data(b);
        let out = self
            .data(a)
            .chunks(c.max(1))
            .flat_map(|row| row.iter().zip(bias).map(|(x, y)| x + y))
            .collect();
        self.push(Tensor::matrix(r, c, out)?, Op::AddRow(a, b))
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (da, db) = (self.dims(a), self.dims(b));
        if da != db {
            return Err(mismatch("mul", format!("{da:?} * {db:?}")));
        }
        let out = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        self.push(Tensor::matrix(da.0, da.1, out)?, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|x| x * factor).collect();
        self.push(Tensor::matrix(r, c, out)?, Op::Scale(a, factor))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = self.data(a).iter().map(|&x| f(x)).collect();
        self.push(Tensor::matrix(r, c, out)?, op)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, |x| if x > 0.0 { x } else { 0.0 }, Op::Relu(a))
    }

    /// Smallest `|x|` over every ReLU input recorded so far: how far the
    /// current point is from a kink.
    pub fn relu_margin(&self) -> Option<f64> {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(self.data(a).iter().fold(f64::INFINITY, |m, x| m.min(x.abs()))),
                _ => None,
            })
            .reduce(f64::min)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, libm::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    /// Column means, `r x c -> 1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        if r == 0 {
            return Err(mismatch("mean_rows", "zero rows".into()));
        }
        let mut out = column_sums(self.data(a), r, c);
        out.iter_mut().for_each(|v| *v /= r as f64);
        self.push(Tensor::matrix(1, c, out)?, Op::MeanRows(a))
    }

    /// Column sums, `r x c -> 1 x c`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.dims(a);
        let out = column_sums(self.data(a), r, c);
        self.push(Tensor::matrix(1, c, out)?, Op::SumRows(a))
    }

    /// Inner product of two equally shaped tensors, as a `1 x 1` node.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.value(a).len() != self.value(b).len() {
            return Err(mismatch("dot", format!("{:?} . {:?}", self.dims(a), self.dims(b))));
        }
        let out: f64 = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).sum();
        self.push(Tensor::matrix(1, 1, vec![out])?, Op::Dot(a, b))
    }

    /// Stacks equally wide matrices vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(mismatch("concat_rows", "no inputs".into()));
        };
        let c = self.dims(first).1;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, pc) = self.dims(p);
            if pc != c {
                return Err(mismatch("concat_rows", format!("width {pc} vs {c}")));
            }
            rows += r;
            out.extend_from_slice(self.data(p));
        }
        self.push(Tensor::matrix(rows, c, out)?, Op::ConcatRows(parts.to_vec()))
    }

    /// Row `index` of `a`, as `1 x c`.
    pub fn row(&mut self, a: Var, index: usize) -> Result<Var> {
        let (r, c) = self.dims(a);
        if index >= r {
            return Err(mismatch("row", format!("row {index} of {r}")));
        }
        let out = self.data(a)[index * c..(index + 1) * c].to_vec();
        self.push(Tensor::matrix(1, c, out)?, Op::Row(a, index))
    }

    /// `out_v = h_v + sum_{u in N(v)} h_u` for every row `v`.
    pub fn neighbor_sum(&mut self, h: Var, neighbors: &[Vec<usize>]) -> Result<Var> {
        let (n, c) = self.dims(h);
        if neighbors.len() != n || neighbors.iter().flatten().any(|&u| u >= n) {
            return Err(mismatch("neighbor_sum", format!("{} adjacency lists for {n} rows", neighbors.len())));
        }
        let data = self.data(h);
        let mut out = data.to_vec();
        for (v, adj) in neighbors.iter().enumerate() {
            for &u in adj {
                for j in 0..c {
                    out[v * c + j] += data[u * c + j];
                }
            }
        }
        self.push(Tensor::matrix(n, c, out)?, Op::NeighborSum(h, neighbors.to_vec()))
    }

    /// Batch normalization over the rows of `x`.
    ///
    /// Train mode normalizes with the biased batch statistics and records a
    /// running-statistics update under `prefix`; eval mode normalizes with
    /// `running` (mean, variance). A zero-variance column normalizes to 0.
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        prefix: &str,
        mode: Mode,
        running: (&Tensor, &Tensor),
    ) -> Result<Var> {
        let (n, f) = self.dims(x);
        for (what, v) in [("gamma", gamma), ("beta", beta)] {
            if self.value(v).len() != f {
                return Err(mismatch("batch_norm", format!("{what} has {} entries for {f} features", self.value(v).len())));
            }
        }
        if running.0.len() != f || running.1.len() != f {
            return Err(mismatch("batch_norm", format!("running stats do not have {f} features")));
        }
        if n == 0 {
            return Err(mismatch("batch_norm", "zero rows".into()));
        }
        let data = self.data(x);
        let (mean, var) = match mode {
            Mode::Train => {
                let mut mean = column_sums(data, n, f);
                mean.iter_mut().for_each(|m| *m /= n as f64);
                let mut var = vec![0.0; f];
                for row in data.chunks(f) {
                    for j in 0..f {
                        let d = row[j] - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= n as f64);
                (mean, var)
            }
            Mode::Eval => (running.0.data().to_vec(), running.1.data().to_vec()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / libm::sqrt(v + BN_EPS)).collect();
        let mut xhat = vec![0.0; n * f];
        for (i, row) in data.chunks(f).enumerate() {
            for j in 0..f {
                xhat[i * f + j] = (row[j] - mean[j]) * inv_std[j];
            }
        }
        let (g, b) = (self.data(gamma), self.data(beta));
        let out = xhat
            .chunks(f)
            .flat_map(|row| (0..f).map(move |j| row[j] * g[j] + b[j]))
            .collect();
        if mode == Mode::Train {
            self.bn_updates.push(BnUpdate {
                prefix: prefix.into(),
                mean,
                var,
            });
        }
        self.push(
            Tensor::matrix(n, f, out)?,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats: mode == Mode::Train,
            },
        )
    }

    /// Negative log-likelihood of `target` under a softmax of the `1 x m`
    /// `logits`, restricted to unmasked entries.
    pub fn softmax_nll(&mut self, logits: Var, mask: Option<&[bool]>, target: usize) -> Result<Var> {
        let values = self.data(logits);
        if target >= values.len() || mask.is_some_and(|m| m.get(target) != Some(&true)) {
            return Err(Error::GoldInvalid(format!("target {target} is not a valid choice")));
        }
        let probs = masked_softmax(values, mask)?;
        // log p_t = (l_t - max) - ln(sum exp(l_i - max)); a single valid entry gives exactly 0.
        let max = (0..values.len())
            .filter(|&i| mask.is_none_or(|m| m[i]))
            .map(|i| values[i])
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = (0..values.len())
            .filter(|&i| mask.is_none_or(|m| m[i]))
            .map(|i| libm::exp(values[i] - max))
            .sum();
        let loss = libm::log(total) - (values[target] - max);
        self.push(Tensor::matrix(1, 1, vec![loss])?, Op::SoftmaxNll { logits, probs, target })
    }

    /// Probabilities stored by a [`Tape::softmax_nll`] node.
    pub fn softmax_probs(&self, v: Var) -> Option<&[f64]> {
        match &self.nodes[v.0].op {
            Op::SoftmaxNll { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if self.value(loss).len() != 1 {
            return Err(Error::NotAScalar(shape.to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].clone() else { continue };
            let node = &self.nodes[idx];
            let (r, c) = node.value.dims2();
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (n, k) = self.dims(*a);
                    let m = self.dims(*b).1;
                    let bt = transpose_raw(self.data(*b), k, m);
                    accumulate(&mut grads, *a, matmul_raw(&g, n, m, &bt, k));
                    let at = transpose_raw(self.data(*a), n, k);
                    accumulate(&mut grads, *b, matmul_raw(&at, k, n, &g, m));
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, transpose_raw(&g, r, c)),
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g);
                }
                Op::AddRow(a, b) => {
                    accumulate(&mut grads, *b, column_sums(&g, r, c));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.iter().zip(self.data(*b)).map(|(x, y)| x * y).collect();
                    let gb = g.iter().zip(self.data(*a)).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.iter().map(|x| x * f).collect()),
                Op::Relu(a) => {
                    let ga = g
                        .iter()
                        .zip(self.data(*a))
                        .map(|(gx, &x)| if x > 0.0 { *gx } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = g.iter().zip(node.value.data()).map(|(gx, y)| gx * (1.0 - y * y)).collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.iter().zip(node.value.data()).map(|(gx, y)| gx * y * (1.0 - y)).collect();
                    accumulate(&mut grads, *a, ga);
                }
                Op::MeanRows(a) => {
                    let rows = self.dims(*a).0;
                    let scaled: Vec<f64> = g.iter().map(|x| x / rows as f64).collect();
                    accumulate(&mut grads, *a, scaled.repeat(rows));
                }
                Op::SumRows(a) => {
                    let rows = self.dims(*a).0;
                    accumulate(&mut grads, *a, g.repeat(rows));
                }
                Op::Dot(a, b) => {
                    let ga = self.data(*b).iter().map(|y| g[0] * y).collect();
                    let gb = self.data(*a).iter().map(|x| g[0] * x).collect();
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        accumulate(&mut grads, p, g[offset..offset + len].to_vec());
                        offset += len;
                    }
                }
                Op::Row(a, index) => {
                    let (ar, ac) = self.dims(*a);
                    let mut ga = vec![0.0; ar * ac];
                    ga[index * ac..(index + 1) * ac].copy_from_slice(&g);
                    accumulate(&mut grads, *a, ga);
                }
                Op::NeighborSum(h, neighbors) => {
                    let mut gh = g.clone();
                    for (v, adj) in neighbors.iter().enumerate() {
                        for &u in adj {
                            for j in 0..c {
                                gh[u * c + j] += g[v * c + j];
                            }
                        }
                    }
                    accumulate(&mut grads, *h, gh);
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                    batch_stats,
                } => {
                    let (n, f) = (r, c);
                    let gamma_v = self.data(*gamma);
                    let mut ggamma = vec![0.0; f];
                    let mut gbeta = vec![0.0; f];
                    for i in 0..n {
                        for j in 0..f {
                            ggamma[j] += g[i * f + j] * xhat[i * f + j];
                            gbeta[j] += g[i * f + j];
                        }
                    }
                    let mut gx = vec![0.0; n * f];
                    if *batch_stats {
                        // dx = inv_std / n * (n * dxhat - sum(dxhat) - xhat * sum(dxhat * xhat))
                        for j in 0..f {
                            let mut sum_d = 0.0;
                            let mut sum_dx = 0.0;
                            for i in 0..n {
                                let d = g[i * f + j] * gamma_v[j];
                                sum_d += d;
                                sum_dx += d * xhat[i * f + j];
                            }
                            for i in 0..n {
                                let d = g[i * f + j] * gamma_v[j];
                                gx[i * f + j] =
                                    inv_std[j] / n as f64 * (n as f64 * d - sum_d - xhat[i * f + j] * sum_dx);
                            }
                        }
                    } else {
                        for i in 0..n {
                            for j in 0..f {
                                gx[i * f + j] = g[i * f + j] * gamma_v[j] * inv_std[j];
                            }
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *beta, gbeta);
                }
                Op::SoftmaxNll { logits, probs, target } => {
                    let mut gl: Vec<f64> = probs.iter().map(|p| g[0] * p).collect();
                    gl[*target] -= g[0];
                    accumulate(&mut grads, *logits, gl);
                }
            }
        }
        Ok(Gradients { grads })
    }

    /// Convenience: backward pass projected onto the parameters of `store`.
    /// Parameters that did not take part in the computation get zeros.
    pub fn param_grads(&self, loss: Var, store: &ParamStore) -> Result<ParamStore> {
        let grads = self.backward(loss)?;
        Ok(grads.for_params(self, store))
    }
}

fn column_sums(data: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for row in data.chunks(cols.max(1)).take(rows) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: Vec<f64>) {
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, x)| *e += x),
        slot @ None => *slot = Some(g),
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`, zeros if `v` does not influence the loss.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        let shape = tape.value(v).shape().to_vec();
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => Tensor::from_vec(shape, g.clone()).expect("gradient shape"),
            None => Tensor::zeros(&shape),
        }
    }

    pub fn for_params(&self, tape: &Tape, store: &ParamStore) -> ParamStore {
        store
            .iter()
            .map(|(name, t)| {
                let g = match tape.params.get(name.as_str()) {
                    Some(&v) => self.wrt(tape, v),
                    None => Tensor::zeros(t.shape()),
                };
                (name.clone(), g)
            })
            .collect()
    }
}
