use std::collections::HashMap;

use super::{matmul_into, transpose_raw, Tensor};
use crate::error::{Error, Result};

/// Probability floor applied before taking logs in [`Tape::nll`].
pub const PROB_FLOOR: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddRowBias(Var, Var),
    Relu(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    SliceCols { x: Var, start: usize },
    Reshape(Var),
    Sum(Var),
    GroupMeanRows { x: Var, group: usize },
    MaxPoolRows { x: Var, argmax: Vec<usize> },
    UnfoldRows { x: Var, seq_len: usize, kernel: usize },
    Nll { probs: Var, labels: Vec<usize> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Wengert list of executed operations.
///
/// Every operation's inputs are recorded before the operation itself, so the
/// node order is already topological and backward is a single reverse scan.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss, keyed by the parameter's [`Var`].
#[derive(Debug, Default)]
pub struct Gradients {
    grads: HashMap<Var, Tensor>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(&var)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Tensor)> {
        self.grads.iter()
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records a trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records a leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).sub(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).hadamard(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, s), rg)
    }

    /// Adds a `1 x d` bias to every row of an `n x d` matrix.
    pub fn add_row_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let (n, d) = xv.dims2()?;
        if bv.numel() != d || bv.rows() != 1 {
            return Err(mismatch("add_row_bias", xv, bv));
        }
        let mut out = xv.data().to_vec();
        for r in 0..n {
            for (o, &b) in out[r * d..(r + 1) * d].iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let out = Tensor::matrix(n, d, out)?;
        let rg = self.rg(&[x, bias]);
        Ok(self.push(out, Op::AddRowBias(x, bias), rg))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let rg = self.rg(&[x]);
        self.push(out, Op::Relu(x), rg)
    }

    /// Row-wise softmax with max-shift.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let out = softmax_rows(self.value(x))?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Softmax(x), rg))
    }

    /// Appends columns of every part, in argument order.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::invalid("concat_cols: no parts"));
        };
        let n = self.value(first).dims2()?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if r != n {
                return Err(mismatch("concat_cols", self.value(first), self.value(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(n * total);
        for r in 0..n {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        let out = Tensor::matrix(n, total, out)?;
        let rg = self.rg(parts);
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xv = self.value(x);
        let (n, d) = xv.dims2()?;
        if len == 0 || start + len > d {
            return Err(Error::InvalidShape {
                shape: xv.shape().to_vec(),
                reason: format!("column slice {start}..{} out of range", start + len),
            });
        }
        let mut out = Vec::with_capacity(n * len);
        for r in 0..n {
            out.extend_from_slice(&xv.row(r)[start..start + len]);
        }
        let out = Tensor::matrix(n, len, out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::SliceCols { x, start }, rg))
    }

    /// Reinterprets the row-major buffer under a new shape.
    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).reshape(shape)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::scalar(self.value(x).sum());
        let rg = self.rg(&[x]);
        self.push(out, Op::Sum(x), rg)
    }

    /// Averages consecutive blocks of `group` rows: `(n*group) x d -> n x d`.
    pub fn group_mean_rows(&mut self, x: Var, group: usize) -> Result<Var> {
        let xv = self.value(x);
        let (rows, d) = xv.dims2()?;
        if group == 0 || rows % group != 0 {
            return Err(Error::InvalidShape {
                shape: xv.shape().to_vec(),
                reason: format!("row count not divisible by group {group}"),
            });
        }
        let n = rows / group;
        let mut out = vec![0.0; n * d];
        for r in 0..rows {
            let o = &mut out[(r / group) * d..(r / group + 1) * d];
            for (acc, &v) in o.iter_mut().zip(xv.row(r)) {
                *acc += v;
            }
        }
        let inv = 1.0 / group as f64;
        out.iter_mut().for_each(|v| *v *= inv);
        let out = Tensor::matrix(n, d, out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::GroupMeanRows { x, group }, rg))
    }

    /// Non-overlapping max-pool along time for stacked sequences.
    ///
    /// `x` holds `n` sequences of `seq_len` rows each. Each sequence is
    /// reduced to `seq_len / pool` rows (trailing remainder dropped). Ties
    /// resolve to the earliest row.
    pub fn max_pool_rows(&mut self, x: Var, seq_len: usize, pool: usize) -> Result<Var> {
        let xv = self.value(x);
        let (rows, d) = xv.dims2()?;
        if pool == 0 || seq_len < pool || rows % seq_len != 0 {
            return Err(Error::InvalidShape {
                shape: xv.shape().to_vec(),
                reason: format!("cannot pool sequences of length {seq_len} by {pool}"),
            });
        }
        let n = rows / seq_len;
        let out_len = seq_len / pool;
        let mut out = vec![0.0; n * out_len * d];
        let mut argmax = vec![0usize; n * out_len * d];
        for s in 0..n {
            for u in 0..out_len {
                let orow = s * out_len + u;
                for c in 0..d {
                    let base = s * seq_len + u * pool;
                    let mut best = base;
                    for j in 1..pool {
                        if xv.get(base + j, c) > xv.get(best, c) {
                            best = base + j;
                        }
                    }
                    out[orow * d + c] = xv.get(best, c);
                    argmax[orow * d + c] = best;
                }
            }
        }
        let out = Tensor::matrix(n * out_len, d, out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::MaxPoolRows { x, argmax }, rg))
    }

    /// Sliding-window unfold along time (im2col for a 1-D convolution).
    ///
    /// `(n*seq_len) x c -> (n*(seq_len-kernel+1)) x (kernel*c)`; output row
    /// `(s, t)` is input rows `t..t+kernel` of sequence `s`, concatenated.
    pub fn unfold_rows(&mut self, x: Var, seq_len: usize, kernel: usize) -> Result<Var> {
        let xv = self.value(x);
        let (rows, c) = xv.dims2()?;
        if kernel == 0 || seq_len < kernel || rows % seq_len != 0 {
            return Err(Error::InvalidShape {
                shape: xv.shape().to_vec(),
                reason: format!("cannot unfold sequences of length {seq_len} with kernel {kernel}"),
            });
        }
        let n = rows / seq_len;
        let out_len = seq_len - kernel + 1;
        let mut out = Vec::with_capacity(n * out_len * kernel * c);
        for s in 0..n {
            for t in 0..out_len {
                for j in 0..kernel {
                    out.extend_from_slice(xv.row(s * seq_len + t + j));
                }
            }
        }
        let out = Tensor::matrix(n * out_len, kernel * c, out)?;
        let rg = self.rg(&[x]);
        Ok(self.push(out, Op::UnfoldRows { x, seq_len, kernel }, rg))
    }

    /// Mean negative log-likelihood of `labels` under row-probabilities,
    /// with probabilities floored at [`PROB_FLOOR`].
    pub fn nll(&mut self, probs: Var, labels: &[usize]) -> Result<Var> {
        let pv = self.value(probs);
        let (n, c) = pv.dims2()?;
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "nll: {} labels for {n} rows",
                labels.len()
            )));
        }
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            if y >= c {
                return Err(Error::Row {
                    row: i,
                    reason: format!("label {y} out of range for {c} classes"),
                });
            }
            total -= pv.get(i, y).max(PROB_FLOOR).ln();
        }
        let out = Tensor::scalar(total / n as f64);
        let rg = self.rg(&[probs]);
        Ok(self.push(
            out,
            Op::Nll {
                probs,
                labels: labels.to_vec(),
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`.
    ///
    /// Every trainable leaf gets an entry; leaves the loss does not depend on
    /// get zeros.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
                continue;
            }
            self.backprop_node(node, &g, &mut grads);
        }

        let mut out = Gradients::default();
        for (idx, node) in self.nodes.iter().enumerate() {
            if !(node.requires_grad && matches!(node.op, Op::Leaf)) {
                continue;
            }
            let data = grads
                .get_mut(idx)
                .and_then(Option::take)
                .unwrap_or_else(|| vec![0.0; node.value.numel()]);
            let t = Tensor::new(node.value.shape().to_vec(), data)?;
            out.grads.insert(Var(idx), t);
        }
        Ok(out)
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, contrib: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.numel()]);
        contrib(slot);
    }

    fn backprop_node(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.value(*a).rows(), self.value(*a).cols());
                let n = self.value(*b).cols();
                // dA = G B^T
                self.accumulate(grads, *a, |ga| {
                    let bt = transpose_raw(self.value(*b).data(), k, n);
                    matmul_into(g, &bt, ga, m, n, k);
                });
                // dB = A^T G
                self.accumulate(grads, *b, |gb| {
                    let at = transpose_raw(self.value(*a).data(), m, k);
                    matmul_into(&at, g, gb, k, m, n);
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g));
                self.accumulate(grads, *b, |gb| add_assign(gb, g));
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, |ga| add_assign(ga, g));
                self.accumulate(grads, *b, |gb| gb.iter_mut().zip(g).for_each(|(o, &v)| *o -= v));
            }
            Op::Mul(a, b) => {
                let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                self.accumulate(grads, *a, |ga| {
                    for ((o, &gv), &bx) in ga.iter_mut().zip(g).zip(bv) {
                        *o += gv * bx;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((o, &gv), &ax) in gb.iter_mut().zip(g).zip(av) {
                        *o += gv * ax;
                    }
                });
            }
            Op::Scale(a, s) => {
                self.accumulate(grads, *a, |ga| ga.iter_mut().zip(g).for_each(|(o, &v)| *o += v * s));
            }
            Op::AddRowBias(x, bias) => {
                self.accumulate(grads, *x, |gx| add_assign(gx, g));
                let d = self.value(*bias).numel();
                self.accumulate(grads, *bias, |gb| {
                    for row in g.chunks_exact(d) {
                        add_assign(gb, row);
                    }
                });
            }
            Op::Relu(x) => {
                let xv = self.value(*x).data();
                self.accumulate(grads, *x, |gx| {
                    for ((o, &gv), &v) in gx.iter_mut().zip(g).zip(xv) {
                        if v > 0.0 {
                            *o += gv;
                        }
                    }
                });
            }
            Op::Softmax(x) => {
                let y = &node.value;
                let c = y.cols();
                self.accumulate(grads, *x, |gx| {
                    for ((gr, yr), ox) in g.chunks_exact(c).zip(y.data().chunks_exact(c)).zip(gx.chunks_exact_mut(c)) {
                        let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                        for ((o, &gv), &yv) in ox.iter_mut().zip(gr).zip(yr) {
                            *o += yv * (gv - dot);
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).cols();
                    self.accumulate(grads, *p, |gp| {
                        for (grow, orow) in g.chunks_exact(total).zip(gp.chunks_exact_mut(w)) {
                            add_assign(orow, &grow[offset..offset + w]);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols { x, start } => {
                let len = node.value.cols();
                let d = self.value(*x).cols();
                self.accumulate(grads, *x, |gx| {
                    for (grow, orow) in g.chunks_exact(len).zip(gx.chunks_exact_mut(d)) {
                        add_assign(&mut orow[*start..*start + len], grow);
                    }
                });
            }
            Op::Reshape(x) => {
                self.accumulate(grads, *x, |gx| add_assign(gx, g));
            }
            Op::Sum(x) => {
                self.accumulate(grads, *x, |gx| gx.iter_mut().for_each(|o| *o += g[0]));
            }
            Op::GroupMeanRows { x, group } => {
                let d = node.value.cols();
                let inv = 1.0 / *group as f64;
                self.accumulate(grads, *x, |gx| {
                    for (r, orow) in gx.chunks_exact_mut(d).enumerate() {
                        let grow = &g[(r / group) * d..(r / group + 1) * d];
                        for (o, &v) in orow.iter_mut().zip(grow) {
                            *o += v * inv;
                        }
                    }
                });
            }
            Op::MaxPoolRows { x, argmax } => {
                let d = node.value.cols();
                self.accumulate(grads, *x, |gx| {
                    for (i, (&src, &gv)) in argmax.iter().zip(g).enumerate() {
                        gx[src * d + i % d] += gv;
                    }
                });
            }
            Op::UnfoldRows { x, seq_len, kernel } => {
                let c = self.value(*x).cols();
                let out_len = seq_len - kernel + 1;
                let width = kernel * c;
                self.accumulate(grads, *x, |gx| {
                    for (orow, grow) in g.chunks_exact(width).enumerate() {
                        let (s, t) = (orow / out_len, orow % out_len);
                        for j in 0..*kernel {
                            let src = s * seq_len + t + j;
                            add_assign(&mut gx[src * c..(src + 1) * c], &grow[j * c..(j + 1) * c]);
                        }
                    }
                });
            }
            Op::Nll { probs, labels } => {
                let pv = self.value(*probs);
                let c = pv.cols();
                let scale = g[0] / labels.len() as f64;
                self.accumulate(grads, *probs, |gp| {
                    for (i, &y) in labels.iter().enumerate() {
                        let p = pv.get(i, y);
                        if p > PROB_FLOOR {
                            gp[i * c + y] -= scale / p;
                        }
                    }
                });
            }
        }
    }
}

fn add_assign(dst: &mut [f64], src: &[f64]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Row-wise softmax of an `n x c` matrix, `c >= 2`.
pub(crate) fn softmax_rows(x: &Tensor) -> Result<Tensor> {
    let (n, c) = x.dims2()?;
    if c < 2 {
        return Err(Error::InvalidShape {
            shape: x.shape().to_vec(),
            reason: "softmax needs at least two columns".into(),
        });
    }
    let mut out = x.data().to_vec();
    for row in out.chunks_exact_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            z += *v;
        }
        row.iter_mut().for_each(|v| *v /= z);
    }
    Tensor::matrix(n, c, out)
}
