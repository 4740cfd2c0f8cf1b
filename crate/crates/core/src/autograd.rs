//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Graph`] records every operation of one forward pass as a node; nodes are
//! appended after their parents, so index order is a topological order and the
//! graph cannot contain cycles. [`Graph::backward`] walks the tape once in
//! reverse and *adds* the resulting adjoints into each node's gradient buffer,
//! so two calls without a reset produce exactly twice the gradient. A graph is
//! meant to live for a single optimisation step and then be dropped.

use crate::error::{Error, Result};
use crate::tensor::{self, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Tanh,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Linear {
        x: Var,
        w: Var,
        b: Option<Var>,
    },
    Binary {
        op: Binary,
        a: Var,
        b: Var,
    },
    Unary(Unary, Var),
    Scale(Var, f64),
    Columns {
        src: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    GatherRows {
        table: Var,
        ids: Vec<usize>,
    },
    PickRows(Vec<(Var, usize)>),
    ReverseGrad {
        src: Var,
        factor: f64,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Trainable leaf: gradients are accumulated for it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    /// Constant leaf: never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of `v`; zeros until a backward pass reaches it.
    pub fn grad(&self, v: Var) -> Tensor {
        let node = &self.nodes[v.0];
        node.grad
            .clone()
            .unwrap_or_else(|| Tensor::zeros(node.value.shape()))
    }

    /// Resets every accumulated gradient to zero.
    pub fn zero_grad(&mut self) {
        for node in &mut self.nodes {
            node.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn dims(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        let t = &self.nodes[v.0].value;
        t.matrix_dims()
            .ok_or_else(|| Error::dimension(op, t.shape(), &[]))
    }

    /// Matrix product `a [m×k] · b [k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.cols() != tb.rows() {
            return Err(Error::dimension("matmul", ta.shape(), tb.shape()));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let out = tensor::matmul_nn(ta.data(), tb.data(), m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, rg, Op::MatMul(a, b)))
    }

    /// Affine map `x [B×in] · wᵀ + b` with `w [out×in]` and `b [out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let (batch, inp) = self.dims(x, "linear")?;
        let tw = self.value(w);
        if tw.shape().len() != 2 || tw.cols() != inp {
            return Err(Error::dimension("linear", self.value(x).shape(), tw.shape()));
        }
        let out = tw.rows();
        if let Some(b) = b {
            let tb = self.value(b);
            if tb.numel() != out {
                return Err(Error::dimension("linear bias", tw.shape(), tb.shape()));
            }
        }
        let mut data = tensor::matmul_nt(self.value(x).data(), tw.data(), batch, inp, out);
        if let Some(b) = b {
            let bias = self.value(b).data();
            for row in data.chunks_exact_mut(out) {
                for (v, bb) in row.iter_mut().zip(bias) {
                    *v += bb;
                }
            }
        }
        let shape = if self.value(x).shape().len() == 1 {
            vec![out]
        } else {
            vec![batch, out]
        };
        let value = Tensor::new(shape, data)?;
        let mut parents = vec![x, w];
        parents.extend(b);
        let rg = self.any_grad(&parents);
        Ok(self.push(value, rg, Op::Linear { x, w, b }))
    }

    /// Elementwise binary op. Shapes must be equal, or one side must be a scalar.
    pub fn binary(&mut self, op: Binary, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let f = match op {
            Binary::Add => |x: f64, y: f64| x + y,
            Binary::Sub => |x: f64, y: f64| x - y,
            Binary::Mul => |x: f64, y: f64| x * y,
        };
        let value = if ta.shape() == tb.shape() {
            let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
            Tensor::new(ta.shape().to_vec(), data)?
        } else if tb.is_scalar() {
            let y = tb.data()[0];
            ta.map(|x| f(x, y))
        } else if ta.is_scalar() {
            let x = ta.data()[0];
            tb.map(|y| f(x, y))
        } else {
            return Err(Error::dimension("elementwise", ta.shape(), tb.shape()));
        };
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, rg, Op::Binary { op, a, b }))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn unary(&mut self, op: Unary, a: Var) -> Var {
        let value = match op {
            Unary::Tanh => self.value(a).map(f64::tanh),
            Unary::Sigmoid => self.value(a).map(sigmoid),
        };
        let rg = self.any_grad(&[a]);
        self.push(value, rg, Op::Unary(op, a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }

    /// Multiplication by a constant.
    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.any_grad(&[a]);
        self.push(value, rg, Op::Scale(a, factor))
    }

    /// Column block `[start, start+len)` of a matrix.
    pub fn columns(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(src);
        let (r, c) = t.matrix_dims().filter(|_| t.shape().len() == 2).ok_or_else(|| {
            Error::dimension("columns", t.shape(), &[start, len])
        })?;
        if len == 0 || start + len > c {
            return Err(Error::dimension("columns", t.shape(), &[start, len]));
        }
        let mut data = Vec::with_capacity(r * len);
        for i in 0..r {
            data.extend_from_slice(&t.row(i)[start..start + len]);
        }
        let value = Tensor::new(vec![r, len], data)?;
        let rg = self.any_grad(&[src]);
        Ok(self.push(value, rg, Op::Columns { src, start }))
    }

    /// Single row of a matrix as a `[1×cols]` matrix.
    pub fn row(&mut self, src: Var, index: usize) -> Result<Var> {
        let rows = self.value(src).rows();
        if index >= rows {
            return Err(Error::dimension("row", self.value(src).shape(), &[index]));
        }
        Ok(self.pick_rows(&[(src, index)]))
    }

    /// Horizontal concatenation of matrices with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::EmptyInput("concat of nothing"))?;
        let rows = self.value(first).rows();
        for &p in parts {
            let t = self.value(p);
            if t.shape().len() != 2 || t.rows() != rows {
                return Err(Error::dimension("concat", self.value(first).shape(), t.shape()));
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row(i));
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        let rg = self.any_grad(parts);
        Ok(self.push(value, rg, Op::ConcatCols(parts.to_vec())))
    }

    /// Row lookup: output row `i` is `table[ids[i]]`.
    pub fn gather_rows(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("row lookup with no ids"));
        }
        let t = self.value(table);
        let (rows, cols) = t.matrix_dims().ok_or_else(|| Error::dimension("gather", t.shape(), &[]))?;
        if let Some(&bad) = ids.iter().find(|&&id| id >= rows) {
            return Err(Error::dimension("gather", t.shape(), &[bad]));
        }
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            data.extend_from_slice(t.row(id));
        }
        let value = Tensor::new(vec![ids.len(), cols], data)?;
        let rg = self.any_grad(&[table]);
        Ok(self.push(
            value,
            rg,
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Output row `i` is row `picks[i].1` of node `picks[i].0`. All sources must
    /// share a column count. Used to read each sequence's state at its true end.
    pub fn pick_rows(&mut self, picks: &[(Var, usize)]) -> Var {
        assert!(!picks.is_empty(), "pick_rows needs at least one row");
        let cols = self.value(picks[0].0).cols();
        let mut data = Vec::with_capacity(picks.len() * cols);
        for &(v, r) in picks {
            let row = self.value(v).row(r);
            assert_eq!(row.len(), cols, "pick_rows sources differ in width");
            data.extend_from_slice(row);
        }
        let vars: Vec<Var> = picks.iter().map(|p| p.0).collect();
        let rg = self.any_grad(&vars);
        let value = Tensor::new(vec![picks.len(), cols], data).expect("consistent pick shape");
        self.push(value, rg, Op::PickRows(picks.to_vec()))
    }

    /// Identity forward; backward multiplies the upstream gradient by `factor`.
    pub(crate) fn reverse_grad(&mut self, src: Var, factor: f64) -> Var {
        let value = self.value(src).clone();
        let rg = self.any_grad(&[src]);
        self.push(value, rg, Op::ReverseGrad { src, factor })
    }

    /// Mean over rows of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (batch, classes) = t
            .matrix_dims()
            .ok_or_else(|| Error::dimension("cross entropy", t.shape(), &[]))?;
        if targets.is_empty() {
            return Err(Error::EmptyInput("cross entropy with empty batch"));
        }
        if targets.len() != batch {
            return Err(Error::dimension("cross entropy", t.shape(), &[targets.len()]));
        }
        if let Some((row, &target)) = targets.iter().enumerate().find(|(_, &y)| y >= classes) {
            return Err(Error::Label {
                row,
                target,
                classes,
            });
        }
        let mut probs = Vec::with_capacity(batch * classes);
        let mut total = 0.0;
        for (i, &y) in targets.iter().enumerate() {
            let row = t.row(i);
            let (p, log_z) = softmax_row(row);
            total += log_z - row[y];
            probs.extend(p);
        }
        let value = Tensor::scalar(total / batch as f64);
        let rg = self.any_grad(&[logits]);
        Ok(self.push(
            value,
            rg,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).sum());
        let rg = self.any_grad(&[a]);
        self.push(value, rg, Op::Sum(a))
    }

    /// Propagates d`output`/d(node) to every node that requires a gradient and
    /// adds it to that node's gradient buffer.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if !self.value(output).is_scalar() {
            return Err(Error::dimension("backward", self.value(output).shape(), &[1]));
        }
        let n = output.0 + 1;
        let mut adj: Vec<Option<Tensor>> = (0..n).map(|_| None).collect();
        adj[output.0] = Some(Tensor::full(self.value(output).shape(), 1.0));

        for i in (0..n).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let (lower, upper) = adj.split_at_mut(i);
            let Some(g) = upper[0].as_ref() else {
                continue;
            };
            self.propagate(i, g, lower);
        }

        for (node, a) in self.nodes.iter_mut().zip(adj) {
            if let (true, Some(a)) = (node.requires_grad, a) {
                match node.grad.as_mut() {
                    Some(acc) => acc.add_assign(&a),
                    None => node.grad = Some(a),
                }
            }
        }
        Ok(())
    }

    fn slot<'a>(&self, adj: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut Tensor> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(adj[v.0].get_or_insert_with(|| Tensor::zeros(node.value.shape())))
    }

    fn propagate(&self, i: usize, g: &Tensor, adj: &mut [Option<Tensor>]) {
        let node = &self.nodes[i];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                if let Some(ga) = self.slot(adj, *a) {
                    // dA += dC · Bᵀ
                    let d = tensor::matmul_nt(gd, tb.data(), m, n, k);
                    for (x, y) in ga.data_mut().iter_mut().zip(d) {
                        *x += y;
                    }
                }
                if let Some(gb) = self.slot(adj, *b) {
                    // dB += Aᵀ · dC
                    tensor::matmul_tn_acc(gb.data_mut(), ta.data(), gd, m, k, n);
                }
            }
            Op::Linear { x, w, b } => {
                let (tx, tw) = (self.value(*x), self.value(*w));
                let (batch, inp) = (tx.rows(), tx.cols());
                let out = tw.rows();
                if let Some(gx) = self.slot(adj, *x) {
                    // dX += dY · W
                    let d = tensor::matmul_nn(gd, tw.data(), batch, out, inp);
                    for (v, y) in gx.data_mut().iter_mut().zip(d) {
                        *v += y;
                    }
                }
                if let Some(gw) = self.slot(adj, *w) {
                    // dW += dYᵀ · X
                    tensor::matmul_tn_acc(gw.data_mut(), gd, tx.data(), batch, out, inp);
                }
                if let Some(gb) = b.and_then(|b| self.slot(adj, b)) {
                    for row in gd.chunks_exact(out) {
                        for (v, y) in gb.data_mut().iter_mut().zip(row) {
                            *v += y;
                        }
                    }
                }
            }
            Op::Binary { op, a, b } => self.propagate_binary(*op, *a, *b, gd, adj),
            Op::Unary(op, a) => {
                let y = node.value.data();
                if let Some(ga) = self.slot(adj, *a) {
                    let ga = ga.data_mut();
                    match op {
                        Unary::Tanh => {
                            for ((o, &gy), &yy) in ga.iter_mut().zip(gd).zip(y) {
                                *o += gy * (1.0 - yy * yy);
                            }
                        }
                        Unary::Sigmoid => {
                            for ((o, &gy), &yy) in ga.iter_mut().zip(gd).zip(y) {
                                *o += gy * (yy * (1.0 - yy));
                            }
                        }
                    }
                }
            }
            Op::Scale(a, factor) => {
                if let Some(ga) = self.slot(adj, *a) {
                    tensor::axpy(ga.data_mut(), *factor, gd);
                }
            }
            Op::Columns { src, start } => {
                let len = node.value.cols();
                if let Some(gs) = self.slot(adj, *src) {
                    let c = gs.cols();
                    let gs = gs.data_mut();
                    for (r, grow) in gd.chunks_exact(len).enumerate() {
                        let dst = &mut gs[r * c + start..r * c + start + len];
                        for (d, s) in dst.iter_mut().zip(grow) {
                            *d += s;
                        }
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let width = self.value(p).cols();
                    if let Some(gp) = self.slot(adj, p) {
                        let gp = gp.data_mut();
                        for (r, grow) in gd.chunks_exact(total).enumerate() {
                            let src = &grow[offset..offset + width];
                            for (d, s) in gp[r * width..(r + 1) * width].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    offset += width;
                }
            }
            Op::GatherRows { table, ids } => {
                let cols = node.value.cols();
                if let Some(gt) = self.slot(adj, *table) {
                    let gt = gt.data_mut();
                    for (grow, &id) in gd.chunks_exact(cols).zip(ids) {
                        for (d, s) in gt[id * cols..(id + 1) * cols].iter_mut().zip(grow) {
                            *d += s;
                        }
                    }
                }
            }
            Op::PickRows(picks) => {
                let cols = node.value.cols();
                for (grow, &(src, r)) in gd.chunks_exact(cols).zip(picks) {
                    if let Some(gs) = self.slot(adj, src) {
                        let dst = &mut gs.data_mut()[r * cols..(r + 1) * cols];
                        for (d, s) in dst.iter_mut().zip(grow) {
                            *d += s;
                        }
                    }
                }
            }
            Op::ReverseGrad { src, factor } => {
                if let Some(gs) = self.slot(adj, *src) {
                    // One multiply per element: the emitted gradient is exactly factor·g.
                    for (d, &s) in gs.data_mut().iter_mut().zip(gd) {
                        *d += factor * s;
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                if let Some(gl) = self.slot(adj, *logits) {
                    let batch = targets.len();
                    let classes = probs.len() / batch;
                    let scale = gd[0] / batch as f64;
                    let gl = gl.data_mut();
                    for (r, &y) in targets.iter().enumerate() {
                        for c in 0..classes {
                            let onehot = if c == y { 1.0 } else { 0.0 };
                            gl[r * classes + c] += (probs[r * classes + c] - onehot) * scale;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.slot(adj, *a) {
                    for v in ga.data_mut() {
                        *v += gd[0];
                    }
                }
            }
        }
    }

    fn propagate_binary(&self, op: Binary, a: Var, b: Var, gd: &[f64], adj: &mut [Option<Tensor>]) {
        let (ta, tb) = (self.value(a), self.value(b));
        let at = |t: &Tensor, i: usize| if t.is_scalar() { t.data()[0] } else { t.data()[i] };
        let d_a = |i: usize| match op {
            Binary::Add | Binary::Sub => 1.0,
            Binary::Mul => at(tb, i),
        };
        let d_b = |i: usize| match op {
            Binary::Add => 1.0,
            Binary::Sub => -1.0,
            Binary::Mul => at(ta, i),
        };
        self.accumulate_operand(adj, a, gd, d_a);
        self.accumulate_operand(adj, b, gd, d_b);
    }

    fn accumulate_operand(
        &self,
        adj: &mut [Option<Tensor>],
        v: Var,
        gd: &[f64],
        local: impl Fn(usize) -> f64,
    ) {
        let Some(gs) = self.slot(adj, v) else {
            return;
        };
        let gs = gs.data_mut();
        if gs.len() == gd.len() {
            for (i, (d, &gy)) in gs.iter_mut().zip(gd).enumerate() {
                *d += gy * local(i);
            }
        } else {
            // scalar operand broadcast over the output
            gs[0] += gd.iter().enumerate().map(|(i, &gy)| gy * local(i)).sum::<f64>();
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

/// Max-subtracted softmax of one row, with the log-partition `log Σ exp`.
pub fn softmax_row(row: &[f64]) -> (Vec<f64>, f64) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    let probs = exps.iter().map(|e| e / z).collect();
    (probs, max + z.ln())
}
