use std::sync::Arc;

use crate::params::{ParamId, ParamStore};
use crate::tensor::{matmul_nt_into, matmul_tn_into};
use crate::{DiffError, Result, Tensor};

/// Clamp added inside logarithms of probabilities.
pub const LOG_EPS: f64 = 1e-12;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Affine(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Exp(Var),
    Log(Var),
    SoftmaxRows(Var),
    CrossEntropy(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    GatherRows(Var, Vec<usize>),
    SumRows(Var),
    MeanRows(Var),
    /// Saved argmax row per column.
    MaxRows(Var, Vec<usize>),
    /// Saved argmax source row per output cell; `usize::MAX` for empty groups.
    SegmentMax(Var, Vec<usize>),
    SumAll(Var),
    SumCols(Var),
    Reshape(Var),
    Aggregate(Var, Arc<Aggregation>),
    StraightThrough(Var),
}

/// Weighted row gather: output row `i` is `Σ w · x[j]` over `(j, w)` in
/// `rows[i]`. Represents neighbor sums and means without a dense adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregation {
    pub rows: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug)]
struct Node {
    /// `None` for parameters, whose value lives in the attached store.
    value: Option<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of executed operations.
///
/// Parameters are read from the borrowed [`ParamStore`] and never copied.
#[derive(Debug)]
pub struct Tape<'p> {
    nodes: Vec<Node>,
    params: Option<&'p ParamStore>,
    param_vars: Vec<Option<Var>>,
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Tape<'p> {
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            params: None,
            param_vars: Vec::new(),
        }
    }

    pub fn with_params(params: &'p ParamStore) -> Self {
        Self {
            nodes: Vec::new(),
            params: Some(params),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self
                .params
                .expect("param node without store")
                .get(*id),
            _ => unreachable!("node without value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn check(&self, v: Var) -> Result<()> {
        if v.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(DiffError::UnknownVar(v.0))
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value: Some(value),
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A value that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    /// A free input that receives a gradient but is not a stored parameter.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Variable bound to a stored parameter. Repeated calls return the same
    /// variable, so gradients of every use land in one place.
    pub fn param(&mut self, id: ParamId) -> Result<Var> {
        let store = self.params.ok_or(DiffError::NoParams)?;
        if id.index() >= store.len() {
            return Err(DiffError::IndexOutOfRange {
                op: "param",
                index: id.index(),
                len: store.len(),
            });
        }
        if let Some(v) = self.param_vars[id.index()] {
            return Ok(v);
        }
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.index()] = Some(v);
        Ok(v)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check(a)?;
        self.check(b)?;
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.needs(&[a]);
        self.push(out, Op::Transpose(a), rg)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a), self.value(b));
        if sa.rows() != sb.rows() || sa.cols() != sb.cols() {
            return Err(DiffError::ShapeMismatch {
                op,
                left: sa.shape().to_vec(),
                right: sb.shape().to_vec(),
            });
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let va = self.value(a);
        let vb = self.value(b);
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let out = Tensor::new(va.shape().to_vec(), data).expect("shape preserved");
        let rg = self.needs(&[a, b]);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let va = self.value(a);
        let vb = self.value(bias);
        if vb.len() != va.cols() {
            return Err(DiffError::ShapeMismatch {
                op: "add_bias",
                left: va.shape().to_vec(),
                right: vb.shape().to_vec(),
            });
        }
        let n = va.cols();
        let data = va
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + vb.data()[i % n])
            .collect();
        let out = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.needs(&[a, bias]);
        Ok(self.push(out, Op::AddBias(a, bias), rg))
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let out = self.value(a).map(f);
        let rg = self.needs(&[a]);
        self.push(out, op, rg)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        self.affine(a, factor, 0.0)
    }

    /// `factor · a + offset`.
    pub fn affine(&mut self, a: Var, factor: f64, offset: f64) -> Var {
        self.unary(a, Op::Affine(a, factor), |x| factor * x + offset)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, Op::Relu(a), |x| if x > 0.0 { x } else { 0.0 })
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, Op::Sigmoid(a), |x| {
            if x >= 0.0 {
                1.0 / (1.0 + (-x).exp())
            } else {
                let e = x.exp();
                e / (1.0 + e)
            }
        })
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    /// Natural logarithm; inputs must be positive.
    pub fn log(&mut self, a: Var) -> Var {
        self.unary(a, Op::Log(a), f64::ln)
    }

    /// Row-wise softmax with per-row max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.cols();
        let mut data = va.data().to_vec();
        for row in data.chunks_mut(n) {
            softmax_in_place(row);
        }
        let out = Tensor::new(va.shape().to_vec(), data).expect("shape preserved");
        let rg = self.needs(&[a]);
        self.push(out, Op::SoftmaxRows(a), rg)
    }

    /// `-ln(probs[target] + LOG_EPS)` for a probability vector.
    pub fn cross_entropy(&mut self, probs: Var, target: usize) -> Result<Var> {
        let vp = self.value(probs);
        if target >= vp.len() {
            return Err(DiffError::IndexOutOfRange {
                op: "cross_entropy",
                index: target,
                len: vp.len(),
            });
        }
        let loss = -(vp.data()[target] + LOG_EPS).ln();
        let rg = self.needs(&[probs]);
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(probs, target), rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(DiffError::ShapeMismatch {
            op: "concat_cols",
            left: vec![],
            right: vec![],
        })?;
        let m = self.value(*first).rows();
        for &p in parts {
            if self.value(p).rows() != m {
                return Err(DiffError::ShapeMismatch {
                    op: "concat_cols",
                    left: self.value(*first).shape().to_vec(),
                    right: self.value(p).shape().to_vec(),
                });
            }
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(m * total);
        for r in 0..m {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let out = Tensor::new(vec![m, total], data)?;
        let rg = self.needs(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or(DiffError::ShapeMismatch {
            op: "concat_rows",
            left: vec![],
            right: vec![],
        })?;
        let n = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let vp = self.value(p);
            if vp.cols() != n {
                return Err(DiffError::ShapeMismatch {
                    op: "concat_rows",
                    left: self.value(*first).shape().to_vec(),
                    right: vp.shape().to_vec(),
                });
            }
            rows += vp.rows();
            data.extend_from_slice(vp.data());
        }
        let out = Tensor::new(vec![rows, n], data)?;
        let rg = self.needs(parts);
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), rg))
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        let (m, n) = (va.rows(), va.cols());
        if start + len > n || len == 0 {
            return Err(DiffError::IndexOutOfRange {
                op: "slice_cols",
                index: start + len,
                len: n,
            });
        }
        let mut data = Vec::with_capacity(m * len);
        for r in 0..m {
            data.extend_from_slice(&va.row_slice(r)[start..start + len]);
        }
        let out = Tensor::new(vec![m, len], data)?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::SliceCols(a, start), rg))
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let va = self.value(a);
        let (m, n) = (va.rows(), va.cols());
        if start + len > m || len == 0 {
            return Err(DiffError::IndexOutOfRange {
                op: "slice_rows",
                index: start + len,
                len: m,
            });
        }
        let data = va.data()[start * n..(start + len) * n].to_vec();
        let out = Tensor::new(vec![len, n], data)?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::SliceRows(a, start), rg))
    }

    /// Embedding lookup: stacks `table[i]` for each index.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let vt = self.value(table);
        let (m, n) = (vt.rows(), vt.cols());
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            if i >= m {
                return Err(DiffError::IndexOutOfRange {
                    op: "gather_rows",
                    index: i,
                    len: m,
                });
            }
            data.extend_from_slice(vt.row_slice(i));
        }
        let out = Tensor::new(vec![indices.len(), n], data)?;
        let rg = self.needs(&[table]);
        Ok(self.push(out, Op::GatherRows(table, indices.to_vec()), rg))
    }

    /// Column sums as a `1 × n` row.
    pub fn sum_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.cols();
        let mut out = vec![0.0; n];
        for row in va.data().chunks(n) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        let rg = self.needs(&[a]);
        self.push(Tensor::row(out), Op::SumRows(a), rg)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let (m, n) = (va.rows(), va.cols());
        let mut out = vec![0.0; n];
        for row in va.data().chunks(n) {
            for (o, &x) in out.iter_mut().zip(row) {
                *o += x;
            }
        }
        for o in &mut out {
            *o /= m as f64;
        }
        let rg = self.needs(&[a]);
        self.push(Tensor::row(out), Op::MeanRows(a), rg)
    }

    /// Column maxima as a `1 × n` row; ties resolve to the first row.
    pub fn max_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.cols();
        let mut out = va.row_slice(0).to_vec();
        let mut arg = vec![0usize; n];
        for (r, row) in va.data().chunks(n).enumerate().skip(1) {
            for c in 0..n {
                if row[c] > out[c] {
                    out[c] = row[c];
                    arg[c] = r;
                }
            }
        }
        let rg = self.needs(&[a]);
        self.push(Tensor::row(out), Op::MaxRows(a, arg), rg)
    }

    /// For each group of row indices, the column-wise maximum over those rows
    /// of `a`. Empty groups produce a zero row.
    pub fn segment_max(&mut self, a: Var, groups: &[Vec<usize>]) -> Result<Var> {
        let va = self.value(a);
        let (m, n) = (va.rows(), va.cols());
        let mut out = vec![0.0; groups.len() * n];
        let mut arg = vec![usize::MAX; groups.len() * n];
        for (g, members) in groups.iter().enumerate() {
            for &r in members {
                if r >= m {
                    return Err(DiffError::IndexOutOfRange {
                        op: "segment_max",
                        index: r,
                        len: m,
                    });
                }
                let row = va.row_slice(r);
                for c in 0..n {
                    let slot = g * n + c;
                    if arg[slot] == usize::MAX || row[c] > out[slot] {
                        out[slot] = row[c];
                        arg[slot] = r;
                    }
                }
            }
        }
        let out = Tensor::new(vec![groups.len(), n], out)?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::SegmentMax(a, arg), rg))
    }

    /// Sum of all entries as a scalar.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).sum();
        let rg = self.needs(&[a]);
        self.push(Tensor::scalar(s), Op::SumAll(a), rg)
    }

    /// Row sums as an `m × 1` column.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let n = va.cols();
        let out: Vec<f64> = va.data().chunks(n).map(|r| r.iter().sum()).collect();
        let m = out.len();
        let out = Tensor::new(vec![m, 1], out).expect("shape matches");
        let rg = self.needs(&[a]);
        self.push(out, Op::SumCols(a), rg)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshape(shape.to_vec())?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::Reshape(a), rg))
    }

    /// Applies a weighted row gather; see [`Aggregation`].
    pub fn aggregate(&mut self, a: Var, agg: &Arc<Aggregation>) -> Result<Var> {
        let va = self.value(a);
        let (m, n) = (va.rows(), va.cols());
        let mut out = vec![0.0; agg.rows.len() * n];
        for (i, members) in agg.rows.iter().enumerate() {
            let dst = &mut out[i * n..(i + 1) * n];
            for &(j, w) in members {
                if j >= m {
                    return Err(DiffError::IndexOutOfRange {
                        op: "aggregate",
                        index: j,
                        len: m,
                    });
                }
                for (o, &x) in dst.iter_mut().zip(va.row_slice(j)) {
                    *o += w * x;
                }
            }
        }
        let out = Tensor::new(vec![agg.rows.len(), n], out)?;
        let rg = self.needs(&[a]);
        Ok(self.push(out, Op::Aggregate(a, Arc::clone(agg)), rg))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum_all(a);
        self.scale(s, 1.0 / n)
    }

    /// Forward value is `forward`; the backward pass treats the output as if
    /// it were `soft` (the straight-through estimator).
    pub fn straight_through(&mut self, soft: Var, forward: Tensor) -> Result<Var> {
        let vs = self.value(soft);
        if vs.shape() != forward.shape() {
            return Err(DiffError::ShapeMismatch {
                op: "straight_through",
                left: vs.shape().to_vec(),
                right: forward.shape().to_vec(),
            });
        }
        let rg = self.needs(&[soft]);
        Ok(self.push(forward, Op::StraightThrough(soft), rg))
    }

    /// Reverse pass from a scalar `loss`, visiting operations in exact
    /// reverse recording order.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.check(loss)?;
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(DiffError::NotScalar(lv.shape().to_vec()));
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
            if matches!(node.op, Op::Leaf | Op::Param(_) | Op::Constant) {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(idx, &g, &mut grads);
        }

        let mut out = Gradients {
            by_node: vec![None; self.nodes.len()],
            by_param: vec![None; self.param_vars.len()],
        };
        for (idx, node) in self.nodes.iter().enumerate().take(loss.0 + 1) {
            match node.op {
                Op::Leaf => {
                    if let Some(g) = grads[idx].take() {
                        let shape = self.value(Var(idx)).shape().to_vec();
                        out.by_node[idx] = Some(Tensor::new(shape, g)?);
                    }
                }
                Op::Param(id) => {
                    if let Some(g) = grads[idx].take() {
                        let shape = self.value(Var(idx)).shape().to_vec();
                        out.by_param[id.index()] = Some(Tensor::new(shape, g)?);
                    }
                }
                _ => {}
            }
        }
        Ok(out)
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = self.value(Var(idx));
        let node = &self.nodes[idx];
        match &node.op {
            Op::Constant | Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (va.rows(), va.cols(), vb.cols());
                if self.nodes[a.0].requires_grad {
                    let ga = slot(grads, *a, va.len());
                    matmul_nt_into(g, vb.data(), ga, m, k, n);
                }
                if self.nodes[b.0].requires_grad {
                    let gb = slot(grads, *b, vb.len());
                    matmul_tn_into(va.data(), g, gb, m, k, n);
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (out.rows(), out.cols());
                let ga = slot(grads, *a, m * n);
                // out is m×n, input is n×m.
                for i in 0..m {
                    for j in 0..n {
                        ga[j * m + i] += g[i * n + j];
                    }
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g, |x| x);
                self.accumulate(grads, *b, g, |x| x);
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g, |x| x);
                self.accumulate(grads, *b, g, |x| -x);
            }
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g, |x| x);
                if self.nodes[bias.0].requires_grad {
                    let n = out.cols();
                    let gb = slot(grads, *bias, n);
                    for row in g.chunks(n) {
                        for (o, &x) in gb.iter_mut().zip(row) {
                            *o += x;
                        }
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    let ga = slot(grads, *a, va.len());
                    for ((o, &gi), &bi) in ga.iter_mut().zip(g).zip(vb.data()) {
                        *o += gi * bi;
                    }
                }
                if self.nodes[b.0].requires_grad {
                    let gb = slot(grads, *b, vb.len());
                    for ((o, &gi), &ai) in gb.iter_mut().zip(g).zip(va.data()) {
                        *o += gi * ai;
                    }
                }
            }
            Op::Affine(a, factor) => {
                let f = *factor;
                self.accumulate(grads, *a, g, |x| f * x);
            }
            Op::Relu(a) => {
                let va = self.value(*a);
                let ga = slot(grads, *a, va.len());
                for ((o, &gi), &x) in ga.iter_mut().zip(g).zip(va.data()) {
                    if x > 0.0 {
                        *o += gi;
                    }
                }
            }
            Op::Sigmoid(a) => {
                let ga = slot(grads, *a, out.len());
                for ((o, &gi), &y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *o += gi * y * (1.0 - y);
                }
            }
            Op::Tanh(a) => {
                let ga = slot(grads, *a, out.len());
                for ((o, &gi), &y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *o += gi * (1.0 - y * y);
                }
            }
            Op::Exp(a) => {
                let ga = slot(grads, *a, out.len());
                for ((o, &gi), &y) in ga.iter_mut().zip(g).zip(out.data()) {
                    *o += gi * y;
                }
            }
            Op::Log(a) => {
                let va = self.value(*a);
                let ga = slot(grads, *a, va.len());
                for ((o, &gi), &x) in ga.iter_mut().zip(g).zip(va.data()) {
                    *o += gi / x;
                }
            }
            Op::SoftmaxRows(a) => {
                let n = out.cols();
                let ga = slot(grads, *a, out.len());
                for ((ga_row, g_row), y_row) in ga
                    .chunks_mut(n)
                    .zip(g.chunks(n))
                    .zip(out.data().chunks(n))
                {
                    let dot: f64 = g_row.iter().zip(y_row).map(|(x, y)| x * y).sum();
                    for ((o, &gi), &yi) in ga_row.iter_mut().zip(g_row).zip(y_row) {
                        *o += yi * (gi - dot);
                    }
                }
            }
            Op::CrossEntropy(p, target) => {
                let vp = self.value(*p);
                let gp = slot(grads, *p, vp.len());
                gp[*target] += -g[0] / (vp.data()[*target] + LOG_EPS);
            }
            Op::ConcatCols(parts) => {
                let (m, total) = (out.rows(), out.cols());
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).cols();
                    if self.nodes[p.0].requires_grad {
                        let gp = slot(grads, p, m * w);
                        for r in 0..m {
                            let src = &g[r * total + offset..r * total + offset + w];
                            for (o, &x) in gp[r * w..(r + 1) * w].iter_mut().zip(src) {
                                *o += x;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.nodes[p.0].requires_grad {
                        let gp = slot(grads, p, len);
                        for (o, &x) in gp.iter_mut().zip(&g[offset..offset + len]) {
                            *o += x;
                        }
                    }
                    offset += len;
                }
            }
            Op::SliceCols(a, start) => {
                let va = self.value(*a);
                let (m, n) = (va.rows(), va.cols());
                let w = out.cols();
                let ga = slot(grads, *a, m * n);
                for r in 0..m {
                    for c in 0..w {
                        ga[r * n + start + c] += g[r * w + c];
                    }
                }
            }
            Op::SliceRows(a, start) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for (o, &x) in ga[start * n..start * n + g.len()].iter_mut().zip(g) {
                    *o += x;
                }
            }
            Op::GatherRows(table, indices) => {
                let vt = self.value(*table);
                let n = vt.cols();
                let gt = slot(grads, *table, vt.len());
                for (k, &i) in indices.iter().enumerate() {
                    for c in 0..n {
                        gt[i * n + c] += g[k * n + c];
                    }
                }
            }
            Op::SumRows(a) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for row in ga.chunks_mut(n) {
                    for (o, &x) in row.iter_mut().zip(g) {
                        *o += x;
                    }
                }
            }
            Op::MeanRows(a) => {
                let va = self.value(*a);
                let (m, n) = (va.rows(), va.cols());
                let ga = slot(grads, *a, va.len());
                for row in ga.chunks_mut(n) {
                    for (o, &x) in row.iter_mut().zip(g) {
                        *o += x / m as f64;
                    }
                }
            }
            Op::MaxRows(a, arg) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for (c, &r) in arg.iter().enumerate() {
                    ga[r * n + c] += g[c];
                }
            }
            Op::SegmentMax(a, arg) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for (cell, &r) in arg.iter().enumerate() {
                    if r != usize::MAX {
                        ga[r * n + cell % n] += g[cell];
                    }
                }
            }
            Op::SumAll(a) => {
                let g0 = g[0];
                self.accumulate(grads, *a, &vec![g0; self.value(*a).len()], |x| x);
            }
            Op::SumCols(a) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for (row, &gi) in ga.chunks_mut(n).zip(g) {
                    for o in row {
                        *o += gi;
                    }
                }
            }
            Op::Reshape(a) => {
                self.accumulate(grads, *a, g, |x| x);
            }
            Op::Aggregate(a, agg) => {
                let va = self.value(*a);
                let n = va.cols();
                let ga = slot(grads, *a, va.len());
                for (i, members) in agg.rows.iter().enumerate() {
                    let src = &g[i * n..(i + 1) * n];
                    for &(j, w) in members {
                        for (o, &x) in ga[j * n..(j + 1) * n].iter_mut().zip(src) {
                            *o += w * x;
                        }
                    }
                }
            }
            Op::StraightThrough(soft) => {
                self.accumulate(grads, *soft, g, |x| x);
            }
        }
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64], f: impl Fn(f64) -> f64) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let dst = slot(grads, v, g.len());
        for (o, &x) in dst.iter_mut().zip(g) {
            *o += f(x);
        }
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

pub(crate) fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

/// Gradients produced by [`Tape::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    by_node: Vec<Option<Tensor>>,
    by_param: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to a leaf, or `None` when the loss does not
    /// depend on it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.by_node.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.by_param.get(id.index()).and_then(Option::as_ref)
    }

    /// One gradient per stored parameter, zero-filled where unreachable.
    pub fn dense(&self, store: &ParamStore) -> Vec<Tensor> {
        store
            .iter()
            .map(|(id, _, t)| {
                self.param(id)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(t.shape()))
            })
            .collect()
    }
}
