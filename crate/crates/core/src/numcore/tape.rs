//! Reverse-mode differentiation over [`Tensor`] values.
//!
//! A [`Tape`] records every primitive as a node whose inputs precede it, so
//! node order is already a topological order and [`Tape::backward`] walks it
//! in reverse. Leaves may borrow their value (model parameters are never
//! copied onto a tape). Nodes that do not depend on any gradient-requiring
//! leaf are skipped during the backward sweep.
//!
//! ```
//! use posasc::numcore::{Tape, Tensor};
//!
//! let tape = Tape::new();
//! let x = tape.leaf_owned(Tensor::scalar(3.0), true);
//! let y = tape.mul(x, x).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[6.0]);
//! ```

use std::borrow::Cow;
use std::cell::{Ref, RefCell};

use super::{NumError, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    /// `a · b` or `a · bᵀ`.
    MatMul { a: Var, b: Var, trans_b: bool },
    Add(Var, Var),
    /// `a + 1ᵀ·row`: a `1 × c` row broadcast over every row of `a`.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleRows(Var, Vec<f64>),
    Sigmoid(Var),
    Tanh(Var),
    Rows { a: Var, start: usize },
    Cols { a: Var, start: usize },
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Transpose(Var),
    MeanRows(Var),
    RepeatRows(Var),
    Softmax(Var),
    Gather { table: Var, indices: Vec<usize> },
    CrossEntropy { logits: Var, gold: usize },
    Sum(Var),
    Pick { a: Var, row: usize, col: usize },
}

struct Node<'a> {
    value: Cow<'a, Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Recording of one forward computation.
#[derive(Default)]
pub struct Tape<'a> {
    nodes: RefCell<Vec<Node<'a>>>,
}

/// Gradients produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// require a gradient or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

fn shape_err(op: &str, a: &Tensor, b: &Tensor) -> NumError {
    NumError::Shape(format!("{op}: {:?} vs {:?}", a.shape(), b.shape()))
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Row-wise stabilized softmax; masked columns are exactly zero.
pub(crate) fn softmax_rows(x: &Tensor, mask: Option<&[bool]>) -> Result<Tensor, NumError> {
    let cols = x.cols();
    if let Some(m) = mask {
        if m.len() != cols {
            return Err(NumError::Shape(format!(
                "softmax mask has {} entries for {cols} columns",
                m.len()
            )));
        }
    }
    let keep = |j: usize| mask.is_none_or(|m| m[j]);
    if cols == 0 || !(0..cols).any(keep) {
        return Err(NumError::AllMasked);
    }
    let mut out = Tensor::zeros(x.rows(), cols);
    for r in 0..x.rows() {
        let row = x.row_slice(r);
        let max = (0..cols)
            .filter(|&j| keep(j))
            .map(|j| row[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let dst = out.row_slice_mut(r);
        let mut total = 0.0;
        for j in 0..cols {
            if keep(j) {
                let e = (row[j] - max).exp();
                dst[j] = e;
                total += e;
            }
        }
        for v in dst.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Cow<'a, Tensor>, op: Op, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    fn derived(&self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let rg = self.needs(inputs);
        self.push(Cow::Owned(value), op, rg)
    }

    /// A leaf whose value is borrowed for the lifetime of the tape.
    pub fn leaf(&self, value: &'a Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Borrowed(value), Op::Leaf, requires_grad)
    }

    pub fn leaf_owned(&self, value: Tensor, requires_grad: bool) -> Var {
        self.push(Cow::Owned(value), Op::Leaf, requires_grad)
    }

    pub fn constant(&self, value: Tensor) -> Var {
        self.leaf_owned(value, false)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| n[v.0].value.as_ref())
    }

    pub fn shape(&self, v: Var) -> [usize; 2] {
        let t = self.value(v);
        [t.rows(), t.cols()]
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, NumError> {
        self.matmul_impl(a, b, false)
    }

    /// `a · bᵀ` without materializing the transpose.
    pub fn matmul_nt(&self, a: Var, b: Var) -> Result<Var, NumError> {
        self.matmul_impl(a, b, true)
    }

    fn matmul_impl(&self, a: Var, b: Var, trans_b: bool) -> Result<Var, NumError> {
        let out = {
            let (ta, tb) = (self.value(a), self.value(b));
            let (k, n) = if trans_b {
                (tb.cols(), tb.rows())
            } else {
                (tb.rows(), tb.cols())
            };
            if ta.cols() != k {
                return Err(shape_err("matmul", &ta, &tb));
            }
            let mut out = Tensor::zeros(ta.rows(), n);
            Tensor::gemm_into(&ta, false, &tb, trans_b, &mut out, 0.0);
            out
        };
        Ok(self.derived(out, Op::MatMul { a, b, trans_b }, &[a, b]))
    }

    fn zip(&self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, NumError> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, &ta, &tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_vec(ta.rows(), ta.cols(), data)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip(a, b, "add", |x, y| x + y)?;
        Ok(self.derived(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip(a, b, "sub", |x, y| x - y)?;
        Ok(self.derived(out, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var, NumError> {
        let out = self.zip(a, b, "mul", |x, y| x * y)?;
        Ok(self.derived(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn add_row(&self, a: Var, row: Var) -> Result<Var, NumError> {
        let out = {
            let (ta, tr) = (self.value(a), self.value(row));
            if tr.rows() != 1 || tr.cols() != ta.cols() {
                return Err(shape_err("add_row", &ta, &tr));
            }
            let mut out = ta.clone();
            for r in 0..out.rows() {
                for (x, b) in out.row_slice_mut(r).iter_mut().zip(tr.data()) {
                    *x += b;
                }
            }
            out
        };
        Ok(self.derived(out, Op::AddRow(a, row), &[a, row]))
    }

    pub fn scale(&self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x * k);
        self.derived(out, Op::Scale(a, k), &[a])
    }

    /// Multiplies row `i` of `a` by the constant `factors[i]`.
    pub fn scale_rows(&self, a: Var, factors: &[f64]) -> Result<Var, NumError> {
        let out = {
            let ta = self.value(a);
            if factors.len() != ta.rows() {
                return Err(NumError::Shape(format!(
                    "scale_rows: {} factors for {} rows",
                    factors.len(),
                    ta.rows()
                )));
            }
            let mut out = ta.clone();
            for (r, &k) in factors.iter().enumerate() {
                for x in out.row_slice_mut(r) {
                    *x *= k;
                }
            }
            out
        };
        Ok(self.derived(out, Op::ScaleRows(a, factors.to_vec()), &[a]))
    }

    pub fn sigmoid(&self, a: Var) -> Var {
        let out = self.value(a).map(sigmoid);
        self.derived(out, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&self, a: Var) -> Var {
        let out = self.value(a).map(f64::tanh);
        self.derived(out, Op::Tanh(a), &[a])
    }

    /// Rows `start..start + len`.
    pub fn rows(&self, a: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let out = {
            let ta = self.value(a);
            if start + len > ta.rows() {
                return Err(NumError::Shape(format!(
                    "rows {start}..{} of {:?}",
                    start + len,
                    ta.shape()
                )));
            }
            let c = ta.cols();
            Tensor::from_vec(len, c, ta.data()[start * c..(start + len) * c].to_vec())?
        };
        Ok(self.derived(out, Op::Rows { a, start }, &[a]))
    }

    pub fn row(&self, a: Var, r: usize) -> Result<Var, NumError> {
        self.rows(a, r, 1)
    }

    /// Columns `start..start + len`.
    pub fn cols(&self, a: Var, start: usize, len: usize) -> Result<Var, NumError> {
        let out = {
            let ta = self.value(a);
            if start + len > ta.cols() {
                return Err(NumError::Shape(format!(
                    "cols {start}..{} of {:?}",
                    start + len,
                    ta.shape()
                )));
            }
            let mut out = Tensor::zeros(ta.rows(), len);
            for r in 0..ta.rows() {
                out.row_slice_mut(r)
                    .copy_from_slice(&ta.row_slice(r)[start..start + len]);
            }
            out
        };
        Ok(self.derived(out, Op::Cols { a, start }, &[a]))
    }

    pub fn concat_rows(&self, parts: &[Var]) -> Result<Var, NumError> {
        let out = {
            let vals: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
            let cols = vals.first().map_or(0, |t| t.cols());
            let mut data = Vec::new();
            let mut rows = 0;
            for t in &vals {
                if t.cols() != cols {
                    return Err(shape_err("concat_rows", &vals[0], t));
                }
                data.extend_from_slice(t.data());
                rows += t.rows();
            }
            Tensor::from_vec(rows, cols, data)?
        };
        Ok(self.derived(out, Op::ConcatRows(parts.to_vec()), parts))
    }

    pub fn concat_cols(&self, parts: &[Var]) -> Result<Var, NumError> {
        let out = {
            let vals: Vec<_> = parts.iter().map(|&p| self.value(p)).collect();
            let rows = vals.first().map_or(0, |t| t.rows());
            if let Some(bad) = vals.iter().find(|t| t.rows() != rows) {
                return Err(shape_err("concat_cols", &vals[0], bad));
            }
            let cols: usize = vals.iter().map(|t| t.cols()).sum();
            let mut out = Tensor::zeros(rows, cols);
            for r in 0..rows {
                let dst = out.row_slice_mut(r);
                let mut off = 0;
                for t in &vals {
                    dst[off..off + t.cols()].copy_from_slice(t.row_slice(r));
                    off += t.cols();
                }
            }
            out
        };
        Ok(self.derived(out, Op::ConcatCols(parts.to_vec()), parts))
    }

    pub fn transpose(&self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.derived(out, Op::Transpose(a), &[a])
    }

    /// Mean over rows: `r × c → 1 × c`.
    pub fn mean_rows(&self, a: Var) -> Result<Var, NumError> {
        let out = {
            let ta = self.value(a);
            if ta.rows() == 0 {
                return Err(NumError::Shape("mean over zero rows".into()));
            }
            let mut out = Tensor::zeros(1, ta.cols());
            for r in 0..ta.rows() {
                for (o, x) in out.data_mut().iter_mut().zip(ta.row_slice(r)) {
                    *o += x;
                }
            }
            out.scale_assign(1.0 / ta.rows() as f64);
            out
        };
        Ok(self.derived(out, Op::MeanRows(a), &[a]))
    }

    /// Broadcasts a `1 × c` row to `n × c`.
    pub fn repeat_rows(&self, a: Var, n: usize) -> Result<Var, NumError> {
        let out = {
            let ta = self.value(a);
            if ta.rows() != 1 {
                return Err(NumError::Shape(format!("repeat_rows of {:?}", ta.shape())));
            }
            let mut data = Vec::with_capacity(n * ta.cols());
            for _ in 0..n {
                data.extend_from_slice(ta.data());
            }
            Tensor::from_vec(n, ta.cols(), data)?
        };
        Ok(self.derived(out, Op::RepeatRows(a), &[a]))
    }

    /// Softmax of every row independently; `mask[j] == false` zeroes column `j`.
    pub fn softmax(&self, a: Var, mask: Option<&[bool]>) -> Result<Var, NumError> {
        let out = softmax_rows(&self.value(a), mask)?;
        Ok(self.derived(out, Op::Softmax(a), &[a]))
    }

    /// Selects rows of `table` by index (embedding lookup).
    pub fn gather(&self, table: Var, indices: &[usize]) -> Result<Var, NumError> {
        let out = {
            let t = self.value(table);
            let mut out = Tensor::zeros(indices.len(), t.cols());
            for (r, &i) in indices.iter().enumerate() {
                if i >= t.rows() {
                    return Err(NumError::Shape(format!(
                        "gather index {i} out of {} rows",
                        t.rows()
                    )));
                }
                out.row_slice_mut(r).copy_from_slice(t.row_slice(i));
            }
            out
        };
        Ok(self.derived(
            out,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
            &[table],
        ))
    }

    /// `−log softmax(logits)[gold]` for a `1 × k` logit row, as a `1 × 1` node.
    pub fn cross_entropy(&self, logits: Var, gold: usize) -> Result<Var, NumError> {
        let loss = {
            let t = self.value(logits);
            if t.rows() != 1 || gold >= t.cols() {
                return Err(NumError::Shape(format!(
                    "cross_entropy on {:?} with gold {gold}",
                    t.shape()
                )));
            }
            log_sum_exp(t.data()) - t.data()[gold]
        };
        Ok(self.derived(
            Tensor::scalar(loss),
            Op::CrossEntropy { logits, gold },
            &[logits],
        ))
    }

    pub fn sum(&self, a: Var) -> Var {
        let s = self.value(a).sum();
        self.derived(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Single element as a `1 × 1` node.
    pub fn pick(&self, a: Var, row: usize, col: usize) -> Result<Var, NumError> {
        let x = {
            let t = self.value(a);
            if row >= t.rows() || col >= t.cols() {
                return Err(NumError::Shape(format!(
                    "pick ({row},{col}) of {:?}",
                    t.shape()
                )));
            }
            t.get(row, col)
        };
        Ok(self.derived(Tensor::scalar(x), Op::Pick { a, row, col }, &[a]))
    }

    /// Reverse sweep from a scalar node. Gradients accumulate additively where
    /// a node feeds several consumers.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumError> {
        let nodes = self.nodes.borrow();
        let lv = &nodes[loss.0].value;
        if lv.rows() != 1 || lv.cols() != 1 {
            return Err(NumError::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        if !nodes[loss.0].requires_grad {
            return Ok(Gradients { grads });
        }
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            let needs = |v: &Var| nodes[v.0].requires_grad;
            let val = |v: &Var| nodes[v.0].value.as_ref();
            let out = node.value.as_ref();

            match &node.op {
                Op::Leaf => {}
                Op::MatMul { a, b, trans_b } => {
                    let (ta, tb) = (val(a), val(b));
                    if needs(a) {
                        // dA = G · op(B)ᵀ
                        let mut da = Tensor::zeros(ta.rows(), ta.cols());
                        Tensor::gemm_into(&g, false, tb, !trans_b, &mut da, 0.0);
                        accumulate(&mut grads, *a, da);
                    }
                    if needs(b) {
                        let mut db = Tensor::zeros(tb.rows(), tb.cols());
                        if *trans_b {
                            // dB = Gᵀ · A
                            Tensor::gemm_into(&g, true, ta, false, &mut db, 0.0);
                        } else {
                            // dB = Aᵀ · G
                            Tensor::gemm_into(ta, true, &g, false, &mut db, 0.0);
                        }
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if needs(a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if needs(b) {
                        accumulate(&mut grads, *b, g.clone());
                    }
                }
                Op::Sub(a, b) => {
                    if needs(a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if needs(b) {
                        accumulate(&mut grads, *b, g.map(|x| -x));
                    }
                }
                Op::AddRow(a, row) => {
                    if needs(row) {
                        let mut dr = Tensor::zeros(1, g.cols());
                        for r in 0..g.rows() {
                            for (d, x) in dr.data_mut().iter_mut().zip(g.row_slice(r)) {
                                *d += x;
                            }
                        }
                        accumulate(&mut grads, *row, dr);
                    }
                    if needs(a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                }
                Op::Mul(a, b) => {
                    let (ta, tb) = (val(a), val(b));
                    if needs(a) {
                        accumulate(&mut grads, *a, hadamard(&g, tb));
                    }
                    if needs(b) {
                        accumulate(&mut grads, *b, hadamard(&g, ta));
                    }
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, g.map(|x| x * k)),
                Op::ScaleRows(a, factors) => {
                    let mut d = g.clone();
                    for (r, &k) in factors.iter().enumerate() {
                        for x in d.row_slice_mut(r) {
                            *x *= k;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Sigmoid(a) => {
                    let d = zip_with(&g, out, |gi, y| gi * y * (1.0 - y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Tanh(a) => {
                    let d = zip_with(&g, out, |gi, y| gi * (1.0 - y * y));
                    accumulate(&mut grads, *a, d);
                }
                Op::Rows { a, start } => {
                    let ta = val(a);
                    let c = ta.cols();
                    let buf = slot(&mut grads, *a, ta.rows(), c);
                    for (d, x) in buf.data_mut()[start * c..start * c + g.len()]
                        .iter_mut()
                        .zip(g.data())
                    {
                        *d += x;
                    }
                }
                Op::Cols { a, start } => {
                    let ta = val(a);
                    let buf = slot(&mut grads, *a, ta.rows(), ta.cols());
                    for r in 0..g.rows() {
                        let dst = &mut buf.row_slice_mut(r)[*start..start + g.cols()];
                        for (d, x) in dst.iter_mut().zip(g.row_slice(r)) {
                            *d += x;
                        }
                    }
                }
                Op::ConcatRows(parts) => {
                    let c = g.cols();
                    let mut off = 0;
                    for p in parts {
                        let rows = val(p).rows();
                        if needs(p) {
                            let piece =
                                Tensor::from_vec(rows, c, g.data()[off * c..(off + rows) * c].to_vec())?;
                            accumulate(&mut grads, *p, piece);
                        }
                        off += rows;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let cols = val(p).cols();
                        if needs(p) {
                            let mut piece = Tensor::zeros(g.rows(), cols);
                            for r in 0..g.rows() {
                                piece
                                    .row_slice_mut(r)
                                    .copy_from_slice(&g.row_slice(r)[off..off + cols]);
                            }
                            accumulate(&mut grads, *p, piece);
                        }
                        off += cols;
                    }
                }
                Op::Transpose(a) => accumulate(&mut grads, *a, g.transpose()),
                Op::MeanRows(a) => {
                    let ta = val(a);
                    let k = 1.0 / ta.rows() as f64;
                    let mut d = Tensor::zeros(ta.rows(), ta.cols());
                    for r in 0..ta.rows() {
                        for (x, gi) in d.row_slice_mut(r).iter_mut().zip(g.data()) {
                            *x = gi * k;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::RepeatRows(a) => {
                    let mut d = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (x, gi) in d.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *x += gi;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Softmax(a) => {
                    // dx = y ⊙ (g − ⟨g, y⟩) per row; masked entries have y = 0.
                    let mut d = Tensor::zeros(out.rows(), out.cols());
                    for r in 0..out.rows() {
                        let y = out.row_slice(r);
                        let gr = g.row_slice(r);
                        let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for ((x, yi), gi) in d.row_slice_mut(r).iter_mut().zip(y).zip(gr) {
                            *x = yi * (gi - dot);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Gather { table, indices } => {
                    let tt = val(table);
                    let buf = slot(&mut grads, *table, tt.rows(), tt.cols());
                    for (r, &i) in indices.iter().enumerate() {
                        for (d, x) in buf.row_slice_mut(i).iter_mut().zip(g.row_slice(r)) {
                            *d += x;
                        }
                    }
                }
                Op::CrossEntropy { logits, gold } => {
                    let t = val(logits);
                    let mut p = softmax_rows(t, None)?;
                    p.data_mut()[*gold] -= 1.0;
                    let k = g.data()[0];
                    p.scale_assign(k);
                    accumulate(&mut grads, *logits, p);
                }
                Op::Sum(a) => {
                    let ta = val(a);
                    let d = Tensor::filled(ta.rows(), ta.cols(), g.data()[0]);
                    accumulate(&mut grads, *a, d);
                }
                Op::Pick { a, row, col } => {
                    let ta = val(a);
                    let buf = slot(&mut grads, *a, ta.rows(), ta.cols());
                    let c = ta.cols();
                    buf.data_mut()[row * c + col] += g.data()[0];
                }
            }
            // Leaves keep their gradient for the caller; interior nodes too,
            // so that intermediate values (e.g. embeddings) can be inspected.
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    zip_with(a, b, |x, y| x * y)
}

fn zip_with(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("zip_with on equal shapes")
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, d: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

fn slot(grads: &mut [Option<Tensor>], v: Var, rows: usize, cols: usize) -> &mut Tensor {
    grads[v.0].get_or_insert_with(|| Tensor::zeros(rows, cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_has_gradient_six_at_three() {
        let tape = Tape::new();
        let x = tape.leaf_owned(Tensor::scalar(3.0), true);
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn constant_loss_gives_no_gradient() {
        let tape = Tape::new();
        let x = tape.leaf_owned(Tensor::scalar(3.0), true);
        let c = tape.constant(Tensor::scalar(5.0));
        let g = tape.backward(c).unwrap();
        assert!(g.get(x).is_none());
    }

    #[test]
    fn unrelated_leaf_gets_no_gradient() {
        let tape = Tape::new();
        let x = tape.leaf_owned(Tensor::scalar(2.0), true);
        let y = tape.leaf_owned(Tensor::scalar(7.0), true);
        let loss = tape.scale(x, 4.0);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[4.0]);
        assert!(g.get(y).is_none());
    }

    #[test]
    fn fan_out_accumulates() {
        // loss = x + x·x at x = 2 → 1 + 2x = 5
        let tape = Tape::new();
        let x = tape.leaf_owned(Tensor::scalar(2.0), true);
        let sq = tape.mul(x, x).unwrap();
        let loss = tape.add(x, sq).unwrap();
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[5.0]);
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let tape = Tape::new();
        let x = tape.leaf_owned(Tensor::zeros(2, 2), true);
        assert!(matches!(tape.backward(x), Err(NumError::NonScalarLoss(_))));
    }

    #[test]
    fn borrowed_leaf_is_not_copied_and_differentiates() {
        let w = Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let tape = Tape::new();
        let wv = tape.leaf(&w, true);
        let x = tape.constant(Tensor::row(&[1.0, -1.0]));
        let y = tape.matmul(x, wv).unwrap();
        let s = tape.sum(y);
        let g = tape.backward(s).unwrap();
        // d/dW sum(x·W) = xᵀ·1
        assert_eq!(g.get(wv).unwrap().data(), &[1.0, 1.0, -1.0, -1.0]);
    }
}
