//! Reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! A [`Graph`] is a tape: every operation evaluates eagerly and appends a
//! node. [`Graph::backward`] walks the tape in reverse and accumulates
//! gradients for every node that (transitively) depends on a parameter or on
//! an input created with [`Graph::input`].

use std::rc::Rc;

use crate::{Matrix, ParamId, ParamStore};

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;

#[derive(Debug)]
enum Op {
    Constant,
    Input,
    Param(ParamId),
    MatMul(Var, Var),
    MatMulNT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    RepeatRows(Var),
    Scale(Var, f64),
    Gelu(Var),
    Silu(Var),
    Tanh(Var),
    /// Saved per-row reciprocal RMS.
    RmsNorm(Var, Vec<f64>),
    MaskedSoftmax(Var),
    Gather(Var, Rc<[usize]>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ConcatRows(Vec<Var>),
    SliceRows(Var, usize),
    Unfold(Var, usize),
    MeanSquare(Var),
    Sum(Var),
    /// Saved softmax probabilities.
    CrossEntropy(Var, Rc<[usize]>, Matrix),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
pub struct Gradients {
    per_node: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Matrix> {
        self.per_node.get(v.0).and_then(Option::as_ref)
    }
}

/// Gradients aggregated per parameter (a parameter used several times on
/// the tape receives the sum of its contributions).
#[derive(Clone, Debug)]
pub struct ParamGrads {
    grads: Vec<Option<Matrix>>,
}

impl ParamGrads {
    pub fn get(&self, id: ParamId) -> Option<&Matrix> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn global_norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .map(Matrix::sum_squares)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.grads.iter_mut().flatten() {
            *g = g.scale(s);
        }
    }
}

#[derive(Default)]
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

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant, false)
    }

    /// A leaf that receives gradient but is not a parameter.
    pub fn input(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Input, true)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    /// `a * b^T`
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul_nt(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMulNT(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).add(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).sub(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).hadamard(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul(a, b), rg)
    }

    /// Adds the `1 x C` row `r` to every row of `a`.
    pub fn add_row(&mut self, a: Var, r: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(r));
        assert_eq!(rv.rows(), 1, "add_row expects a single row");
        assert_eq!(av.cols(), rv.cols(), "add_row width mismatch");
        let mut value = av.clone();
        for i in 0..value.rows() {
            for (x, b) in value.row_mut(i).iter_mut().zip(rv.data()) {
                *x += b;
            }
        }
        let rg = self.rg(a) || self.rg(r);
        self.push(value, Op::AddRow(a, r), rg)
    }

    /// Multiplies every row of `a` elementwise by the `1 x C` row `r`.
    pub fn mul_row(&mut self, a: Var, r: Var) -> Var {
        let (av, rv) = (self.value(a), self.value(r));
        assert_eq!(rv.rows(), 1, "mul_row expects a single row");
        assert_eq!(av.cols(), rv.cols(), "mul_row width mismatch");
        let mut value = av.clone();
        for i in 0..value.rows() {
            for (x, b) in value.row_mut(i).iter_mut().zip(rv.data()) {
                *x *= b;
            }
        }
        let rg = self.rg(a) || self.rg(r);
        self.push(value, Op::MulRow(a, r), rg)
    }

    /// Stacks `n` copies of the `1 x C` row `r`.
    pub fn repeat_rows(&mut self, r: Var, n: usize) -> Var {
        let rv = self.value(r);
        assert_eq!(rv.rows(), 1, "repeat_rows expects a single row");
        let mut data = Vec::with_capacity(n * rv.cols());
        for _ in 0..n {
            data.extend_from_slice(rv.data());
        }
        let value = Matrix::from_vec(n, rv.cols(), data);
        let rg = self.rg(r);
        self.push(value, Op::RepeatRows(r), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, s), rg)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let value = self
            .value(a)
            .map(|x| 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh()));
        let rg = self.rg(a);
        self.push(value, Op::Gelu(a), rg)
    }

    pub fn silu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x / (1.0 + (-x).exp()));
        let rg = self.rg(a);
        self.push(value, Op::Silu(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    /// Row-wise RMS normalisation without gain: `x / sqrt(mean(x^2) + eps)`.
    pub fn rms_norm(&mut self, a: Var, eps: f64) -> Var {
        let av = self.value(a);
        let cols = av.cols().max(1) as f64;
        let mut value = av.clone();
        let mut inv = Vec::with_capacity(av.rows());
        for i in 0..value.rows() {
            let row = value.row_mut(i);
            let ms = row.iter().map(|x| x * x).sum::<f64>() / cols;
            let r = 1.0 / (ms + eps).sqrt();
            for x in row.iter_mut() {
                *x *= r;
            }
            inv.push(r);
        }
        let rg = self.rg(a);
        self.push(value, Op::RmsNorm(a, inv), rg)
    }

    /// Row-wise softmax over the entries where `allowed` is true; the rest
    /// are exactly zero. `allowed` is row-major with the shape of `a`, and
    /// every row must allow at least one entry.
    pub fn masked_softmax(&mut self, a: Var, allowed: Option<Rc<[bool]>>) -> Var {
        let av = self.value(a);
        let (rows, cols) = av.shape();
        if let Some(m) = &allowed {
            assert_eq!(m.len(), rows * cols, "softmax mask shape mismatch");
        }
        let mut value = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let src = av.row(i);
            let ok = |j: usize| allowed.as_ref().is_none_or(|m| m[i * cols + j]);
            let max = (0..cols)
                .filter(|&j| ok(j))
                .map(|j| src[j])
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(max.is_finite() || max.is_nan(), "softmax row {i} fully masked");
            let dst = value.row_mut(i);
            let mut z = 0.0;
            for j in 0..cols {
                if ok(j) {
                    let e = (src[j] - max).exp();
                    dst[j] = e;
                    z += e;
                }
            }
            for d in dst.iter_mut() {
                *d /= z;
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::MaskedSoftmax(a), rg)
    }

    /// Row lookup: output row `i` is `table[indices[i]]`.
    pub fn gather(&mut self, table: Var, indices: impl Into<Rc<[usize]>>) -> Var {
        let indices: Rc<[usize]> = indices.into();
        let tv = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * tv.cols());
        for &i in indices.iter() {
            assert!(i < tv.rows(), "gather index {i} out of range {}", tv.rows());
            data.extend_from_slice(tv.row(i));
        }
        let value = Matrix::from_vec(indices.len(), tv.cols(), data);
        let rg = self.rg(table);
        self.push(value, Op::Gather(table, indices), rg)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::concat_cols(&mats);
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice_cols(start, end);
        let rg = self.rg(a);
        self.push(value, Op::SliceCols(a, start), rg)
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::concat_rows(&mats);
        let rg = parts.iter().any(|&p| self.rg(p));
        self.push(value, Op::ConcatRows(parts.to_vec()), rg)
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let value = self.value(a).slice_rows(start, end);
        let rg = self.rg(a);
        self.push(value, Op::SliceRows(a, start), rg)
    }

    /// Temporal im2col: row `t` of the output is the concatenation of rows
    /// `t - k/2 ..= t + k/2` of `a`, zero-padded at the ends. `kernel` is odd.
    pub fn unfold(&mut self, a: Var, kernel: usize) -> Var {
        assert!(kernel % 2 == 1, "unfold kernel must be odd");
        let av = self.value(a);
        let (n, c) = av.shape();
        let half = (kernel / 2) as isize;
        let mut value = Matrix::zeros(n, kernel * c);
        for t in 0..n {
            let dst = value.row_mut(t);
            for k in 0..kernel {
                let s = t as isize + k as isize - half;
                if s >= 0 && (s as usize) < n {
                    dst[k * c..(k + 1) * c].copy_from_slice(av.row(s as usize));
                }
            }
        }
        let rg = self.rg(a);
        self.push(value, Op::Unfold(a, kernel), rg)
    }

    /// Mean of squared entries, as a `1 x 1` scalar.
    pub fn mean_square(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Matrix::scalar(av.sum_squares() / av.len().max(1) as f64);
        let rg = self.rg(a);
        self.push(value, Op::MeanSquare(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(value, Op::Sum(a), rg)
    }

    /// Mean softmax cross-entropy of `logits` (one row per example) against
    /// integer `labels`.
    pub fn cross_entropy(&mut self, logits: Var, labels: impl Into<Rc<[usize]>>) -> Var {
        let labels: Rc<[usize]> = labels.into();
        let lv = self.value(logits);
        assert_eq!(lv.rows(), labels.len(), "cross_entropy label count mismatch");
        let mut probs = lv.clone();
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            assert!(y < lv.cols(), "label {y} outside {} classes", lv.cols());
            let row = probs.row_mut(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                z += *x;
            }
            for x in row.iter_mut() {
                *x /= z;
            }
            loss -= row[y].max(f64::MIN_POSITIVE).ln();
        }
        let n = labels.len().max(1) as f64;
        let rg = self.rg(logits);
        self.push(
            Matrix::scalar(loss / n),
            Op::CrossEntropy(logits, labels, probs),
            rg,
        )
    }

    /// Back-propagates from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.shape(loss), (1, 1), "backward from non-scalar node");
        let mut grads: Vec<Option<Matrix>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            match &node.op {
                Op::Constant | Op::Input | Op::Param(_) => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.rg(*a) {
                        let da = g.matmul_nt(self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.rg(*b) {
                        let db = self.value(*a).matmul_tn(&g);
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::MatMulNT(a, b) => {
                    if self.rg(*a) {
                        let da = g.matmul(self.value(*b));
                        accumulate(&mut grads, *a, da);
                    }
                    if self.rg(*b) {
                        let db = g.matmul_tn(self.value(*a));
                        accumulate(&mut grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g.clone());
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.scale(-1.0));
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g.hadamard(self.value(*b)));
                    }
                    if self.rg(*b) {
                        accumulate(&mut grads, *b, g.hadamard(self.value(*a)));
                    }
                }
                Op::AddRow(a, r) => {
                    if self.rg(*r) {
                        accumulate(&mut grads, *r, g.col_sums());
                    }
                    if self.rg(*a) {
                        accumulate(&mut grads, *a, g);
                    }
                }
                Op::MulRow(a, r) => {
                    let rv = self.value(*r);
                    if self.rg(*r) {
                        let prod = g.hadamard(self.value(*a));
                        accumulate(&mut grads, *r, prod.col_sums());
                    }
                    if self.rg(*a) {
                        let mut da = g;
                        for i in 0..da.rows() {
                            for (x, s) in da.row_mut(i).iter_mut().zip(rv.data()) {
                                *x *= s;
                            }
                        }
                        accumulate(&mut grads, *a, da);
                    }
                }
                Op::RepeatRows(r) => accumulate(&mut grads, *r, g.col_sums()),
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.scale(*s)),
                Op::Gelu(a) => {
                    let x = self.value(*a);
                    let da = g.zip_map(x, |gy, x| {
                        let u = GELU_C * (x + GELU_A * x * x * x);
                        let t = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
                        gy * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::Silu(a) => {
                    let x = self.value(*a);
                    let da = g.zip_map(x, |gy, x| {
                        let s = 1.0 / (1.0 + (-x).exp());
                        gy * s * (1.0 + x * (1.0 - s))
                    });
                    accumulate(&mut grads, *a, da);
                }
                Op::Tanh(a) => {
                    let y = &node.value;
                    let da = g.zip_map(y, |gy, y| gy * (1.0 - y * y));
                    accumulate(&mut grads, *a, da);
                }
                Op::RmsNorm(a, inv) => {
                    let y = &node.value;
                    let cols = y.cols().max(1) as f64;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let dot = gy.iter().zip(yy).map(|(a, b)| a * b).sum::<f64>() / cols;
                        for (j, d) in da.row_mut(i).iter_mut().enumerate() {
                            *d = (gy[j] - yy[j] * dot) * inv[i];
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                // Masked probabilities are exactly zero, so the usual
                // softmax Jacobian already yields zero gradient there.
                Op::MaskedSoftmax(a) => {
                    let y = &node.value;
                    let mut da = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let (gy, yy) = (g.row(i), y.row(i));
                        let dot: f64 = gy.iter().zip(yy).map(|(a, b)| a * b).sum();
                        for (j, d) in da.row_mut(i).iter_mut().enumerate() {
                            *d = yy[j] * (gy[j] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Gather(table, indices) => {
                    let tv = self.value(*table);
                    let mut dt = Matrix::zeros(tv.rows(), tv.cols());
                    for (i, &row) in indices.iter().enumerate() {
                        for (d, s) in dt.row_mut(row).iter_mut().zip(g.row(i)) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *table, dt);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        if self.rg(p) {
                            accumulate(&mut grads, p, g.slice_cols(start, start + w));
                        }
                        start += w;
                    }
                }
                Op::SliceCols(a, start) => {
                    let av = self.value(*a);
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    for i in 0..g.rows() {
                        da.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for &p in parts {
                        let h = self.value(p).rows();
                        if self.rg(p) {
                            accumulate(&mut grads, p, g.slice_rows(start, start + h));
                        }
                        start += h;
                    }
                }
                Op::SliceRows(a, start) => {
                    let av = self.value(*a);
                    let mut da = Matrix::zeros(av.rows(), av.cols());
                    for i in 0..g.rows() {
                        da.row_mut(start + i).copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::Unfold(a, kernel) => {
                    let av = self.value(*a);
                    let (n, c) = av.shape();
                    let half = (*kernel / 2) as isize;
                    let mut da = Matrix::zeros(n, c);
                    for t in 0..n {
                        let src = g.row(t);
                        for k in 0..*kernel {
                            let s = t as isize + k as isize - half;
                            if s >= 0 && (s as usize) < n {
                                for (d, v) in da
                                    .row_mut(s as usize)
                                    .iter_mut()
                                    .zip(&src[k * c..(k + 1) * c])
                                {
                                    *d += v;
                                }
                            }
                        }
                    }
                    accumulate(&mut grads, *a, da);
                }
                Op::MeanSquare(a) => {
                    let av = self.value(*a);
                    let s = 2.0 * g.item() / av.len().max(1) as f64;
                    accumulate(&mut grads, *a, av.scale(s));
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(&mut grads, *a, Matrix::filled(r, c, g.item()));
                }
                Op::CrossEntropy(logits, labels, probs) => {
                    let n = labels.len().max(1) as f64;
                    let mut d = probs.clone();
                    for (i, &y) in labels.iter().enumerate() {
                        d.row_mut(i)[y] -= 1.0;
                    }
                    accumulate(&mut grads, *logits, d.scale(g.item() / n));
                }
            }
        }
        Gradients { per_node: grads }
    }

    /// Sums gradients per parameter. The result has one slot per parameter
    /// of `store`; parameters absent from the tape get `None`.
    pub fn param_grads(&self, grads: &Gradients, store: &ParamStore) -> ParamGrads {
        let mut out: Vec<Option<Matrix>> = vec![None; store.len()];
        for (idx, node) in self.nodes.iter().enumerate() {
            if let Op::Param(id) = node.op {
                if let Some(g) = grads.per_node.get(idx).and_then(Option::as_ref) {
                    match &mut out[id.0] {
                        Some(acc) => acc.add_assign(g),
                        slot @ None => *slot = Some(g.clone()),
                    }
                }
            }
        }
        ParamGrads { grads: out }
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
