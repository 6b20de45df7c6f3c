//! Reverse-mode automatic differentiation over dense 2-D `f64` tensors.
//!
//! A [`Tape`] records every operation of one forward pass. Values are
//! immutable once recorded; [`Tape::backward`] walks the record in reverse
//! and returns gradients for every variable that requires them, including
//! the parameters pulled in from a [`ParamStore`].
//!
//! Everything is rank-2: a vector is a `1 x d` row, a token set is `n x d`.
//! Elementwise binary operations broadcast singleton rows/columns.

mod params;

pub use params::{Init, ParamId, ParamStore};

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

pub type Tensor = Array2<f64>;

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Offset(usize),
    Relu(usize),
    LeakyRelu(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Softmax(usize),
    NormRows(usize, f64),
    NormCols(usize, f64),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    SliceCols(usize, usize),
    SliceRows(usize, usize),
    Gather(usize, Arc<Vec<usize>>),
    SumRows(usize),
    SumCols(usize),
    MaxRows(usize, Vec<usize>),
    SumAll(usize),
    Transpose(usize),
    Reshape(usize),
    Unfold(usize, usize),
    EdgeMessage {
        mats: usize,
        nodes: usize,
        edges: Arc<Vec<(usize, usize)>>,
    },
    BceLogits(usize, Arc<Vec<f64>>),
    Mse(usize, Arc<Vec<f64>>),
    CrossEntropy(usize, Arc<Vec<usize>>),
}

struct Node {
    value: Arc<Tensor>,
    op: Op,
    requires_grad: bool,
}

/// Record of one forward computation.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (r, c) = self.shape();
        write!(f, "Var#{}({r}x{c})", self.id)
    }
}

/// Gradients produced by [`Tape::backward`].
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, var: Var<'_>) -> Option<&Tensor> {
        self.nodes.get(var.id).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor> {
        self.params.get(id.0).and_then(Option::as_ref)
    }

    pub fn into_params(self) -> Vec<Option<Tensor>> {
        self.params
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        self.push_arc(Arc::new(value), op, requires_grad)
    }

    fn push_arc(&self, value: Arc<Tensor>, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Arc<Tensor> {
        Arc::clone(&self.nodes.borrow()[id].value)
    }

    fn needs(&self, id: usize) -> bool {
        self.nodes.borrow()[id].requires_grad
    }

    /// A value that never receives a gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false)
    }

    pub fn constant_arc(&self, value: Arc<Tensor>) -> Var<'_> {
        self.push_arc(value, Op::Leaf, false)
    }

    /// An input whose gradient is reported by [`Gradients::wrt`].
    pub fn variable(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true)
    }

    pub fn row_vector(&self, values: &[f64]) -> Var<'_> {
        self.constant(Array2::from_shape_vec((1, values.len()), values.to_vec()).unwrap())
    }

    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        self.push_arc(store.value_arc(id), Op::Param(id), store.is_trainable(id))
    }

    /// Reverse sweep from a scalar (`1 x 1`) loss.
    pub fn backward(&self, loss: Var<'_>, n_params: usize) -> Gradients {
        let nodes = self.nodes.borrow();
        assert_eq!(nodes[loss.id].value.dim(), (1, 1), "backward needs a 1x1 loss");
        let mut grads: Vec<Option<Tensor>> = (0..nodes.len()).map(|_| None).collect();
        let mut params: Vec<Option<Tensor>> = (0..n_params).map(|_| None).collect();
        grads[loss.id] = Some(Array2::ones((1, 1)));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let val = |i: usize| &nodes[i].value;
            let mut send = |i: usize, delta: Tensor| {
                if !nodes[i].requires_grad {
                    return;
                }
                match &mut grads[i] {
                    Some(acc) => *acc += &delta,
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::Param(pid) => {
                    match &mut params[pid.0] {
                        Some(acc) => *acc += &g,
                        slot => *slot = Some(g.clone()),
                    }
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        send(*a, g.dot(&val(*b).t()));
                    }
                    if nodes[*b].requires_grad {
                        send(*b, val(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    let ga = unbroadcast(&g, val(*a).dim());
                    let gb = unbroadcast(&g, val(*b).dim());
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Sub(a, b) => {
                    let ga = unbroadcast(&g, val(*a).dim());
                    let gb = unbroadcast(&g, val(*b).dim()).mapv(|v| -v);
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (val(*a), val(*b));
                    if nodes[*a].requires_grad {
                        send(*a, unbroadcast(&(&g * &**vb), va.dim()));
                    }
                    if nodes[*b].requires_grad {
                        send(*b, unbroadcast(&(&g * &**va), vb.dim()));
                    }
                }
                Op::Scale(a, c) => send(*a, g.mapv(|v| v * c)),
                Op::Offset(a) => send(*a, g),
                Op::Relu(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&**val(*a))
                        .for_each(|d, &x| if x <= 0.0 { *d = 0.0 });
                    send(*a, d);
                }
                Op::LeakyRelu(a, slope) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&**val(*a))
                        .for_each(|d, &x| if x <= 0.0 { *d *= slope });
                    send(*a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&*node.value)
                        .for_each(|d, &y| *d *= y * (1.0 - y));
                    send(*a, d);
                }
                Op::Tanh(a) => {
                    let mut d = g;
                    Zip::from(&mut d)
                        .and(&*node.value)
                        .for_each(|d, &y| *d *= 1.0 - y * y);
                    send(*a, d);
                }
                Op::Exp(a) => send(*a, &g * &*node.value),
                Op::Softmax(a) => {
                    let y = &*node.value;
                    let mut d = &g * y;
                    for (mut drow, yrow) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot: f64 = drow.sum();
                        Zip::from(&mut drow)
                            .and(&yrow)
                            .for_each(|d, &yv| *d -= yv * dot);
                    }
                    send(*a, d);
                }
                Op::NormRows(a, eps) => send(*a, norm_backward(val(*a), &g, *eps, Axis(1))),
                Op::NormCols(a, eps) => send(*a, norm_backward(val(*a), &g, *eps, Axis(0))),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let w = val(p).ncols();
                        send(p, g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let h = val(p).nrows();
                        send(p, g.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(val(*a).dim());
                    let w = g.ncols();
                    d.slice_mut(s![.., *start..*start + w]).assign(&g);
                    send(*a, d);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Array2::zeros(val(*a).dim());
                    let h = g.nrows();
                    d.slice_mut(s![*start..*start + h, ..]).assign(&g);
                    send(*a, d);
                }
                Op::Gather(a, idx) => {
                    let mut d = Array2::zeros(val(*a).dim());
                    for (r, &src) in idx.iter().enumerate() {
                        let mut dst = d.row_mut(src);
                        dst += &g.row(r);
                    }
                    send(*a, d);
                }
                Op::SumRows(a) => {
                    let n = val(*a).nrows();
                    send(*a, g.broadcast((n, g.ncols())).unwrap().to_owned());
                }
                Op::SumCols(a) => {
                    let m = val(*a).ncols();
                    send(*a, g.broadcast((g.nrows(), m)).unwrap().to_owned());
                }
                Op::MaxRows(a, argmax) => {
                    let mut d = Array2::zeros(val(*a).dim());
                    for (c, &r) in argmax.iter().enumerate() {
                        d[[r, c]] = g[[0, c]];
                    }
                    send(*a, d);
                }
                Op::SumAll(a) => {
                    let dim = val(*a).dim();
                    send(*a, Array2::from_elem(dim, g[[0, 0]]));
                }
                Op::Transpose(a) => send(*a, g.t().to_owned()),
                Op::Reshape(a) => {
                    let dim = val(*a).dim();
                    let flat: Vec<f64> = g.iter().copied().collect();
                    send(*a, Array2::from_shape_vec(dim, flat).unwrap());
                }
                Op::Unfold(a, k) => {
                    let x = val(*a);
                    let c = x.ncols();
                    let mut d = Array2::zeros(x.dim());
                    for t in 0..g.nrows() {
                        for j in 0..*k {
                            let mut dst = d.row_mut(t + j);
                            dst += &g.slice(s![t, j * c..(j + 1) * c]);
                        }
                    }
                    send(*a, d);
                }
                Op::EdgeMessage { mats, nodes: h, edges } => {
                    let (ev, hv) = (val(*mats), val(*h));
                    let dim = hv.ncols();
                    if nodes[*mats].requires_grad {
                        let mut de = Array2::zeros(ev.dim());
                        for (e, &(i, j)) in edges.iter().enumerate() {
                            for p in 0..dim {
                                let gi = g[[i, p]];
                                for q in 0..dim {
                                    de[[e, p * dim + q]] = gi * hv[[j, q]];
                                }
                            }
                        }
                        send(*mats, de);
                    }
                    if nodes[*h].requires_grad {
                        let mut dh = Array2::zeros(hv.dim());
                        for (e, &(i, j)) in edges.iter().enumerate() {
                            for p in 0..dim {
                                let gi = g[[i, p]];
                                for q in 0..dim {
                                    dh[[j, q]] += ev[[e, p * dim + q]] * gi;
                                }
                            }
                        }
                        send(*h, dh);
                    }
                }
                Op::BceLogits(a, targets) => {
                    let x = val(*a);
                    let n = x.len() as f64;
                    let scale = g[[0, 0]] / n;
                    let mut d = Array2::zeros(x.dim());
                    for ((dv, &xv), &t) in d.iter_mut().zip(x.iter()).zip(targets.iter()) {
                        *dv = (sigmoid(xv) - t) * scale;
                    }
                    send(*a, d);
                }
                Op::Mse(a, targets) => {
                    let x = val(*a);
                    let n = x.len() as f64;
                    let scale = g[[0, 0]] / n;
                    let mut d = Array2::zeros(x.dim());
                    for ((dv, &xv), &t) in d.iter_mut().zip(x.iter()).zip(targets.iter()) {
                        *dv = 2.0 * (xv - t) * scale;
                    }
                    send(*a, d);
                }
                Op::CrossEntropy(a, classes) => {
                    let x = val(*a);
                    let scale = g[[0, 0]] / x.nrows() as f64;
                    let mut d = softmax_rows(x, None);
                    for (r, &c) in classes.iter().enumerate() {
                        d[[r, c]] -= 1.0;
                    }
                    d.mapv_inplace(|v| v * scale);
                    send(*a, d);
                }
            }
        }
        Gradients {
            nodes: grads,
            params,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Sum `g` down to `dim`, undoing singleton broadcasting.
fn unbroadcast(g: &Tensor, dim: (usize, usize)) -> Tensor {
    let mut out = g.clone();
    if dim.0 == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if dim.1 == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

fn broadcast_binary(a: &Tensor, b: &Tensor, what: &str) -> (usize, usize) {
    let pick = |x: usize, y: usize| {
        if x == y || y == 1 {
            x
        } else if x == 1 {
            y
        } else {
            panic!("{what}: incompatible shapes {:?} and {:?}", a.dim(), b.dim())
        }
    };
    (pick(a.nrows(), b.nrows()), pick(a.ncols(), b.ncols()))
}

fn zip_broadcast(a: &Tensor, b: &Tensor, what: &str, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let dim = broadcast_binary(a, b, what);
    let av = a.broadcast(dim).unwrap();
    let bv = b.broadcast(dim).unwrap();
    Zip::from(&av).and(&bv).map_collect(|&x, &y| f(x, y))
}

/// Row-wise softmax; `mask[i][j] == false` entries get probability 0.
/// A fully masked row yields all zeros.
pub(crate) fn softmax_rows(x: &Tensor, mask: Option<&Array2<bool>>) -> Tensor {
    let mut out = Array2::zeros(x.dim());
    for r in 0..x.nrows() {
        let keep = |c: usize| mask.is_none_or(|m| m[[r, c]]);
        let mut max = f64::NEG_INFINITY;
        for c in 0..x.ncols() {
            if keep(c) {
                max = max.max(x[[r, c]]);
            }
        }
        if max == f64::NEG_INFINITY {
            continue;
        }
        let mut total = 0.0;
        for c in 0..x.ncols() {
            if keep(c) {
                let e = (x[[r, c]] - max).exp();
                out[[r, c]] = e;
                total += e;
            }
        }
        out.row_mut(r).mapv_inplace(|v| v / total);
    }
    out
}

/// Standardize along `axis` lanes (`Axis(1)`: each row, `Axis(0)`: each column).
fn norm_forward(x: &Tensor, eps: f64, axis: Axis) -> Tensor {
    let mut out = x.clone();
    for mut lane in out.lanes_mut(axis) {
        let n = lane.len() as f64;
        let mean = lane.sum() / n;
        let var = lane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        lane.mapv_inplace(|v| (v - mean) * inv);
    }
    out
}

fn norm_backward(x: &Tensor, g: &Tensor, eps: f64, axis: Axis) -> Tensor {
    let mut out = Array2::zeros(x.dim());
    for ((xl, gl), mut ol) in x.lanes(axis).into_iter().zip(g.lanes(axis)).zip(out.lanes_mut(axis)) {
        let n = xl.len() as f64;
        let mean = xl.sum() / n;
        let var = xl.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        let y: Vec<f64> = xl.iter().map(|v| (v - mean) * inv).collect();
        let gmean = gl.sum() / n;
        let gy = gl.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / n;
        for ((o, &gv), &yv) in ol.iter_mut().zip(gl.iter()).zip(&y) {
            *o = inv * (gv - gmean - yv * gy);
        }
    }
    out
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn value(&self) -> Arc<Tensor> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.nodes.borrow()[self.id].value.dim()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    /// Scalar value of a `1 x 1` variable.
    pub fn item(&self) -> f64 {
        let v = self.value();
        assert_eq!(v.dim(), (1, 1));
        v[[0, 0]]
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'t> {
        self.tape.push(value, op, self.tape.needs(self.id))
    }

    fn binary(&self, other: Var<'t>, value: Tensor, op: Op) -> Var<'t> {
        let rg = self.tape.needs(self.id) || self.tape.needs(other.id);
        self.tape.push(value, op, rg)
    }

    fn many(tape: &'t Tape, parts: &[Var<'t>], value: Tensor, op: Op) -> Var<'t> {
        let rg = parts.iter().any(|p| tape.needs(p.id));
        tape.push(value, op, rg)
    }

    pub fn matmul(&self, other: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), other.value());
        assert_eq!(
            a.ncols(),
            b.nrows(),
            "matmul shape mismatch {:?} x {:?}",
            a.dim(),
            b.dim()
        );
        self.binary(other, a.dot(&*b), Op::MatMul(self.id, other.id))
    }

    pub fn add(&self, other: Var<'t>) -> Var<'t> {
        let v = zip_broadcast(&self.value(), &other.value(), "add", |x, y| x + y);
        self.binary(other, v, Op::Add(self.id, other.id))
    }

    pub fn sub(&self, other: Var<'t>) -> Var<'t> {
        let v = zip_broadcast(&self.value(), &other.value(), "sub", |x, y| x - y);
        self.binary(other, v, Op::Sub(self.id, other.id))
    }

    pub fn mul(&self, other: Var<'t>) -> Var<'t> {
        let v = zip_broadcast(&self.value(), &other.value(), "mul", |x, y| x * y);
        self.binary(other, v, Op::Mul(self.id, other.id))
    }

    pub fn scale(&self, c: f64) -> Var<'t> {
        self.unary(self.value().mapv(|v| v * c), Op::Scale(self.id, c))
    }

    /// `x + c` elementwise.
    pub fn offset(&self, c: f64) -> Var<'t> {
        self.unary(self.value().mapv(|v| v + c), Op::Offset(self.id))
    }

    /// `1 - x` elementwise.
    pub fn one_minus(&self) -> Var<'t> {
        self.scale(-1.0).offset(1.0)
    }

    pub fn relu(&self) -> Var<'t> {
        self.unary(self.value().mapv(|v| v.max(0.0)), Op::Relu(self.id))
    }

    pub fn leaky_relu(&self, slope: f64) -> Var<'t> {
        let v = self
            .value()
            .mapv(|v| if v > 0.0 { v } else { v * slope });
        self.unary(v, Op::LeakyRelu(self.id, slope))
    }

    pub fn sigmoid(&self) -> Var<'t> {
        self.unary(self.value().mapv(sigmoid), Op::Sigmoid(self.id))
    }

    pub fn tanh(&self) -> Var<'t> {
        self.unary(self.value().mapv(f64::tanh), Op::Tanh(self.id))
    }

    pub fn exp(&self) -> Var<'t> {
        self.unary(self.value().mapv(f64::exp), Op::Exp(self.id))
    }

    pub fn softmax_rows(&self) -> Var<'t> {
        self.unary(softmax_rows(&self.value(), None), Op::Softmax(self.id))
    }

    /// Softmax over each row restricted to `mask`-true entries.
    pub fn masked_softmax_rows(&self, mask: &Array2<bool>) -> Var<'t> {
        assert_eq!(mask.dim(), self.shape(), "softmax mask shape");
        self.unary(softmax_rows(&self.value(), Some(mask)), Op::Softmax(self.id))
    }

    /// Zero-mean, unit-variance normalization of every row (no affine part).
    pub fn normalize_rows(&self, eps: f64) -> Var<'t> {
        let v = norm_forward(&self.value(), eps, Axis(1));
        self.unary(v, Op::NormRows(self.id, eps))
    }

    /// Zero-mean, unit-variance normalization of every column (batch statistics).
    pub fn normalize_cols(&self, eps: f64) -> Var<'t> {
        let v = norm_forward(&self.value(), eps, Axis(0));
        self.unary(v, Op::NormCols(self.id, eps))
    }

    pub fn concat_cols(parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat of nothing");
        let tape = parts[0].tape;
        if parts.len() == 1 {
            return parts[0];
        }
        let vals: Vec<Arc<Tensor>> = parts.iter().map(Var::value).collect();
        let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
        let v = ndarray::concatenate(Axis(1), &views).expect("concat_cols row mismatch");
        Var::many(tape, parts, v, Op::ConcatCols(parts.iter().map(|p| p.id).collect()))
    }

    pub fn concat_rows(parts: &[Var<'t>]) -> Var<'t> {
        assert!(!parts.is_empty(), "concat of nothing");
        let tape = parts[0].tape;
        if parts.len() == 1 {
            return parts[0];
        }
        let vals: Vec<Arc<Tensor>> = parts.iter().map(Var::value).collect();
        let views: Vec<_> = vals.iter().map(|v| v.view()).collect();
        let v = ndarray::concatenate(Axis(0), &views).expect("concat_rows column mismatch");
        Var::many(tape, parts, v, Op::ConcatRows(parts.iter().map(|p| p.id).collect()))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Var<'t> {
        let v = self.value().slice(s![.., start..start + len]).to_owned();
        self.unary(v, Op::SliceCols(self.id, start))
    }

    pub fn slice_rows(&self, start: usize, len: usize) -> Var<'t> {
        let v = self.value().slice(s![start..start + len, ..]).to_owned();
        self.unary(v, Op::SliceRows(self.id, start))
    }

    pub fn row(&self, r: usize) -> Var<'t> {
        self.slice_rows(r, 1)
    }

    /// Rows `indices[k]` stacked in order (embedding lookup, row selection).
    pub fn gather_rows(&self, indices: &[usize]) -> Var<'t> {
        let src = self.value();
        let mut out = Array2::zeros((indices.len(), src.ncols()));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&src.row(i));
        }
        self.unary(out, Op::Gather(self.id, Arc::new(indices.to_vec())))
    }

    /// Column sums as a `1 x d` row.
    pub fn sum_rows(&self) -> Var<'t> {
        let v = self.value().sum_axis(Axis(0)).insert_axis(Axis(0));
        self.unary(v, Op::SumRows(self.id))
    }

    pub fn mean_rows(&self) -> Var<'t> {
        let n = self.rows() as f64;
        self.sum_rows().scale(1.0 / n)
    }

    /// Row sums as an `n x 1` column.
    pub fn sum_cols(&self) -> Var<'t> {
        let v = self.value().sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(v, Op::SumCols(self.id))
    }

    /// Column-wise maximum over rows (`1 x d`); ties go to the first row.
    pub fn max_rows(&self) -> Var<'t> {
        let x = self.value();
        assert!(x.nrows() > 0, "max over zero rows");
        let mut argmax = vec![0usize; x.ncols()];
        let mut out = Array2::zeros((1, x.ncols()));
        for c in 0..x.ncols() {
            let mut best = 0;
            for r in 1..x.nrows() {
                if x[[r, c]] > x[[best, c]] {
                    best = r;
                }
            }
            argmax[c] = best;
            out[[0, c]] = x[[best, c]];
        }
        self.unary(out, Op::MaxRows(self.id, argmax))
    }

    pub fn sum(&self) -> Var<'t> {
        let v = Array2::from_elem((1, 1), self.value().sum());
        self.unary(v, Op::SumAll(self.id))
    }

    pub fn t(&self) -> Var<'t> {
        let v = self.value().t().to_owned();
        self.unary(v, Op::Transpose(self.id))
    }

    /// Row-major reshape.
    pub fn reshape(&self, rows: usize, cols: usize) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), rows * cols, "reshape size mismatch");
        let flat: Vec<f64> = x.iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), flat).unwrap();
        self.unary(v, Op::Reshape(self.id))
    }

    /// Sliding windows of `k` consecutive rows, each flattened into one row:
    /// `(L x C) -> ((L-k+1) x kC)`.
    pub fn unfold_rows(&self, k: usize) -> Var<'t> {
        let x = self.value();
        let (l, c) = x.dim();
        assert!(k >= 1 && k <= l, "unfold window {k} exceeds length {l}");
        let mut out = Array2::zeros((l - k + 1, k * c));
        for t in 0..=l - k {
            for j in 0..k {
                out.slice_mut(s![t, j * c..(j + 1) * c]).assign(&x.row(t + j));
            }
        }
        self.unary(out, Op::Unfold(self.id, k))
    }

    /// Edge-conditioned aggregation: row `e` of `self` holds a `d x d`
    /// matrix `A_e` (row-major); result row `i` is `sum_{e=(i,j)} A_e h_j`.
    pub fn edge_message(&self, nodes: Var<'t>, edges: Arc<Vec<(usize, usize)>>) -> Var<'t> {
        let (ev, hv) = (self.value(), nodes.value());
        let (n, d) = hv.dim();
        assert_eq!(ev.dim(), (edges.len(), d * d), "edge matrix shape");
        let mut out = Array2::zeros((n, d));
        for (e, &(i, j)) in edges.iter().enumerate() {
            for p in 0..d {
                let mut acc = 0.0;
                for q in 0..d {
                    acc += ev[[e, p * d + q]] * hv[[j, q]];
                }
                out[[i, p]] += acc;
            }
        }
        self.binary(
            nodes,
            out,
            Op::EdgeMessage {
                mats: self.id,
                nodes: nodes.id,
                edges,
            },
        )
    }

    /// Mean binary cross-entropy of logits against 0/1 targets.
    pub fn bce_with_logits(&self, targets: &[f64]) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), targets.len(), "bce target count");
        let n = x.len() as f64;
        let loss = x
            .iter()
            .zip(targets)
            .map(|(&x, &t)| x.max(0.0) - x * t + (-x.abs()).exp().ln_1p())
            .sum::<f64>()
            / n;
        self.unary(
            Array2::from_elem((1, 1), loss),
            Op::BceLogits(self.id, Arc::new(targets.to_vec())),
        )
    }

    pub fn mse(&self, targets: &[f64]) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.len(), targets.len(), "mse target count");
        let n = x.len() as f64;
        let loss = x
            .iter()
            .zip(targets)
            .map(|(&x, &t)| (x - t).powi(2))
            .sum::<f64>()
            / n;
        self.unary(
            Array2::from_elem((1, 1), loss),
            Op::Mse(self.id, Arc::new(targets.to_vec())),
        )
    }

    /// Mean categorical cross-entropy of `n x K` logits.
    pub fn cross_entropy(&self, classes: &[usize]) -> Var<'t> {
        let x = self.value();
        assert_eq!(x.nrows(), classes.len(), "cross-entropy target count");
        let mut loss = 0.0;
        for (r, &c) in classes.iter().enumerate() {
            let row = x.row(r);
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[c];
        }
        loss /= classes.len() as f64;
        self.unary(
            Array2::from_elem((1, 1), loss),
            Op::CrossEntropy(self.id, Arc::new(classes.to_vec())),
        )
    }
}

impl<'t> std::ops::Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        Var::add(&self, rhs)
    }
}

impl<'t> std::ops::Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        Var::sub(&self, rhs)
    }
}

impl<'t> std::ops::Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        Var::mul(&self, rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor) -> Tensor {
        let h = 1e-6;
        let mut g = Array2::zeros(x.dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut xp = x.clone();
            xp[[r, c]] += h;
            let mut xm = x.clone();
            xm[[r, c]] -= h;
            g[[r, c]] = (f(&xp) - f(&xm)) / (2.0 * h);
        }
        g
    }

    fn assert_close(a: &Tensor, b: &Tensor, tol: f64) {
        assert_eq!(a.dim(), b.dim());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol * (1.0 + x.abs().max(y.abs())), "{a:?}\nvs\n{b:?}");
        }
    }

    fn check(f: impl for<'t> Fn(Var<'t>) -> Var<'t>, x: Tensor) {
        let tape = Tape::new();
        let v = tape.variable(x.clone());
        let out = f(v).sum();
        let grads = tape.backward(out, 0);
        let analytic = grads.wrt(v).unwrap().clone();
        let numeric = numeric_grad(
            |xv| {
                let t = Tape::new();
                f(t.constant(xv.clone())).sum().item()
            },
            &x,
        );
        assert_close(&analytic, &numeric, 1e-6);
    }

    fn sample() -> Tensor {
        array![[0.3, -1.2, 0.7], [1.5, 0.2, -0.4]]
    }

    #[test]
    fn unary_ops_have_correct_gradients() {
        check(|v| v.relu().mul(v), sample());
        check(|v| v.leaky_relu(0.2).mul(v), sample());
        check(|v| v.sigmoid().mul(v), sample());
        check(|v| v.tanh().mul(v), sample());
        check(|v| v.exp().mul(v), sample());
        check(|v| v.softmax_rows().mul(v), sample());
        check(|v| v.normalize_rows(1e-5).mul(v), sample());
        check(|v| v.normalize_cols(1e-5).mul(v), sample());
        check(|v| v.max_rows().mul(v.sum_rows()), sample());
        check(|v| v.t().matmul(v), sample());
        check(|v| v.reshape(3, 2).matmul(v), sample());
        check(|v| v.unfold_rows(2).mul(v.unfold_rows(2)), sample().t().to_owned());
        check(|v| v.gather_rows(&[1, 0, 1]).mul(v.gather_rows(&[0, 0, 1])), sample());
        check(|v| v.sum_cols().mul(v), sample());
    }

    #[test]
    fn broadcasting_reduces_gradients() {
        let tape = Tape::new();
        let a = tape.variable(sample());
        let b = tape.variable(array![[1.0, 2.0, 3.0]]);
        let c = tape.variable(array![[2.0], [-1.0]]);
        let out = a.mul(b).add(c).sum();
        let g = tape.backward(out, 0);
        assert_close(g.wrt(b).unwrap(), &array![[1.8, -1.0, 0.3]], 1e-12);
        assert_eq!(g.wrt(c).unwrap(), &array![[3.0], [3.0]]);
    }

    #[test]
    fn masked_softmax_zeroes_masked_entries() {
        let tape = Tape::new();
        let x = tape.constant(array![[1.0, 2.0, 3.0], [0.0, 0.0, 0.0]]);
        let mask = array![[true, false, true], [false, false, false]];
        let y = x.masked_softmax_rows(&mask).value();
        assert_eq!(y[[0, 1]], 0.0);
        assert!((y.row(0).sum() - 1.0).abs() < 1e-12);
        assert_eq!(y.row(1).sum(), 0.0);
    }

    #[test]
    fn losses_match_finite_differences() {
        let x = array![[0.3], [-1.1], [2.0]];
        check(|v| v.bce_with_logits(&[1.0, 0.0, 1.0]), x.clone());
        check(|v| v.mse(&[0.5, 0.0, -1.0]), x);
        check(|v| v.cross_entropy(&[2, 0]), sample());
    }

    #[test]
    fn edge_message_gradient() {
        let edges = Arc::new(vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        let h = array![[0.5, -0.3], [0.1, 0.8], [-0.6, 0.2]];
        let mats = Array2::from_shape_fn((4, 4), |(r, c)| ((r * 4 + c) as f64 * 0.37).sin());
        let e2 = Arc::clone(&edges);
        let h2 = h.clone();
        check(
            move |m| {
                let hv = m.tape().constant(h2.clone());
                m.edge_message(hv, Arc::clone(&e2)).mul(hv)
            },
            mats.clone(),
        );
        check(
            move |hv| {
                let m = hv.tape().constant(mats.clone());
                m.edge_message(hv, Arc::clone(&edges)).mul(hv)
            },
            h,
        );
    }

    #[test]
    fn constants_receive_no_gradient() {
        let tape = Tape::new();
        let a = tape.constant(sample());
        let b = tape.variable(sample());
        let loss = a.mul(b).sum();
        let g = tape.backward(loss, 0);
        assert!(g.wrt(a).is_none());
        assert!(g.wrt(b).is_some());
    }
}
