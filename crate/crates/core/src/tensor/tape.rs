use std::cell::{Ref, RefCell};

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Index of a trainable tensor inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Owns every trainable tensor of a model together with its gradient
/// buffer. Gradient buffers always match their parameter's shape.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    #[serde(skip)]
    grads: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let id = ParamId(self.values.len());
        self.grads.push(Tensor::zeros(value.rows(), value.cols()));
        self.names.push(name.into());
        self.values.push(value);
        id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn values(&self) -> &[Tensor] {
        &self.values
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn zero_grad(&mut self) {
        self.restore_grad_buffers();
        self.grads.iter_mut().for_each(|g| g.fill(0.0));
    }

    /// Parameter values and gradients as parallel mutable/immutable views.
    pub(crate) fn split_mut(&mut self) -> (&mut [Tensor], &[Tensor]) {
        self.restore_grad_buffers();
        (&mut self.values, &self.grads)
    }

    // Deserialized stores come back without gradient buffers.
    fn restore_grad_buffers(&mut self) {
        if self.grads.len() != self.values.len() {
            self.grads = self
                .values
                .iter()
                .map(|v| Tensor::zeros(v.rows(), v.cols()))
                .collect();
        }
    }

    /// Adds tape gradients into the parameter gradient buffers.
    /// Repeated calls accumulate until [`ParamStore::zero_grad`].
    pub fn accumulate(&mut self, grads: &Gradients) {
        self.restore_grad_buffers();
        for (param, grad) in &grads.params {
            self.grads[param.0].add_assign(grad);
        }
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Scale(usize, f64),
    AddScalar(usize),
    Neg(usize),
    Relu(usize),
    Exp(usize),
    Log(usize),
    ClampMin(usize, f64),
    RowSoftmax(usize),
    RowLogSumExp(usize),
    Sum(usize),
    Mean(usize),
    SumRows(usize),
    ConcatCols(Vec<usize>),
    ConcatRows(Vec<usize>),
    GatherRows(usize, Vec<usize>),
    Transpose(usize),
    RowL2Norm(usize),
    CosineSim(usize, usize),
    SqDist(usize, usize),
    PickCols(usize, Vec<usize>),
    CumSumCols(usize),
    SliceCols(usize, usize),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    param: Option<ParamId>,
}

/// Records every operation of one forward pass. A fresh tape is built for
/// each pass; nodes are appended in evaluation order, so the node list is
/// already topologically sorted.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

const COSINE_EPS: f64 = 1e-12;

fn broadcast_shape(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Result<(usize, usize)> {
    let dim = |x: usize, y: usize| -> Option<usize> {
        if x == y || y == 1 {
            Some(x)
        } else if x == 1 {
            Some(y)
        } else {
            None
        }
    };
    match (dim(a.0, b.0), dim(a.1, b.1)) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Shape { op, lhs: a, rhs: b }),
    }
}

#[inline]
fn bget(t: &Tensor, i: usize, j: usize) -> f64 {
    let r = if t.rows() == 1 { 0 } else { i };
    let c = if t.cols() == 1 { 0 } else { j };
    t.get(r, c)
}

/// Sums a full-size gradient down to a (possibly broadcast) operand shape.
fn reduce_to(grad: &Tensor, shape: (usize, usize)) -> Tensor {
    if grad.shape() == shape {
        return grad.clone();
    }
    let mut out = Tensor::zeros(shape.0, shape.1);
    for i in 0..grad.rows() {
        for j in 0..grad.cols() {
            let r = if shape.0 == 1 { 0 } else { i };
            let c = if shape.1 == 1 { 0 } else { j };
            let v = out.get(r, c) + grad.get(i, j);
            out.set(r, c, v);
        }
    }
    out
}

fn normalize_rows(t: &Tensor) -> (Tensor, Vec<f64>) {
    let mut out = t.clone();
    let mut norms = Vec::with_capacity(t.rows());
    for r in 0..t.rows() {
        let n = t.row(r).iter().map(|v| v * v).sum::<f64>().sqrt().max(COSINE_EPS);
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    (out, norms)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.borrow().is_empty()
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool, param: Option<ParamId>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
            param,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// A leaf that receives no gradient.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, false, None)
    }

    /// A free leaf that receives a gradient (not bound to a parameter).
    pub fn variable(&self, value: Tensor) -> Var<'_> {
        self.push(value, Op::Leaf, true, None)
    }

    /// Leaf holding a copy of a stored parameter; its gradient is routed
    /// back to the store by [`ParamStore::accumulate`].
    pub fn param(&self, store: &ParamStore, id: ParamId) -> Var<'_> {
        self.push(store.value(id).clone(), Op::Leaf, true, Some(id))
    }

    fn value_ref(&self, id: usize) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn requires(&self, ids: &[usize]) -> bool {
        let nodes = self.nodes.borrow();
        ids.iter().any(|&i| nodes[i].requires_grad)
    }

    fn record(&self, name: &'static str, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var<'_>> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let rg = self.requires(inputs);
        Ok(self.push(value, op, rg, None))
    }

    /// Reverse sweep from a scalar loss.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes.is_empty() {
            return Err(Error::Usage("backward on an empty tape".into()));
        }
        if nodes[loss.id].value.shape() != (1, 1) {
            return Err(Error::Usage(format!(
                "backward requires a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(1.0));

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
                continue;
            }
            let mut send = |target: usize, contrib: Tensor| {
                if !nodes[target].requires_grad {
                    return;
                }
                match &mut grads[target] {
                    Some(acc) => acc.add_assign(&contrib),
                    slot @ None => *slot = Some(contrib),
                }
            };
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if nodes[*a].requires_grad {
                        send(*a, g.matmul(&val(*b).transpose())?);
                    }
                    if nodes[*b].requires_grad {
                        send(*b, val(*a).transpose().matmul(&g)?);
                    }
                }
                Op::Add(a, b) => {
                    send(*a, reduce_to(&g, val(*a).shape()));
                    send(*b, reduce_to(&g, val(*b).shape()));
                }
                Op::Sub(a, b) => {
                    send(*a, reduce_to(&g, val(*a).shape()));
                    send(*b, reduce_to(&g.map(|v| -v), val(*b).shape()));
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let mut ga = g.clone();
                    let mut gb = g.clone();
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            ga.set(i, j, g.get(i, j) * bget(bv, i, j));
                            gb.set(i, j, g.get(i, j) * bget(av, i, j));
                        }
                    }
                    send(*a, reduce_to(&ga, av.shape()));
                    send(*b, reduce_to(&gb, bv.shape()));
                }
                Op::Div(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let mut ga = g.clone();
                    let mut gb = g.clone();
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            let d = bget(bv, i, j);
                            ga.set(i, j, g.get(i, j) / d);
                            gb.set(i, j, -g.get(i, j) * bget(av, i, j) / (d * d));
                        }
                    }
                    send(*a, reduce_to(&ga, av.shape()));
                    send(*b, reduce_to(&gb, bv.shape()));
                }
                Op::Scale(a, f) => send(*a, g.map(|v| v * f)),
                Op::AddScalar(a) => send(*a, g),
                Op::Neg(a) => send(*a, g.map(|v| -v)),
                Op::Relu(a) => {
                    let x = val(*a);
                    let mut ga = g;
                    for (gv, xv) in ga.data_mut().iter_mut().zip(x.data()) {
                        if *xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    send(*a, ga);
                }
                Op::Exp(a) => {
                    let mut ga = g;
                    for (gv, yv) in ga.data_mut().iter_mut().zip(node.value.data()) {
                        *gv *= yv;
                    }
                    send(*a, ga);
                }
                Op::Log(a) => {
                    let mut ga = g;
                    for (gv, xv) in ga.data_mut().iter_mut().zip(val(*a).data()) {
                        *gv /= xv;
                    }
                    send(*a, ga);
                }
                Op::ClampMin(a, min) => {
                    let mut ga = g;
                    for (gv, xv) in ga.data_mut().iter_mut().zip(val(*a).data()) {
                        if *xv < *min {
                            *gv = 0.0;
                        }
                    }
                    send(*a, ga);
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = g.clone();
                    for r in 0..y.rows() {
                        let dot: f64 = g.row(r).iter().zip(y.row(r)).map(|(u, v)| u * v).sum();
                        for (c, out) in ga.row_mut(r).iter_mut().enumerate() {
                            *out = y.get(r, c) * (g.get(r, c) - dot);
                        }
                    }
                    send(*a, ga);
                }
                Op::RowLogSumExp(a) => {
                    let x = val(*a);
                    let mut ga = x.clone();
                    for r in 0..x.rows() {
                        let l = node.value.get(r, 0);
                        let gr = g.get(r, 0);
                        for v in ga.row_mut(r) {
                            *v = gr * (*v - l).exp();
                        }
                    }
                    send(*a, ga);
                }
                Op::Sum(a) => {
                    let s = val(*a).shape();
                    send(*a, Tensor::full(s.0, s.1, g.item()));
                }
                Op::Mean(a) => {
                    let s = val(*a).shape();
                    let n = (s.0 * s.1) as f64;
                    send(*a, Tensor::full(s.0, s.1, g.item() / n));
                }
                Op::SumRows(a) => {
                    let s = val(*a).shape();
                    let mut ga = Tensor::zeros(s.0, s.1);
                    for r in 0..s.0 {
                        ga.row_mut(r).iter_mut().for_each(|v| *v = g.get(r, 0));
                    }
                    send(*a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = val(p).cols();
                        let mut gp = Tensor::zeros(g.rows(), cols);
                        for r in 0..g.rows() {
                            gp.row_mut(r).copy_from_slice(&g.row(r)[offset..offset + cols]);
                        }
                        offset += cols;
                        send(p, gp);
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let rows = val(p).rows();
                        let idx: Vec<usize> = (offset..offset + rows).collect();
                        offset += rows;
                        send(p, g.select_rows(&idx));
                    }
                }
                Op::GatherRows(a, idx) => {
                    let s = val(*a).shape();
                    let mut ga = Tensor::zeros(s.0, s.1);
                    for (k, &i) in idx.iter().enumerate() {
                        for (dst, src) in ga.row_mut(i).iter_mut().zip(g.row(k)) {
                            *dst += src;
                        }
                    }
                    send(*a, ga);
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::RowL2Norm(a) => {
                    let x = val(*a);
                    let mut ga = x.clone();
                    for r in 0..x.rows() {
                        let n = node.value.get(r, 0);
                        let gr = g.get(r, 0);
                        for v in ga.row_mut(r) {
                            *v = if n > 0.0 { gr * *v / n } else { 0.0 };
                        }
                    }
                    send(*a, ga);
                }
                Op::CosineSim(a, b) => {
                    let (an, a_norms) = normalize_rows(val(*a));
                    let (bn, b_norms) = normalize_rows(val(*b));
                    let d_an = g.matmul(&bn)?;
                    let d_bn = g.transpose().matmul(&an)?;
                    send(*a, unnormalize_grad(&an, &a_norms, d_an));
                    send(*b, unnormalize_grad(&bn, &b_norms, d_bn));
                }
                Op::SqDist(a, b) => {
                    let (av, bv) = (val(*a), val(*b));
                    let ga_cross = g.matmul(bv)?;
                    let gb_cross = g.transpose().matmul(av)?;
                    let mut ga = av.clone();
                    for i in 0..av.rows() {
                        let rs: f64 = g.row(i).iter().sum();
                        for (c, v) in ga.row_mut(i).iter_mut().enumerate() {
                            *v = 2.0 * (rs * *v - ga_cross.get(i, c));
                        }
                    }
                    let mut gb = bv.clone();
                    for j in 0..bv.rows() {
                        let cs: f64 = (0..g.rows()).map(|i| g.get(i, j)).sum();
                        for (c, v) in gb.row_mut(j).iter_mut().enumerate() {
                            *v = 2.0 * (cs * *v - gb_cross.get(j, c));
                        }
                    }
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::PickCols(a, idx) => {
                    let s = val(*a).shape();
                    let mut ga = Tensor::zeros(s.0, s.1);
                    for (r, &c) in idx.iter().enumerate() {
                        ga.set(r, c, g.get(r, 0));
                    }
                    send(*a, ga);
                }
                Op::CumSumCols(a) => {
                    let mut ga = g;
                    for r in 0..ga.rows() {
                        let row = ga.row_mut(r);
                        for c in (0..row.len().saturating_sub(1)).rev() {
                            row[c] += row[c + 1];
                        }
                    }
                    send(*a, ga);
                }
                Op::SliceCols(a, start) => {
                    let s = val(*a).shape();
                    let mut ga = Tensor::zeros(s.0, s.1);
                    let w = g.cols();
                    for r in 0..s.0 {
                        ga.row_mut(r)[*start..*start + w].copy_from_slice(g.row(r));
                    }
                    send(*a, ga);
                }
            }
        }

        let mut by_node = Vec::new();
        let mut params = Vec::new();
        for (id, g) in grads.into_iter().enumerate() {
            if let Some(g) = g {
                if let Some(p) = nodes[id].param {
                    params.push((p, g.clone()));
                }
                by_node.push((id, g));
            }
        }
        Ok(Gradients { by_node, params })
    }
}

fn unnormalize_grad(unit: &Tensor, norms: &[f64], d_unit: Tensor) -> Tensor {
    let mut out = d_unit;
    for (r, &n) in norms.iter().enumerate() {
        let u = unit.row(r);
        let proj: f64 = out.row(r).iter().zip(u).map(|(a, b)| a * b).sum();
        let clamped = n <= COSINE_EPS;
        for (v, uv) in out.row_mut(r).iter_mut().zip(u) {
            *v = if clamped { *v / n } else { (*v - proj * uv) / n };
        }
    }
    out
}

/// Gradients produced by one reverse sweep.
pub struct Gradients {
    by_node: Vec<(usize, Tensor)>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    /// Gradient of a leaf; `None` when the loss does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Option<&Tensor> {
        self.by_node.iter().find(|(id, _)| *id == var.id).map(|(_, g)| g)
    }

    /// Gradient w.r.t. a leaf, zeros when the loss does not depend on it.
    pub fn wrt(&self, var: Var<'_>) -> Tensor {
        self.get(var)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(var.shape().0, var.shape().1))
    }
}

impl<'t> Var<'t> {
    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value_ref(self.id).shape()
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    pub fn value(&self) -> Tensor {
        self.tape.value_ref(self.id).clone()
    }

    /// Runs `f` against the stored value without cloning it.
    pub fn with_value<R>(&self, f: impl FnOnce(&Tensor) -> R) -> R {
        f(&self.tape.value_ref(self.id))
    }

    pub fn item(&self) -> f64 {
        self.tape.value_ref(self.id).item()
    }

    pub fn backward(&self) -> Result<Gradients> {
        self.tape.backward(*self)
    }

    fn unary(self, name: &'static str, op: Op, f: impl FnOnce(&Tensor) -> Tensor) -> Result<Var<'t>> {
        let out = f(&self.tape.value_ref(self.id));
        self.tape.record(name, out, op, &[self.id])
    }

    fn broadcast(
        self,
        other: Var<'t>,
        name: &'static str,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var<'t>> {
        let out = {
            let a = self.tape.value_ref(self.id);
            let b = self.tape.value_ref(other.id);
            let (r, c) = broadcast_shape(name, a.shape(), b.shape())?;
            let mut out = Tensor::zeros(r, c);
            for i in 0..r {
                for j in 0..c {
                    out.set(i, j, f(bget(&a, i, j), bget(&b, i, j)));
                }
            }
            out
        };
        self.tape.record(name, out, op, &[self.id, other.id])
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = self.tape.value_ref(self.id).matmul(&self.tape.value_ref(other.id))?;
        self.tape
            .record("matmul", out, Op::MatMul(self.id, other.id), &[self.id, other.id])
    }

    /// Elementwise sum; `other` may broadcast along rows and/or columns.
    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.broadcast(other, "add", Op::Add(self.id, other.id), |a, b| a + b)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.broadcast(other, "sub", Op::Sub(self.id, other.id), |a, b| a - b)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.broadcast(other, "mul", Op::Mul(self.id, other.id), |a, b| a * b)
    }

    pub fn div(self, other: Var<'t>) -> Result<Var<'t>> {
        self.broadcast(other, "div", Op::Div(self.id, other.id), |a, b| a / b)
    }

    pub fn scale(self, f: f64) -> Result<Var<'t>> {
        self.unary("scale", Op::Scale(self.id, f), |x| x.map(|v| v * f))
    }

    pub fn add_scalar(self, s: f64) -> Result<Var<'t>> {
        self.unary("add_scalar", Op::AddScalar(self.id), |x| x.map(|v| v + s))
    }

    pub fn neg(self) -> Result<Var<'t>> {
        self.unary("neg", Op::Neg(self.id), |x| x.map(|v| -v))
    }

    pub fn relu(self) -> Result<Var<'t>> {
        self.unary("relu", Op::Relu(self.id), |x| x.map(|v| v.max(0.0)))
    }

    pub fn exp(self) -> Result<Var<'t>> {
        self.unary("exp", Op::Exp(self.id), |x| x.map(f64::exp))
    }

    pub fn log(self) -> Result<Var<'t>> {
        self.unary("log", Op::Log(self.id), |x| x.map(f64::ln))
    }

    /// `max(x, min)` with zero gradient on the clamped side.
    pub fn clamp_min(self, min: f64) -> Result<Var<'t>> {
        self.unary("clamp_min", Op::ClampMin(self.id, min), |x| x.map(|v| v.max(min)))
    }

    pub fn row_softmax(self) -> Result<Var<'t>> {
        self.unary("row_softmax", Op::RowSoftmax(self.id), |x| {
            let mut out = x.clone();
            for r in 0..x.rows() {
                let row = out.row_mut(r);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    s += *v;
                }
                row.iter_mut().for_each(|v| *v /= s);
            }
            out
        })
    }

    /// Row-wise `log Σ_j exp(x_ij)` as an N×1 column.
    pub fn row_logsumexp(self) -> Result<Var<'t>> {
        self.unary("row_logsumexp", Op::RowLogSumExp(self.id), |x| {
            let mut out = Tensor::zeros(x.rows(), 1);
            for r in 0..x.rows() {
                let row = x.row(r);
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
                out.set(r, 0, m + s.ln());
            }
            out
        })
    }

    pub fn sum(self) -> Result<Var<'t>> {
        self.unary("sum", Op::Sum(self.id), |x| Tensor::scalar(x.data().iter().sum()))
    }

    pub fn mean(self) -> Result<Var<'t>> {
        self.unary("mean", Op::Mean(self.id), |x| {
            Tensor::scalar(x.data().iter().sum::<f64>() / x.data().len().max(1) as f64)
        })
    }

    /// Row sums as an N×1 column.
    pub fn sum_rows(self) -> Result<Var<'t>> {
        self.unary("sum_rows", Op::SumRows(self.id), |x| {
            Tensor::column(&x.iter_rows().map(|r| r.iter().sum()).collect::<Vec<_>>())
        })
    }

    pub fn transpose(self) -> Result<Var<'t>> {
        self.unary("transpose", Op::Transpose(self.id), Tensor::transpose)
    }

    /// Row-wise Euclidean norm as an N×1 column.
    pub fn row_l2_norm(self) -> Result<Var<'t>> {
        self.unary("row_l2_norm", Op::RowL2Norm(self.id), |x| {
            Tensor::column(
                &x.iter_rows()
                    .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .collect::<Vec<_>>(),
            )
        })
    }

    /// Pairwise cosine similarity between the rows of `self` (Na×d) and
    /// `other` (Nb×d), an Na×Nb matrix.
    pub fn cosine_similarity(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let a = self.tape.value_ref(self.id);
            let b = self.tape.value_ref(other.id);
            if a.cols() != b.cols() {
                return Err(Error::Shape {
                    op: "cosine_similarity",
                    lhs: a.shape(),
                    rhs: b.shape(),
                });
            }
            let (an, _) = normalize_rows(&a);
            let (bn, _) = normalize_rows(&b);
            an.matmul(&bn.transpose())?
        };
        self.tape.record(
            "cosine_similarity",
            out,
            Op::CosineSim(self.id, other.id),
            &[self.id, other.id],
        )
    }

    /// Pairwise squared Euclidean distances between rows, Na×Nb.
    pub fn squared_distances(self, other: Var<'t>) -> Result<Var<'t>> {
        let out = {
            let a = self.tape.value_ref(self.id);
            let b = self.tape.value_ref(other.id);
            if a.cols() != b.cols() {
                return Err(Error::Shape {
                    op: "squared_distances",
                    lhs: a.shape(),
                    rhs: b.shape(),
                });
            }
            let mut out = Tensor::zeros(a.rows(), b.rows());
            for i in 0..a.rows() {
                for j in 0..b.rows() {
                    out.set(i, j, super::squared_distance(a.row(i), b.row(j)));
                }
            }
            out
        };
        self.tape.record(
            "squared_distances",
            out,
            Op::SqDist(self.id, other.id),
            &[self.id, other.id],
        )
    }

    /// Picks `x[i, idx[i]]` for every row, an N×1 column.
    pub fn pick_cols(self, idx: &[usize]) -> Result<Var<'t>> {
        let out = {
            let x = self.tape.value_ref(self.id);
            if idx.len() != x.rows() || idx.iter().any(|&c| c >= x.cols()) {
                return Err(Error::Shape {
                    op: "pick_cols",
                    lhs: x.shape(),
                    rhs: (idx.len(), idx.iter().copied().max().unwrap_or(0) + 1),
                });
            }
            Tensor::column(&idx.iter().enumerate().map(|(r, &c)| x.get(r, c)).collect::<Vec<_>>())
        };
        self.tape
            .record("pick_cols", out, Op::PickCols(self.id, idx.to_vec()), &[self.id])
    }

    /// Cumulative sum along each row.
    pub fn cumsum_cols(self) -> Result<Var<'t>> {
        self.unary("cumsum_cols", Op::CumSumCols(self.id), |x| {
            let mut out = x.clone();
            for r in 0..out.rows() {
                let row = out.row_mut(r);
                for c in 1..row.len() {
                    row[c] += row[c - 1];
                }
            }
            out
        })
    }

    /// Columns `start..end`.
    pub fn slice_cols(self, start: usize, end: usize) -> Result<Var<'t>> {
        let out = {
            let x = self.tape.value_ref(self.id);
            if start > end || end > x.cols() {
                return Err(Error::Shape {
                    op: "slice_cols",
                    lhs: x.shape(),
                    rhs: (start, end),
                });
            }
            let mut out = Tensor::zeros(x.rows(), end - start);
            for r in 0..x.rows() {
                out.row_mut(r).copy_from_slice(&x.row(r)[start..end]);
            }
            out
        };
        self.tape
            .record("slice_cols", out, Op::SliceCols(self.id, start), &[self.id])
    }

    /// Rows selected by index (repeats allowed); gradients scatter-add back.
    pub fn gather_rows(self, idx: &[usize]) -> Result<Var<'t>> {
        let out = {
            let x = self.tape.value_ref(self.id);
            if let Some(&bad) = idx.iter().find(|&&i| i >= x.rows()) {
                return Err(Error::Shape {
                    op: "gather_rows",
                    lhs: x.shape(),
                    rhs: (bad, 0),
                });
            }
            x.select_rows(idx)
        };
        self.tape
            .record("gather_rows", out, Op::GatherRows(self.id, idx.to_vec()), &[self.id])
    }
}

/// Horizontal concatenation.
pub fn concat_cols<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = parts
        .first()
        .ok_or_else(|| Error::Usage("concat_cols of zero tensors".into()))?
        .tape;
    let out = {
        let vals: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| tape.value_ref(p.id)).collect();
        let rows = vals[0].rows();
        let cols: usize = vals.iter().map(|v| v.cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for v in &vals {
            if v.rows() != rows {
                return Err(Error::Shape {
                    op: "concat_cols",
                    lhs: vals[0].shape(),
                    rhs: v.shape(),
                });
            }
        }
        for r in 0..rows {
            let mut off = 0;
            for v in &vals {
                out.row_mut(r)[off..off + v.cols()].copy_from_slice(v.row(r));
                off += v.cols();
            }
        }
        out
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    tape.record("concat_cols", out, Op::ConcatCols(ids.clone()), &ids)
}

/// Vertical concatenation.
pub fn concat_rows<'t>(parts: &[Var<'t>]) -> Result<Var<'t>> {
    let tape = parts
        .first()
        .ok_or_else(|| Error::Usage("concat_rows of zero tensors".into()))?
        .tape;
    let out = {
        let vals: Vec<Ref<'_, Tensor>> = parts.iter().map(|p| tape.value_ref(p.id)).collect();
        let cols = vals[0].cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for v in &vals {
            if v.cols() != cols {
                return Err(Error::Shape {
                    op: "concat_rows",
                    lhs: vals[0].shape(),
                    rhs: v.shape(),
                });
            }
            data.extend_from_slice(v.data());
            rows += v.rows();
        }
        Tensor::new(rows, cols, data)?
    };
    let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
    tape.record("concat_rows", out, Op::ConcatRows(ids.clone()), &ids)
}
