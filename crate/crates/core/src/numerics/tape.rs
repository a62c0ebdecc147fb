//! Reverse-mode differentiation over a linear operation record.
//!
//! Every operation appends a node holding its forward value. Node order is a
//! topological order, so `backward` walks the record once from the end.

use rand::Rng;

use super::kernels;
use super::{Scalar, SplitRng, Tensor};
use crate::error::{Error, Result};
use crate::layers::activation;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unary {
    Gelu,
    Sigmoid,
    Tanh,
    Talu,
    Square,
}

impl Unary {
    fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            Unary::Gelu => activation::gelu(x),
            Unary::Sigmoid => activation::sigmoid(x),
            Unary::Tanh => x.tanh(),
            Unary::Talu => activation::talu(x),
            Unary::Square => x * x,
        }
    }

    /// Derivative given input `x` and output `y`.
    fn deriv<T: Scalar>(self, x: T, y: T) -> T {
        match self {
            Unary::Gelu => activation::gelu_deriv(x),
            Unary::Sigmoid => y * (T::one() - y),
            Unary::Tanh => T::one() - y * y,
            Unary::Talu => T::of(2.0) * y * (T::one() - y),
            Unary::Square => T::of(2.0) * x,
        }
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    MatVec(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Affine(Var, T),
    Unary(Var, Unary),
    MaxOverRows(Var, Vec<usize>),
    ShiftRows(Var, isize),
    ReverseRows(Var),
    SliceRows(Var, usize),
    ConcatRows(Vec<Var>),
    ConcatCols(Var, Var),
    Select(Var, usize),
    Reshape(Var),
    ExpandRows(Var),
    ExpandCols(Var),
    MulConst(Var, Vec<T>),
    Sum(Var),
    Mean(Var),
    Bce(Var, Vec<T>),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Lower bound of the clamp applied to predictions inside binary cross entropy.
pub const BCE_CLAMP: f64 = 1e-7;

#[derive(Debug, Default)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf created with `requires_grad`. Leaves that do not
    /// reach the loss get zeros.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
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

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
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

    /// Records a leaf; it participates in differentiation iff the tensor's
    /// `requires_grad` flag is set.
    pub fn leaf(&mut self, t: Tensor<T>) -> Var {
        let rg = t.requires_grad();
        self.push(t, Op::Leaf, rg)
    }

    pub fn constant(&mut self, t: Tensor<T>) -> Var {
        self.push(t.with_requires_grad(false), Op::Leaf, false)
    }

    pub fn param(&mut self, t: &Tensor<T>) -> Var {
        self.push(t.clone().with_requires_grad(true), Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.value(a).dims2()?;
        let (n, k2) = self.value(b).dims2()?;
        if k != k2 {
            return Err(Error::shape("matmul_nt", self.shape(a), self.shape(b)));
        }
        let mut out = vec![T::zero(); m * n];
        kernels::matmul_nt_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MatMulNt(a, b), rg))
    }

    /// Matrix `m×n` times vector `n`, giving a length-`m` vector.
    pub fn matvec(&mut self, x: Var, v: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if self.shape(v) != [n] {
            return Err(Error::shape("matvec", self.shape(x), self.shape(v)));
        }
        let xv = self.value(x).data();
        let vv = self.value(v).data();
        let out = (0..m)
            .map(|i| kernels::dot(&xv[i * n..(i + 1) * n], vv))
            .collect();
        let rg = self.rg(x) || self.rg(v);
        Ok(self.push(Tensor::vector(out), Op::MatVec(x, v), rg))
    }

    fn elementwise(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), name, f)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.elementwise(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    fn row_broadcast_check(&self, x: Var, v: Var, name: &'static str) -> Result<(usize, usize)> {
        let (m, n) = self.value(x).dims2()?;
        if self.shape(v) != [n] {
            return Err(Error::shape(name, self.shape(x), self.shape(v)));
        }
        Ok((m, n))
    }

    /// Adds a length-`n` vector to every row of an `m×n` matrix.
    pub fn add_row(&mut self, x: Var, v: Var) -> Result<Var> {
        let (m, n) = self.row_broadcast_check(x, v, "add_row")?;
        let vv = self.value(v).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &b) in row.iter_mut().zip(vv) {
                *o = *o + b;
            }
        }
        let rg = self.rg(x) || self.rg(v);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::AddRow(x, v), rg))
    }

    /// Multiplies every row of an `m×n` matrix elementwise by a length-`n` vector.
    pub fn mul_row(&mut self, x: Var, v: Var) -> Result<Var> {
        let (m, n) = self.row_broadcast_check(x, v, "mul_row")?;
        let vv = self.value(v).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_exact_mut(n) {
            for (o, &b) in row.iter_mut().zip(vv) {
                *o = *o * b;
            }
        }
        let rg = self.rg(x) || self.rg(v);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::MulRow(x, v), rg))
    }

    /// `scale * x + shift`, elementwise.
    pub fn affine(&mut self, x: Var, scale: T, shift: T) -> Var {
        let out = self.value(x).map(|v| scale * v + shift);
        let rg = self.rg(x);
        self.push(out, Op::Affine(x, scale), rg)
    }

    pub fn scale(&mut self, x: Var, s: T) -> Var {
        self.affine(x, s, T::zero())
    }

    pub fn unary(&mut self, x: Var, f: Unary) -> Var {
        let out = self.value(x).map(|v| f.eval(v));
        let rg = self.rg(x);
        self.push(out, Op::Unary(x, f), rg)
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Gelu)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Sigmoid)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Tanh)
    }

    pub fn talu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Talu)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Square)
    }

    /// Column-wise maximum over the clip (row) axis. Backward routes each
    /// column's gradient to its first maximal row.
    pub fn max_over_rows(&mut self, x: Var) -> Result<Var> {
        let (out, arg) = self.value(x).max_over_rows()?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::MaxOverRows(x, arg), rg))
    }

    /// `out[t] = x[t + offset]`, zero where `t + offset` falls outside the rows.
    pub fn shift_rows(&mut self, x: Var, offset: isize) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let mut out = vec![T::zero(); m * n];
        for t in 0..m {
            let s = t as isize + offset;
            if (0..m as isize).contains(&s) {
                let s = s as usize;
                out[t * n..(t + 1) * n].copy_from_slice(&src[s * n..(s + 1) * n]);
            }
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::ShiftRows(x, offset), rg))
    }

    pub fn reverse_rows(&mut self, x: Var) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        let src = self.value(x).data();
        let mut out = Vec::with_capacity(m * n);
        for t in (0..m).rev() {
            out.extend_from_slice(&src[t * n..(t + 1) * n]);
        }
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::ReverseRows(x), rg))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.value(x).dims2()?;
        if start + len > m {
            return Err(Error::InvalidArgument(format!(
                "row slice {start}..{} out of range for {m} rows",
                start + len
            )));
        }
        let out = self.value(x).data()[start * n..(start + len) * n].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[len, n], out)?, Op::SliceRows(x, start), rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero parts".into()))?;
        let (_, n) = self.value(*first).dims2()?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, c) = self.value(p).dims2()?;
            if c != n {
                return Err(Error::shape("concat_rows", self.shape(*first), self.shape(p)));
            }
            rows += r;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::new(&[rows, n], out)?, Op::ConcatRows(parts.to_vec()), rg))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, na) = self.value(a).dims2()?;
        let (m2, nb) = self.value(b).dims2()?;
        if m != m2 {
            return Err(Error::shape("concat_cols", self.shape(a), self.shape(b)));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = Vec::with_capacity(m * (na + nb));
        for t in 0..m {
            out.extend_from_slice(&av[t * na..(t + 1) * na]);
            out.extend_from_slice(&bv[t * nb..(t + 1) * nb]);
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(&[m, na + nb], out)?, Op::ConcatCols(a, b), rg))
    }

    /// Index along the leading axis of a rank-3 tensor.
    pub fn select(&mut self, x: Var, index: usize) -> Result<Var> {
        let shape = self.shape(x).to_vec();
        let [k, r, c] = shape[..] else {
            return Err(Error::InvalidArgument(format!(
                "select needs a rank-3 tensor, got {shape:?}"
            )));
        };
        if index >= k {
            return Err(Error::InvalidArgument(format!(
                "select index {index} out of range {k}"
            )));
        }
        let out = self.value(x).data()[index * r * c..(index + 1) * r * c].to_vec();
        let rg = self.rg(x);
        Ok(self.push(Tensor::new(&[r, c], out)?, Op::Select(x, index), rg))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?.with_requires_grad(false);
        let rg = self.rg(x);
        Ok(self.push(out, Op::Reshape(x), rg))
    }

    /// Length-`m` vector to an `m×n` matrix constant along each row:
    /// `out[a][b] = v[a]`.
    pub fn expand_rows(&mut self, v: Var, n: usize) -> Result<Var> {
        let m = self.vector_len(v, "expand_rows")?;
        let vv = self.value(v).data();
        let out = (0..m).flat_map(|a| std::iter::repeat(vv[a]).take(n)).collect();
        let rg = self.rg(v);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::ExpandRows(v), rg))
    }

    /// Length-`n` vector to an `m×n` matrix constant along each column:
    /// `out[a][b] = v[b]`.
    pub fn expand_cols(&mut self, v: Var, m: usize) -> Result<Var> {
        let n = self.vector_len(v, "expand_cols")?;
        let vv = self.value(v).data();
        let mut out = Vec::with_capacity(m * n);
        for _ in 0..m {
            out.extend_from_slice(vv);
        }
        let rg = self.rg(v);
        Ok(self.push(Tensor::new(&[m, n], out)?, Op::ExpandCols(v), rg))
    }

    fn vector_len(&self, v: Var, name: &'static str) -> Result<usize> {
        match self.shape(v) {
            [n] => Ok(*n),
            s => Err(Error::InvalidArgument(format!("{name} needs a vector, got {s:?}"))),
        }
    }

    /// Elementwise product with a constant of the same shape.
    pub fn mul_const(&mut self, x: Var, c: &Tensor<T>) -> Result<Var> {
        let out = self.value(x).zip_map(c, "mul_const", |a, b| a * b)?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::MulConst(x, c.data().to_vec()), rg))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let n = T::of(self.value(x).len() as f64);
        let s = self.value(x).sum() / n;
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Mean(x), rg)
    }

    /// Mean binary cross entropy between predictions and targets of the same
    /// shape. Predictions are clamped to `[1e-7, 1 - 1e-7]` before the log.
    pub fn bce_mean(&mut self, pred: Var, target: &Tensor<T>) -> Result<Var> {
        if self.shape(pred) != target.shape() {
            return Err(Error::shape("bce", self.shape(pred), target.shape()));
        }
        let (lo, hi) = bce_bounds::<T>();
        let p = self.value(pred).data();
        let n = T::of(p.len() as f64);
        let total: T = p
            .iter()
            .zip(target.data())
            .map(|(&p, &y)| {
                let p = p.max(lo).min(hi);
                -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
            })
            .sum();
        let rg = self.rg(pred);
        Ok(self.push(
            Tensor::scalar(total / n),
            Op::Bce(pred, target.data().to_vec()),
            rg,
        ))
    }

    /// Inverted dropout: in training, zeroes each element with probability
    /// `rate` and scales survivors by `1 / (1 - rate)`. Identity otherwise.
    pub fn dropout(&mut self, x: Var, rate: f64, training: bool, rng: &mut SplitRng) -> Result<Var> {
        check_rate(rate)?;
        if !training || rate == 0.0 {
            return Ok(x);
        }
        let mask = dropout_mask(self.shape(x), rate, rng);
        self.mul_const(x, &mask)
    }

    /// Reverse pass from a scalar loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(Error::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![T::one()]);
        }
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.vjp(node, &g, &mut grads);
        }
        let grads = self
            .nodes
            .iter()
            .zip(grads)
            .map(|(node, g)| match (&node.op, node.requires_grad) {
                (Op::Leaf, true) => Some(match g {
                    Some(g) => Tensor::new(node.value.shape(), g).expect("shape"),
                    None => Tensor::zeros(node.value.shape()),
                }),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn slot<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let n = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); n]))
    }

    fn vjp(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matrix");
                let n = self.value(*b).shape()[1];
                if let Some(da) = self.slot(grads, *a) {
                    kernels::matmul_nt_acc(g, val(*b), da, m, n, k);
                }
                if let Some(db) = self.slot(grads, *b) {
                    kernels::matmul_tn_acc(val(*a), g, db, k, m, n);
                }
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matrix");
                let n = self.value(*b).shape()[0];
                if let Some(da) = self.slot(grads, *a) {
                    kernels::matmul_nn_acc(g, val(*b), da, m, n, k);
                }
                if let Some(db) = self.slot(grads, *b) {
                    kernels::matmul_tn_acc(g, val(*a), db, n, m, k);
                }
            }
            Op::MatVec(x, v) => {
                let (m, n) = self.value(*x).dims2().expect("matrix");
                if let Some(dx) = self.slot(grads, *x) {
                    let vv = val(*v);
                    for i in 0..m {
                        kernels::axpy(g[i], vv, &mut dx[i * n..(i + 1) * n]);
                    }
                }
                if let Some(dv) = self.slot(grads, *v) {
                    let xv = val(*x);
                    for i in 0..m {
                        kernels::axpy(g[i], &xv[i * n..(i + 1) * n], dv);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(d) = self.slot(grads, v) {
                        kernels::axpy(T::one(), g, d);
                    }
                }
            }
            Op::Sub(a, b) => {
                if let Some(d) = self.slot(grads, *a) {
                    kernels::axpy(T::one(), g, d);
                }
                if let Some(d) = self.slot(grads, *b) {
                    kernels::axpy(-T::one(), g, d);
                }
            }
            Op::Mul(a, b) => {
                if let Some(d) = self.slot(grads, *a) {
                    for ((d, &g), &o) in d.iter_mut().zip(g).zip(val(*b)) {
                        *d = *d + g * o;
                    }
                }
                if let Some(d) = self.slot(grads, *b) {
                    for ((d, &g), &o) in d.iter_mut().zip(g).zip(val(*a)) {
                        *d = *d + g * o;
                    }
                }
            }
            Op::AddRow(x, v) => {
                let n = self.value(*v).len();
                if let Some(dx) = self.slot(grads, *x) {
                    kernels::axpy(T::one(), g, dx);
                }
                if let Some(dv) = self.slot(grads, *v) {
                    for row in g.chunks_exact(n) {
                        kernels::axpy(T::one(), row, dv);
                    }
                }
            }
            Op::MulRow(x, v) => {
                let n = self.value(*v).len();
                if let Some(dx) = self.slot(grads, *x) {
                    let vv = val(*v);
                    for (drow, grow) in dx.chunks_exact_mut(n).zip(g.chunks_exact(n)) {
                        for ((d, &g), &b) in drow.iter_mut().zip(grow).zip(vv) {
                            *d = *d + g * b;
                        }
                    }
                }
                if let Some(dv) = self.slot(grads, *v) {
                    for (xrow, grow) in val(*x).chunks_exact(n).zip(g.chunks_exact(n)) {
                        for ((d, &g), &x) in dv.iter_mut().zip(grow).zip(xrow) {
                            *d = *d + g * x;
                        }
                    }
                }
            }
            Op::Affine(x, s) => {
                if let Some(d) = self.slot(grads, *x) {
                    kernels::axpy(*s, g, d);
                }
            }
            Op::Unary(x, f) => {
                let out = node.value.data();
                if let Some(d) = self.slot(grads, *x) {
                    for (((d, &g), &x), &y) in d.iter_mut().zip(g).zip(val(*x)).zip(out) {
                        *d = *d + g * f.deriv(x, y);
                    }
                }
            }
            Op::MaxOverRows(x, arg) => {
                let n = arg.len();
                if let Some(d) = self.slot(grads, *x) {
                    for (c, &r) in arg.iter().enumerate() {
                        d[r * n + c] = d[r * n + c] + g[c];
                    }
                }
            }
            Op::ShiftRows(x, offset) => {
                let (m, n) = node.value.dims2().expect("matrix");
                if let Some(d) = self.slot(grads, *x) {
                    for t in 0..m {
                        let s = t as isize + offset;
                        if (0..m as isize).contains(&s) {
                            let s = s as usize;
                            kernels::axpy(T::one(), &g[t * n..(t + 1) * n], &mut d[s * n..(s + 1) * n]);
                        }
                    }
                }
            }
            Op::ReverseRows(x) => {
                let (m, n) = node.value.dims2().expect("matrix");
                if let Some(d) = self.slot(grads, *x) {
                    for t in 0..m {
                        let s = m - 1 - t;
                        kernels::axpy(T::one(), &g[t * n..(t + 1) * n], &mut d[s * n..(s + 1) * n]);
                    }
                }
            }
            Op::SliceRows(x, start) => {
                let n = node.value.shape()[1];
                if let Some(d) = self.slot(grads, *x) {
                    let off = start * n;
                    kernels::axpy(T::one(), g, &mut d[off..off + g.len()]);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if let Some(d) = self.slot(grads, p) {
                        kernels::axpy(T::one(), &g[off..off + len], d);
                    }
                    off += len;
                }
            }
            Op::ConcatCols(a, b) => {
                let na = self.value(*a).shape()[1];
                let nb = self.value(*b).shape()[1];
                let w = na + nb;
                if let Some(d) = self.slot(grads, *a) {
                    for (drow, grow) in d.chunks_exact_mut(na).zip(g.chunks_exact(w)) {
                        kernels::axpy(T::one(), &grow[..na], drow);
                    }
                }
                if let Some(d) = self.slot(grads, *b) {
                    for (drow, grow) in d.chunks_exact_mut(nb).zip(g.chunks_exact(w)) {
                        kernels::axpy(T::one(), &grow[na..], drow);
                    }
                }
            }
            Op::Select(x, index) => {
                let len = node.value.len();
                if let Some(d) = self.slot(grads, *x) {
                    kernels::axpy(T::one(), g, &mut d[index * len..(index + 1) * len]);
                }
            }
            Op::Reshape(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    kernels::axpy(T::one(), g, d);
                }
            }
            Op::ExpandRows(v) => {
                let n = node.value.shape()[1];
                if let Some(d) = self.slot(grads, *v) {
                    for (a, row) in g.chunks_exact(n).enumerate() {
                        d[a] = d[a] + row.iter().copied().sum::<T>();
                    }
                }
            }
            Op::ExpandCols(v) => {
                let n = node.value.shape()[1];
                if let Some(d) = self.slot(grads, *v) {
                    for row in g.chunks_exact(n) {
                        kernels::axpy(T::one(), row, d);
                    }
                }
            }
            Op::MulConst(x, c) => {
                if let Some(d) = self.slot(grads, *x) {
                    for ((d, &g), &c) in d.iter_mut().zip(g).zip(c) {
                        *d = *d + g * c;
                    }
                }
            }
            Op::Sum(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    d.iter_mut().for_each(|d| *d = *d + g[0]);
                }
            }
            Op::Mean(x) => {
                if let Some(d) = self.slot(grads, *x) {
                    let s = g[0] / T::of(d.len() as f64);
                    d.iter_mut().for_each(|d| *d = *d + s);
                }
            }
            Op::Bce(p, y) => {
                let (lo, hi) = bce_bounds::<T>();
                if let Some(d) = self.slot(grads, *p) {
                    let s = g[0] / T::of(d.len() as f64);
                    for ((d, &p), &y) in d.iter_mut().zip(val(*p)).zip(y) {
                        if p > lo && p < hi {
                            *d = *d + s * (p - y) / (p * (T::one() - p));
                        }
                    }
                }
            }
        }
    }
}

fn bce_bounds<T: Scalar>() -> (T, T) {
    let lo = T::of(BCE_CLAMP);
    (lo, T::one() - lo)
}

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

fn dropout_mask<T: Scalar>(shape: &[usize], rate: f64, rng: &mut SplitRng) -> Tensor<T> {
    let keep = T::of(1.0 / (1.0 - rate));
    let mut mask = Tensor::zeros(shape);
    for m in mask.data_mut() {
        if rng.gen::<f64>() >= rate {
            *m = keep;
        }
    }
    mask
}

/// Off-tape dropout with the same semantics as [`Tape::dropout`].
pub fn dropout_apply<T: Scalar>(
    x: &Tensor<T>,
    rate: f64,
    training: bool,
    rng: &mut SplitRng,
) -> Result<Tensor<T>> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mask = dropout_mask(x.shape(), rate, rng);
    x.zip_map(&mask, "dropout", |a, b| a * b)
}
