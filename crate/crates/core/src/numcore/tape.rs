//! Define-by-run reverse-mode differentiation over [`Matrix`] values.
//!
//! A [`Tape`] is built fresh for every forward pass. Each operation appends a
//! node holding its value and the rule needed to push gradients back to its
//! parents; [`Tape::backward`] walks the nodes in reverse insertion order,
//! which is a valid reverse topological order because parents always precede
//! their children.

use crate::error::{Error, Result};
use crate::numcore::matrix::{gemm, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Entry-wise nonlinearities supported by the tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnaryOp {
    Sigmoid,
    Tanh,
    Relu,
    Softplus,
    Exp,
    Log,
    Square,
}

impl UnaryOp {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryOp::Sigmoid => sigmoid(x),
            UnaryOp::Tanh => x.tanh(),
            UnaryOp::Relu => x.max(0.0),
            UnaryOp::Softplus => softplus(x),
            UnaryOp::Exp => x.exp(),
            UnaryOp::Log => x.ln(),
            UnaryOp::Square => x * x,
        }
    }

    /// Derivative given the input `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            UnaryOp::Sigmoid => y * (1.0 - y),
            UnaryOp::Tanh => 1.0 - y * y,
            UnaryOp::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            UnaryOp::Softplus => sigmoid(x),
            UnaryOp::Exp => y,
            UnaryOp::Log => 1.0 / x,
            UnaryOp::Square => 2.0 * x,
        }
    }

    fn name(self) -> &'static str {
        match self {
            UnaryOp::Sigmoid => "sigmoid",
            UnaryOp::Tanh => "tanh",
            UnaryOp::Relu => "relu",
            UnaryOp::Softplus => "softplus",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Square => "square",
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

/// `ln(1 + e^x)` in the overflow-safe form `max(x, 0) + ln(1 + e^{-|x|})`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Unary(Var, UnaryOp),
    Clamp(Var, f64, f64),
    Sum(Var),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    ConcatCols(Var, Var),
    SliceCols(Var, usize, usize),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
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

    /// Untracked input; no gradient is accumulated for it.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Tracked leaf whose gradient is available after [`Tape::backward`].
    pub fn variable(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`; zeros when `v`
    /// did not influence the loss.
    pub fn grad(&self, v: Var) -> Matrix {
        match self.grads.get(v.0).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.nodes[v.0].value.shape();
                Matrix::zeros(r, c)
            }
        }
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push_checked(&mut self, name: &'static str, value: Matrix, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NumericDomain {
                op: name,
                detail: "non-finite result".into(),
            });
        }
        Ok(self.push(value, op, requires_grad))
    }

    fn tracked(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        let rg = self.tracked(&[a, b]);
        self.push_checked("matmul", value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).add(self.value(b))?;
        let rg = self.tracked(&[a, b]);
        self.push_checked("add", value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).sub(self.value(b))?;
        let rg = self.tracked(&[a, b]);
        self.push_checked("sub", value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).hadamard(self.value(b))?;
        let rg = self.tracked(&[a, b]);
        self.push_checked("mul", value, Op::Mul(a, b), rg)
    }

    /// `a + bias` with a 1 x cols `bias` broadcast over rows.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let value = self.value(a).add_row(self.value(bias))?;
        let rg = self.tracked(&[a, bias]);
        self.push_checked("add_row", value, Op::AddRow(a, bias), rg)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let value = self.value(a).scale(s);
        let rg = self.tracked(&[a]);
        self.push_checked("scale", value, Op::Scale(a, s), rg)
    }

    pub fn unary(&mut self, op: UnaryOp, a: Var) -> Result<Var> {
        let x = self.value(a);
        if op == UnaryOp::Log {
            if let Some(bad) = x.data().iter().find(|&&v| v <= 0.0) {
                return Err(Error::NumericDomain {
                    op: "log",
                    detail: format!("log of non-positive value {bad}"),
                });
            }
        }
        let value = x.map(|v| op.apply(v));
        let rg = self.tracked(&[a]);
        self.push_checked(op.name(), value, Op::Unary(a, op), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Sigmoid, a)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Tanh, a)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Relu, a)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Softplus, a)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Exp, a)
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Log, a)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(UnaryOp::Square, a)
    }

    /// Entry-wise clamp; gradient passes only where the input lies inside `[lo, hi]`.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let value = self.value(a).map(|v| v.clamp(lo, hi));
        let rg = self.tracked(&[a]);
        self.push_checked("clamp", value, Op::Clamp(a, lo, hi), rg)
    }

    /// Sum of all entries as a 1x1 node.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(a).sum());
        let rg = self.tracked(&[a]);
        self.push_checked("sum", value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len().max(1);
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).transpose();
        let rg = self.tracked(&[a]);
        self.push_checked("transpose", value, Op::Transpose(a), rg)
    }

    /// Row gather; indices may repeat (gradients are scatter-added).
    pub fn gather_rows(&mut self, a: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(a);
        let cols = src.cols();
        let mut data = Vec::with_capacity(indices.len() * cols);
        for &i in indices {
            if i >= src.rows() {
                return Err(Error::dim(
                    "gather_rows",
                    format!("row {i} of {}", src.rows()),
                ));
            }
            data.extend_from_slice(src.row(i));
        }
        let value = Matrix::from_vec(indices.len(), cols, data)?;
        let rg = self.tracked(&[a]);
        self.push_checked("gather_rows", value, Op::GatherRows(a, indices.to_vec()), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rows() != bv.rows() {
            return Err(Error::dim(
                "concat_cols",
                format!("{:?} beside {:?}", av.shape(), bv.shape()),
            ));
        }
        let cols = av.cols() + bv.cols();
        let mut data = Vec::with_capacity(av.rows() * cols);
        for r in 0..av.rows() {
            data.extend_from_slice(av.row(r));
            data.extend_from_slice(bv.row(r));
        }
        let value = Matrix::from_vec(av.rows(), cols, data)?;
        let rg = self.tracked(&[a, b]);
        self.push_checked("concat_cols", value, Op::ConcatCols(a, b), rg)
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let src = self.value(a);
        if start > end || end > src.cols() {
            return Err(Error::dim(
                "slice_cols",
                format!("[{start}, {end}) of {} columns", src.cols()),
            ));
        }
        let value = Matrix::from_fn(src.rows(), end - start, |r, c| src.get(r, start + c));
        let rg = self.tracked(&[a]);
        self.push_checked("slice_cols", value, Op::SliceCols(a, start, end), rg)
    }

    /// Fills gradient slots with d`loss`/d(node) for every tracked node.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got {:?}",
                self.value(loss).shape()
            )));
        }
        self.grads = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.grads[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = self.grads[i].take() else {
                continue;
            };
            let nodes = &self.nodes;
            let grads = &mut self.grads;
            let needs = |v: &Var| nodes[v.0].requires_grad;
            match &node.op {
                Op::Leaf => unreachable!(),
                Op::MatMul(a, b) => {
                    if needs(a) {
                        let bv = &nodes[b.0].value;
                        let mut da = Matrix::zeros(g.rows(), bv.rows());
                        gemm(&g, false, bv, true, &mut da);
                        accumulate(grads, *a, da);
                    }
                    if needs(b) {
                        let av = &nodes[a.0].value;
                        let mut db = Matrix::zeros(av.cols(), g.cols());
                        gemm(av, true, &g, false, &mut db);
                        accumulate(grads, *b, db);
                    }
                }
                Op::Add(a, b) => {
                    if needs(a) {
                        accumulate(grads, *a, g.clone());
                    }
                    if needs(b) {
                        accumulate(grads, *b, g);
                    }
                }
                Op::Sub(a, b) => {
                    if needs(a) {
                        accumulate(grads, *a, g.clone());
                    }
                    if needs(b) {
                        accumulate(grads, *b, g.scale(-1.0));
                    }
                }
                Op::Mul(a, b) => {
                    if needs(a) {
                        accumulate(grads, *a, g.hadamard(&nodes[b.0].value)?);
                    }
                    if needs(b) {
                        accumulate(grads, *b, g.hadamard(&nodes[a.0].value)?);
                    }
                }
                Op::AddRow(a, bias) => {
                    if needs(bias) {
                        accumulate(grads, *bias, g.sum_rows());
                    }
                    if needs(a) {
                        accumulate(grads, *a, g);
                    }
                }
                Op::Scale(a, s) => {
                    if needs(a) {
                        accumulate(grads, *a, g.scale(*s));
                    }
                }
                Op::Unary(a, op) => {
                    if needs(a) {
                        let x = &nodes[a.0].value;
                        let y = &node.value;
                        let data = g
                            .data()
                            .iter()
                            .zip(x.data().iter().zip(y.data()))
                            .map(|(gv, (&xv, &yv))| gv * op.derivative(xv, yv))
                            .collect();
                        accumulate(grads, *a, Matrix::from_vec(g.rows(), g.cols(), data)?);
                    }
                }
                Op::Clamp(a, lo, hi) => {
                    if needs(a) {
                        let x = &nodes[a.0].value;
                        let da = g.zip_map(x, "clamp", |gv, xv| {
                            if xv >= *lo && xv <= *hi {
                                gv
                            } else {
                                0.0
                            }
                        })?;
                        accumulate(grads, *a, da);
                    }
                }
                Op::Sum(a) => {
                    if needs(a) {
                        let (r, c) = nodes[a.0].value.shape();
                        accumulate(grads, *a, Matrix::filled(r, c, g.get(0, 0)));
                    }
                }
                Op::Transpose(a) => {
                    if needs(a) {
                        accumulate(grads, *a, g.transpose());
                    }
                }
                Op::GatherRows(a, idx) => {
                    if needs(a) {
                        let (r, c) = nodes[a.0].value.shape();
                        let mut da = Matrix::zeros(r, c);
                        for (k, &src) in idx.iter().enumerate() {
                            for (d, v) in da.row_mut(src).iter_mut().zip(g.row(k)) {
                                *d += v;
                            }
                        }
                        accumulate(grads, *a, da);
                    }
                }
                Op::ConcatCols(a, b) => {
                    let ac = nodes[a.0].value.cols();
                    if needs(a) {
                        accumulate(grads, *a, Matrix::from_fn(g.rows(), ac, |r, c| g.get(r, c)));
                    }
                    if needs(b) {
                        let bc = nodes[b.0].value.cols();
                        accumulate(
                            grads,
                            *b,
                            Matrix::from_fn(g.rows(), bc, |r, c| g.get(r, ac + c)),
                        );
                    }
                }
                Op::SliceCols(a, start, _end) => {
                    if needs(a) {
                        let (r, c) = nodes[a.0].value.shape();
                        let mut da = Matrix::zeros(r, c);
                        for row in 0..r {
                            da.row_mut(row)[*start..*start + g.cols()].copy_from_slice(g.row(row));
                        }
                        accumulate(grads, *a, da);
                    }
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
