//! Dense `f64` tensors and a define-by-run reverse-mode tape.
//!
//! A [`Tape`] is created per forward pass. Leaves are registered with
//! [`Tape::leaf`] (trainable) or [`Tape::constant`], operations are recorded
//! as they execute, and [`Tape::backward`] accumulates gradients into every
//! node that requires one. Gradients persist on the tape until
//! [`Tape::zero_grad`] is called.
//!
//! Broadcasting is limited to scalar-vs-tensor for binary kinds. Anything
//! else (bias rows, for instance) must be tiled explicitly with
//! [`Var::tile_rows`].

use std::cell::{Ref, RefCell};
use std::fmt;
use std::rc::Rc;

use crate::error::TensorError;

pub type Result<T> = std::result::Result<T, TensorError>;

/// Row-major dense array of `f64`.
#[derive(Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.data.len() <= 16 {
            write!(f, "Tensor{:?}{:?}", self.shape, self.data)
        } else {
            write!(f, "Tensor{:?}[{} values]", self.shape, self.data.len())
        }
    }
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&e| e == 0) {
            return Err(TensorError::InvalidShape(shape));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(TensorError::ShapeMismatch {
                op: "new",
                lhs: shape,
                rhs: vec![data.len()],
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    /// Rank-0 tensor holding a single value.
    pub fn scalar(value: f64) -> Self {
        Self {
            shape: Vec::new(),
            data: vec![value],
        }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Self {
            shape: vec![data.len()],
            data,
        }
    }

    /// Builds a `rows × cols` matrix from row-major data.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::InvalidShape(vec![rows.len(), cols]));
        }
        Self::new(vec![rows.len(), cols], rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut t = Self::zeros(&[n, n]);
        for i in 0..n {
            t.data[i * n + i] = 1.0;
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Leading extent of a matrix.
    pub fn rows(&self) -> usize {
        self.shape.first().copied().unwrap_or(1)
    }

    /// Trailing extent of a matrix.
    pub fn cols(&self) -> usize {
        if self.shape.len() >= 2 {
            self.shape[1..].iter().product()
        } else {
            self.shape.first().copied().unwrap_or(1)
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    /// The value of a one-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.data.len() == 1 {
            Ok(self.data[0])
        } else {
            Err(TensorError::NotScalar(self.shape.clone()))
        }
    }

    pub fn reshape(mut self, shape: Vec<usize>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != self.data.len() || shape.iter().any(|&e| e == 0) {
            return Err(TensorError::ShapeMismatch {
                op: "reshape",
                lhs: self.shape,
                rhs: shape,
            });
        }
        self.shape = shape;
        Ok(self)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Rows `start..end` of a matrix as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if self.rank() != 2 || start >= end || end > self.rows() {
            return Err(TensorError::InvalidShape(self.shape.clone()));
        }
        let c = self.cols();
        Self::new(vec![end - start, c], self.data[start * c..end * c].to_vec())
    }

    /// Rows selected by index, in the given order.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Self> {
        let c = self.cols();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            if i >= self.rows() {
                return Err(TensorError::InvalidShape(self.shape.clone()));
            }
            data.extend_from_slice(self.row(i));
        }
        Self::new(vec![idx.len(), c], data)
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(parts: &[&Tensor]) -> Result<Self> {
        let c = parts.first().map_or(0, |t| t.cols());
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if p.cols() != c {
                return Err(TensorError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: parts[0].shape.clone(),
                    rhs: p.shape.clone(),
                });
            }
            rows += p.rows();
            data.extend_from_slice(&p.data);
        }
        Self::new(vec![rows, c], data)
    }

    fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// `c = a·b` for row-major `a: m×k`, `b: k×n`, with optional transposes
/// expressed as strides.
fn gemm(m: usize, k: usize, n: usize, a: &[f64], a_t: bool, b: &[f64], b_t: bool) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    // a is stored m×k (or k×m when transposed); same for b.
    let (rsa, csa) = if a_t { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_t { (1, k as isize) } else { (n as isize, 1) };
    // SAFETY: slices are sized m*k, k*n and m*n respectively and the strides
    // above address exactly those elements.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    c
}

/// Plain matrix product outside of any tape.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 2 || b.rank() != 2 || a.shape[1] != b.shape[0] {
        return Err(TensorError::ShapeMismatch {
            op: "matmul",
            lhs: a.shape.clone(),
            rhs: b.shape.clone(),
        });
    }
    let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
    Tensor::new(vec![m, n], gemm(m, k, n, &a.data, false, &b.data, false))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Reduction kinds for [`Var::reduce`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduce {
    Sum,
    Mean,
}

/// Elementwise kinds accepted by [`Var::elementwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Unary {
    Neg,
    Log,
    Exp,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu(f64),
    Abs,
    Clip(f64, f64),
    /// `log(1 + e^x)`, computed stably.
    Softplus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binary {
    Add,
    Sub,
    Mul,
}

#[derive(Clone, Debug)]
enum Op {
    Unary(Unary),
    Binary(Binary),
    MatMul,
    Reduce(Reduce, Option<usize>),
    TileRows,
    LogSoftmax,
    Pick(Rc<[usize]>),
}

#[derive(Clone, Debug)]
struct Record {
    op: Op,
    inputs: Vec<NodeId>,
}

struct Node {
    value: Tensor,
    requires_grad: bool,
    grad: Option<Tensor>,
    record: Option<Record>,
}

/// Operation log for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a tensor living on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    id: NodeId,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var({}, {:?})", self.id.0, self.shape())
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

    fn push(&self, value: Tensor, requires_grad: bool, record: Option<Record>) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        let id = NodeId(nodes.len());
        nodes.push(Node {
            value,
            requires_grad,
            grad: None,
            record,
        });
        Var { tape: self, id }
    }

    /// A leaf that receives gradients.
    pub fn leaf(&self, value: Tensor) -> Var<'_> {
        self.push(value, true, None)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&self, value: Tensor) -> Var<'_> {
        self.push(value, false, None)
    }

    pub fn scalar(&self, value: f64) -> Var<'_> {
        self.constant(Tensor::scalar(value))
    }

    fn op(&self, op: Op, inputs: &[Var<'_>], value: Tensor) -> Var<'_> {
        let requires_grad = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| nodes[v.id.0].requires_grad)
        };
        let record = requires_grad.then(|| Record {
            op,
            inputs: inputs.iter().map(|v| v.id).collect(),
        });
        self.push(value, requires_grad, record)
    }

    pub fn value(&self, v: Var<'_>) -> Ref<'_, Tensor> {
        Ref::map(self.nodes.borrow(), |n| &n[v.id.0].value)
    }

    /// Accumulated gradient of a node, if any backward pass reached it.
    pub fn grad(&self, v: Var<'_>) -> Option<Tensor> {
        self.nodes.borrow()[v.id.0].grad.clone()
    }

    pub fn zero_grad(&self) {
        for n in self.nodes.borrow_mut().iter_mut() {
            n.grad = None;
        }
    }

    /// Reverse sweep from a scalar loss. Gradients add onto whatever earlier
    /// sweeps left behind.
    pub fn backward(&self, loss: Var<'_>) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        let root = &nodes[loss.id.0];
        if root.value.len() != 1 {
            return Err(TensorError::NotScalar(root.value.shape.clone()));
        }
        if !root.requires_grad {
            return Ok(());
        }
        let mut local: Vec<Option<Tensor>> = vec![None; loss.id.0 + 1];
        local[loss.id.0] = Some(Tensor::full(&root.value.shape, 1.0));

        for id in (0..=loss.id.0).rev() {
            let Some(upstream) = local[id].take() else {
                continue;
            };
            if let Some(record) = &nodes[id].record {
                let wants: Vec<bool> = record
                    .inputs
                    .iter()
                    .map(|i| nodes[i.0].requires_grad)
                    .collect();
                let grads = backprop(record, &nodes, &nodes[id].value, &upstream, &wants);
                for ((input, g), want) in record.inputs.iter().zip(grads).zip(wants) {
                    if !want {
                        continue;
                    }
                    let g = g.expect("gradient requested but not produced");
                    match &mut local[input.0] {
                        Some(acc) => acc.add_assign(&g),
                        slot @ None => *slot = Some(g),
                    }
                }
            }
            let node = &mut nodes[id];
            match &mut node.grad {
                Some(acc) => acc.add_assign(&upstream),
                slot @ None => *slot = Some(upstream),
            }
        }
        Ok(())
    }
}

fn unary_forward(kind: Unary, x: f64) -> f64 {
    match kind {
        Unary::Neg => -x,
        Unary::Log => x.ln(),
        Unary::Exp => x.exp(),
        Unary::Sigmoid => sigmoid(x),
        Unary::Tanh => x.tanh(),
        Unary::Relu => x.max(0.0),
        Unary::LeakyRelu(slope) => {
            if x > 0.0 {
                x
            } else {
                slope * x
            }
        }
        Unary::Abs => x.abs(),
        Unary::Clip(lo, hi) => x.clamp(lo, hi),
        Unary::Softplus => softplus(x),
    }
}

/// Derivative given the input `x` and the output `y`.
fn unary_derivative(kind: Unary, x: f64, y: f64) -> f64 {
    match kind {
        Unary::Neg => -1.0,
        Unary::Log => 1.0 / x,
        Unary::Exp => y,
        Unary::Sigmoid => y * (1.0 - y),
        Unary::Tanh => 1.0 - y * y,
        Unary::Relu => {
            if x > 0.0 {
                1.0
            } else {
                0.0
            }
        }
        Unary::LeakyRelu(slope) => {
            if x > 0.0 {
                1.0
            } else {
                slope
            }
        }
        Unary::Abs => {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
        Unary::Clip(lo, hi) => {
            if x >= lo && x <= hi {
                1.0
            } else {
                0.0
            }
        }
        Unary::Softplus => sigmoid(x),
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

pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Sums a gradient down to a one-element operand's shape.
fn collapse_to(g: Tensor, shape: &[usize]) -> Tensor {
    if g.shape == shape {
        g
    } else {
        Tensor {
            shape: shape.to_vec(),
            data: vec![g.data.iter().sum()],
        }
    }
}

/// Splits a shape around `axis` into (outer, extent, inner) counts.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn backprop(
    record: &Record,
    nodes: &[Node],
    out: &Tensor,
    g: &Tensor,
    wants: &[bool],
) -> Vec<Option<Tensor>> {
    let input = |i: usize| &nodes[record.inputs[i].0].value;
    match &record.op {
        Op::Unary(kind) => {
            let x = input(0);
            let data = x
                .data
                .iter()
                .zip(&out.data)
                .zip(&g.data)
                .map(|((&x, &y), &g)| g * unary_derivative(*kind, x, y))
                .collect();
            vec![Some(Tensor {
                shape: x.shape.clone(),
                data,
            })]
        }
        Op::Binary(kind) => {
            let (a, b) = (input(0), input(1));
            let ga = wants[0].then(|| {
                let full = match kind {
                    Binary::Add | Binary::Sub => g.clone(),
                    Binary::Mul => zip_broadcast(g, b, |g, b| g * b),
                };
                collapse_to(full, &a.shape)
            });
            let gb = wants[1].then(|| {
                let full = match kind {
                    Binary::Add => g.clone(),
                    Binary::Sub => g.map(|v| -v),
                    Binary::Mul => zip_broadcast(g, a, |g, a| g * a),
                };
                collapse_to(full, &b.shape)
            });
            vec![ga, gb]
        }
        Op::MatMul => {
            let (a, b) = (input(0), input(1));
            let (m, k, n) = (a.shape[0], a.shape[1], b.shape[1]);
            // dA = dC·Bᵀ, dB = Aᵀ·dC
            let ga = wants[0].then(|| Tensor {
                shape: a.shape.clone(),
                data: gemm(m, n, k, &g.data, false, &b.data, true),
            });
            let gb = wants[1].then(|| Tensor {
                shape: b.shape.clone(),
                data: gemm(k, m, n, &a.data, true, &g.data, false),
            });
            vec![ga, gb]
        }
        Op::Reduce(kind, axis) => {
            let a = input(0);
            let mut data = vec![0.0; a.len()];
            match axis {
                None => {
                    let scale = match kind {
                        Reduce::Sum => 1.0,
                        Reduce::Mean => 1.0 / a.len() as f64,
                    };
                    data.fill(g.data[0] * scale);
                }
                Some(axis) => {
                    let (outer, extent, inner) = axis_split(&a.shape, *axis);
                    let scale = match kind {
                        Reduce::Sum => 1.0,
                        Reduce::Mean => 1.0 / extent as f64,
                    };
                    for o in 0..outer {
                        for e in 0..extent {
                            for i in 0..inner {
                                data[(o * extent + e) * inner + i] = g.data[o * inner + i] * scale;
                            }
                        }
                    }
                }
            }
            vec![Some(Tensor {
                shape: a.shape.clone(),
                data,
            })]
        }
        Op::TileRows => {
            let a = input(0);
            let n = a.len();
            let mut data = vec![0.0; n];
            for row in g.data.chunks_exact(n) {
                for (d, v) in data.iter_mut().zip(row) {
                    *d += v;
                }
            }
            vec![Some(Tensor {
                shape: a.shape.clone(),
                data,
            })]
        }
        Op::LogSoftmax => {
            let c = out.cols();
            let mut data = Vec::with_capacity(out.len());
            for (yrow, grow) in out.data.chunks_exact(c).zip(g.data.chunks_exact(c)) {
                let gsum: f64 = grow.iter().sum();
                data.extend(yrow.iter().zip(grow).map(|(&y, &g)| g - y.exp() * gsum));
            }
            vec![Some(Tensor {
                shape: out.shape.clone(),
                data,
            })]
        }
        Op::Pick(labels) => {
            let a = input(0);
            let c = a.cols();
            let mut data = vec![0.0; a.len()];
            for (r, &l) in labels.iter().enumerate() {
                data[r * c + l] = g.data[r];
            }
            vec![Some(Tensor {
                shape: a.shape.clone(),
                data,
            })]
        }
    }
}

/// Elementwise combination where either side may be a single element.
fn zip_broadcast(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    if a.len() == b.len() {
        Tensor {
            shape: a.shape.clone(),
            data: a.data.iter().zip(&b.data).map(|(&x, &y)| f(x, y)).collect(),
        }
    } else if b.len() == 1 {
        let y = b.data[0];
        a.map(|x| f(x, y))
    } else {
        let x = a.data[0];
        b.map(|y| f(x, y))
    }
}

impl<'t> Var<'t> {
    pub fn id(self) -> NodeId {
        self.id
    }

    pub fn tape(self) -> &'t Tape {
        self.tape
    }

    pub fn shape(self) -> Vec<usize> {
        self.tape.nodes.borrow()[self.id.0].value.shape.clone()
    }

    pub fn requires_grad(self) -> bool {
        self.tape.nodes.borrow()[self.id.0].requires_grad
    }

    /// Copy of the current value.
    pub fn value(self) -> Tensor {
        self.tape.nodes.borrow()[self.id.0].value.clone()
    }

    pub fn item(self) -> Result<f64> {
        self.tape.nodes.borrow()[self.id.0].value.item()
    }

    pub fn grad(self) -> Option<Tensor> {
        self.tape.grad(self)
    }

    pub fn backward(self) -> Result<()> {
        self.tape.backward(self)
    }

    pub fn elementwise(self, kind: Unary) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let x = &nodes[self.id.0].value;
            if kind == Unary::Log {
                if let Some(&bad) = x.data.iter().find(|&&v| v <= 0.0 || v.is_nan()) {
                    return Err(TensorError::Domain { op: "log", value: bad });
                }
            }
            x.map(|v| unary_forward(kind, v))
        };
        Ok(self.tape.op(Op::Unary(kind), &[self], value))
    }

    fn unary(self, kind: Unary) -> Var<'t> {
        self.elementwise(kind)
            .expect("only log has a restricted domain")
    }

    pub fn neg(self) -> Var<'t> {
        self.unary(Unary::Neg)
    }

    /// Natural log; the argument must be strictly positive.
    pub fn log(self) -> Result<Var<'t>> {
        self.elementwise(Unary::Log)
    }

    /// `log(max(x, floor))`, the guarded form used by every loss.
    pub fn clamped_log(self, floor: f64) -> Var<'t> {
        self.clip(floor, f64::INFINITY)
            .log()
            .expect("clamped argument is positive")
    }

    pub fn exp(self) -> Var<'t> {
        self.unary(Unary::Exp)
    }

    pub fn sigmoid(self) -> Var<'t> {
        self.unary(Unary::Sigmoid)
    }

    pub fn tanh(self) -> Var<'t> {
        self.unary(Unary::Tanh)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(Unary::Relu)
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(Unary::LeakyRelu(slope))
    }

    pub fn abs(self) -> Var<'t> {
        self.unary(Unary::Abs)
    }

    pub fn clip(self, lo: f64, hi: f64) -> Var<'t> {
        self.unary(Unary::Clip(lo, hi))
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(Unary::Softplus)
    }

    pub fn binary(self, kind: Binary, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let (a, b) = (&nodes[self.id.0].value, &nodes[other.id.0].value);
            if a.shape != b.shape && a.len() != 1 && b.len() != 1 {
                return Err(TensorError::ShapeMismatch {
                    op: "elementwise",
                    lhs: a.shape.clone(),
                    rhs: b.shape.clone(),
                });
            }
            let mut out = match kind {
                Binary::Add => zip_broadcast(a, b, |x, y| x + y),
                Binary::Sub => zip_broadcast(a, b, |x, y| x - y),
                Binary::Mul => zip_broadcast(a, b, |x, y| x * y),
            };
            // Equal lengths with different shapes only happens for one-element
            // operands; keep the higher-rank shape.
            if a.len() == b.len() && b.rank() > a.rank() {
                out.shape = b.shape.clone();
            }
            out
        };
        Ok(self.tape.op(Op::Binary(kind), &[self, other], value))
    }

    pub fn add(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Binary::Add, other)
    }

    pub fn sub(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Binary::Sub, other)
    }

    pub fn mul(self, other: Var<'t>) -> Result<Var<'t>> {
        self.binary(Binary::Mul, other)
    }

    pub fn square(self) -> Var<'t> {
        self.mul(self).expect("same shape")
    }

    pub fn scale(self, factor: f64) -> Var<'t> {
        let c = self.tape.scalar(factor);
        self.mul(c).expect("scalar broadcast")
    }

    pub fn add_scalar(self, offset: f64) -> Var<'t> {
        let c = self.tape.scalar(offset);
        self.add(c).expect("scalar broadcast")
    }

    /// `1 - x`.
    pub fn one_minus(self) -> Var<'t> {
        let one = self.tape.scalar(1.0);
        one.sub(self).expect("scalar broadcast")
    }

    pub fn matmul(self, other: Var<'t>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            matmul(&nodes[self.id.0].value, &nodes[other.id.0].value)?
        };
        Ok(self.tape.op(Op::MatMul, &[self, other], value))
    }

    pub fn reduce(self, kind: Reduce, axis: Option<usize>) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id.0].value;
            match axis {
                None => {
                    let s: f64 = a.data.iter().sum();
                    Tensor::scalar(match kind {
                        Reduce::Sum => s,
                        Reduce::Mean => s / a.len() as f64,
                    })
                }
                Some(axis) => {
                    if axis >= a.rank() {
                        return Err(TensorError::AxisOutOfRange {
                            axis,
                            rank: a.rank(),
                        });
                    }
                    let (outer, extent, inner) = axis_split(&a.shape, axis);
                    let mut data = vec![0.0; outer * inner];
                    for o in 0..outer {
                        for e in 0..extent {
                            for i in 0..inner {
                                data[o * inner + i] += a.data[(o * extent + e) * inner + i];
                            }
                        }
                    }
                    if kind == Reduce::Mean {
                        data.iter_mut().for_each(|v| *v /= extent as f64);
                    }
                    let mut shape = a.shape.clone();
                    shape.remove(axis);
                    Tensor { shape, data }
                }
            }
        };
        Ok(self.tape.op(Op::Reduce(kind, axis), &[self], value))
    }

    pub fn sum(self) -> Var<'t> {
        self.reduce(Reduce::Sum, None).expect("full reduction")
    }

    pub fn mean(self) -> Var<'t> {
        self.reduce(Reduce::Mean, None).expect("full reduction")
    }

    /// Repeats a vector `[n]` into a `[rows, n]` matrix.
    pub fn tile_rows(self, rows: usize) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id.0].value;
            if a.rank() != 1 || rows == 0 {
                return Err(TensorError::InvalidShape(a.shape.clone()));
            }
            let mut data = Vec::with_capacity(rows * a.len());
            for _ in 0..rows {
                data.extend_from_slice(&a.data);
            }
            Tensor {
                shape: vec![rows, a.len()],
                data,
            }
        };
        Ok(self.tape.op(Op::TileRows, &[self], value))
    }

    /// Row-wise log-softmax of a matrix.
    pub fn log_softmax(self) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id.0].value;
            if a.rank() != 2 {
                return Err(TensorError::InvalidShape(a.shape.clone()));
            }
            let c = a.cols();
            let mut data = Vec::with_capacity(a.len());
            for row in a.data.chunks_exact(c) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                data.extend(row.iter().map(|v| v - lse));
            }
            Tensor {
                shape: a.shape.clone(),
                data,
            }
        };
        Ok(self.tape.op(Op::LogSoftmax, &[self], value))
    }

    /// `out[r] = self[r, labels[r]]`.
    pub fn pick(self, labels: &[usize]) -> Result<Var<'t>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            let a = &nodes[self.id.0].value;
            if a.rank() != 2 || labels.len() != a.rows() {
                return Err(TensorError::ShapeMismatch {
                    op: "pick",
                    lhs: a.shape.clone(),
                    rhs: vec![labels.len()],
                });
            }
            let c = a.cols();
            if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
                return Err(TensorError::AxisOutOfRange { axis: bad, rank: c });
            }
            Tensor::vector(
                labels
                    .iter()
                    .enumerate()
                    .map(|(r, &l)| a.data[r * c + l])
                    .collect(),
            )
        };
        Ok(self.tape.op(Op::Pick(labels.into()), &[self], value))
    }
}

/// Compares reverse-mode gradients of `f` at `xs` against central differences.
///
/// Returns `max |analytic - numeric| / max(1, |analytic|, |numeric|)` over
/// every coordinate of every input, or `+inf` if anything is non-finite or
/// `f` fails.
pub fn gradient_check_many<F>(f: F, xs: &[Tensor], h: f64) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let eval = |inputs: &[Tensor]| -> Option<f64> {
        let tape = Tape::new();
        let vars: Vec<_> = inputs.iter().map(|x| tape.constant(x.clone())).collect();
        f(&tape, &vars).ok()?.item().ok()
    };

    let tape = Tape::new();
    let vars: Vec<_> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
    let analytic: Vec<Tensor> = match f(&tape, &vars).and_then(|loss| {
        loss.backward()?;
        Ok(vars
            .iter()
            .map(|v| v.grad().unwrap_or_else(|| Tensor::zeros(&v.shape())))
            .collect())
    }) {
        Ok(g) => g,
        Err(_) => return f64::INFINITY,
    };

    let mut worst: f64 = 0.0;
    let mut probe: Vec<Tensor> = xs.to_vec();
    for (k, x) in xs.iter().enumerate() {
        for i in 0..x.len() {
            probe[k].data[i] = x.data[i] + h;
            let plus = eval(&probe);
            probe[k].data[i] = x.data[i] - h;
            let minus = eval(&probe);
            probe[k].data[i] = x.data[i];
            let (Some(plus), Some(minus)) = (plus, minus) else {
                return f64::INFINITY;
            };
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k].data[i];
            if !numeric.is_finite() || !a.is_finite() {
                return f64::INFINITY;
            }
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    worst
}

/// Single-input form of [`gradient_check_many`].
pub fn gradient_check<F>(f: F, x: &Tensor, h: f64) -> f64
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> Result<Var<'t>>,
{
    gradient_check_many(|tape, vars| f(tape, vars[0]), std::slice::from_ref(x), h)
}
