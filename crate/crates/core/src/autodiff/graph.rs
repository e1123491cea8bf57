use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Parameter name → ∂loss/∂parameter, one entry per parameter reachable from the loss.
pub type GradientMap = BTreeMap<String, Tensor>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
    Abs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Tanh,
    Sigmoid,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    MatMul(Var, Var),
    MatVec(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Abs(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Bilinear { left: Var, slices: Var, right: Var },
    Trilinear { first: Var, slices: Var, second: Var, third: Var },
    Contract { tensor: Var, vector: Var, axis: usize },
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    Scale { vector: Var, factor: Var },
    Affine { input: Var, alpha: f64 },
    Row { table: Var, row: usize },
    RowSum { table: Var, rows: Vec<usize> },
    Select { input: Var, at: usize },
    Dot(Var, Var),
    Sum(Var),
    SumSquares(Var),
    CrossEntropy { logits: Var, target: usize, probs: Vec<f64> },
    Mask { input: Var, mask: Vec<f64> },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// A differentiation tape, rebuilt for every forward pass.
///
/// Nodes are appended in evaluation order, so every input of a node has a
/// smaller index than the node itself. The graph is single-owner; run one per
/// sample to parallelize.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
    params: RefCell<HashMap<String, Var>>,
}

/// `(product of dims before axis, dim at axis, product of dims after axis)`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (shape[..axis].iter().product(), shape[axis], shape[axis + 1..].iter().product())
}

fn shape_of(nodes: &[Node], v: Var) -> &[usize] {
    nodes[v.0].value.shape()
}

fn vals(nodes: &[Node], v: Var) -> &[f64] {
    nodes[v.0].value.data()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_in_place(out: &mut [f64]) {
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in out.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}

/// Numerically stable softmax of a plain slice.
pub fn softmax_values(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    softmax_in_place(&mut out);
    out
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor, op: Op, requires_grad: bool, name: &'static str) -> Result<Var> {
        if cfg!(debug_assertions) && !value.is_finite() {
            return Err(Error::Numeric(name.to_string()));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, requires_grad });
        Ok(Var(nodes.len() - 1))
    }

    fn any_grad(&self, inputs: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        inputs.iter().any(|v| nodes[v.0].requires_grad)
    }

    /// Records a detached constant.
    pub fn constant(&self, value: Tensor) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op: Op::Constant, requires_grad: false });
        Var(nodes.len() - 1)
    }

    /// Records a named trainable leaf. Binding the same name twice returns the
    /// first handle, so gradients from every use accumulate in one place.
    pub fn param(&self, name: &str, value: &Tensor) -> Var {
        if let Some(&v) = self.params.borrow().get(name) {
            return v;
        }
        let var = {
            let mut nodes = self.nodes.borrow_mut();
            nodes.push(Node { value: value.clone(), op: Op::Param(name.to_string()), requires_grad: true });
            Var(nodes.len() - 1)
        };
        self.params.borrow_mut().insert(name.to_string(), var);
        var
    }

    pub fn value(&self, v: Var) -> Tensor {
        self.nodes.borrow()[v.0].value.clone()
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Value of a one-element node.
    pub fn scalar(&self, v: Var) -> Result<f64> {
        self.nodes.borrow()[v.0].value.item()
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (sa, sb) = (shape_of(&nodes, a), shape_of(&nodes, b));
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(Error::dim("matmul", sa, sb));
            }
            let (m, n, p) = (sa[0], sa[1], sb[1]);
            let (x, y) = (vals(&nodes, a), vals(&nodes, b));
            let mut out = vec![0.0; m * p];
            for i in 0..m {
                let row = &mut out[i * p..(i + 1) * p];
                for k in 0..n {
                    let s = x[i * n + k];
                    if s == 0.0 {
                        continue;
                    }
                    for (o, &w) in row.iter_mut().zip(&y[k * p..(k + 1) * p]) {
                        *o += s * w;
                    }
                }
            }
            Tensor::from_parts(vec![m, p], out)
        };
        self.push(value, Op::MatMul(a, b), self.any_grad(&[a, b]), "matmul")
    }

    /// Matrix–vector product `a · x` with `a: m×n`, `x: n`.
    pub fn matvec(&self, a: Var, x: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (sa, sx) = (shape_of(&nodes, a), shape_of(&nodes, x));
            if sa.len() != 2 || sx.len() != 1 || sa[1] != sx[0] {
                return Err(Error::dim("matvec", sa, sx));
            }
            let n = sa[1];
            let (w, v) = (vals(&nodes, a), vals(&nodes, x));
            let out = w.chunks_exact(n).map(|row| dot(row, v)).collect();
            Tensor::from_parts(vec![sa[0]], out)
        };
        self.push(value, Op::MatVec(a, x), self.any_grad(&[a, x]), "matvec")
    }

    pub fn transpose(&self, a: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let sa = shape_of(&nodes, a);
            if sa.len() != 2 {
                return Err(Error::dim("transpose", sa, &[]));
            }
            let (m, n) = (sa[0], sa[1]);
            let x = vals(&nodes, a);
            let mut out = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    out[j * m + i] = x[i * n + j];
                }
            }
            Tensor::from_parts(vec![n, m], out)
        };
        self.push(value, Op::Transpose(a), self.any_grad(&[a]), "transpose")
    }

    fn binary(&self, a: Var, b: Var, name: &'static str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (sa, sb) = (shape_of(&nodes, a), shape_of(&nodes, b));
            if sa != sb {
                return Err(Error::dim(name, sa, sb));
            }
            let out = vals(&nodes, a).iter().zip(vals(&nodes, b)).map(|(&x, &y)| f(x, y)).collect();
            Tensor::from_parts(sa.to_vec(), out)
        };
        self.push(value, op, self.any_grad(&[a, b]), name)
    }

    fn unary(&self, a: Var, name: &'static str, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
        };
        self.push(value, op, self.any_grad(&[a]), name)
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Hadamard product.
    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    pub fn abs(&self, a: Var) -> Result<Var> {
        self.unary(a, "abs", f64::abs, Op::Abs(a))
    }

    /// Pointwise op selected by kind; `b` is required for the binary kinds and ignored by `Abs`.
    pub fn elementwise(&self, kind: ElementwiseKind, a: Var, b: Option<Var>) -> Result<Var> {
        let rhs = || b.ok_or_else(|| Error::arg(format!("{kind:?} needs two operands")));
        match kind {
            ElementwiseKind::Add => self.add(a, rhs()?),
            ElementwiseKind::Sub => self.sub(a, rhs()?),
            ElementwiseKind::Mul => self.mul(a, rhs()?),
            ElementwiseKind::Abs => self.abs(a),
        }
    }

    pub fn tanh(&self, a: Var) -> Result<Var> {
        self.unary(a, "tanh", f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&self, a: Var) -> Result<Var> {
        self.unary(a, "sigmoid", sigmoid, Op::Sigmoid(a))
    }

    pub fn activation(&self, kind: ActivationKind, a: Var) -> Result<Var> {
        match kind {
            ActivationKind::Tanh => self.tanh(a),
            ActivationKind::Sigmoid => self.sigmoid(a),
        }
    }

    /// `alpha · a + beta` for constant `alpha`, `beta`.
    pub fn affine(&self, a: Var, alpha: f64, beta: f64) -> Result<Var> {
        self.unary(a, "affine", |x| alpha * x + beta, Op::Affine { input: a, alpha })
    }

    pub fn softmax(&self, a: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if t.rank() != 1 {
                return Err(Error::dim("softmax", t.shape(), &[]));
            }
            Tensor::from_parts(t.shape().to_vec(), softmax_values(t.data()))
        };
        self.push(value, Op::Softmax(a), self.any_grad(&[a]), "softmax")
    }

    /// Per-slice bilinear form: `out[l] = leftᵀ · slices[l] · right`.
    pub fn bilinear_slices(&self, left: Var, slices: Var, right: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (sl, sw, sr) = (shape_of(&nodes, left), shape_of(&nodes, slices), shape_of(&nodes, right));
            if sw.len() != 3 || sl.len() != 1 || sw[1] != sl[0] {
                return Err(Error::dim("bilinear_slices (left operand vs slice tensor)", sl, sw));
            }
            if sr.len() != 1 || sw[2] != sr[0] {
                return Err(Error::dim("bilinear_slices (slice tensor vs right operand)", sw, sr));
            }
            let (k, d1, d2) = (sw[0], sw[1], sw[2]);
            let (x, w, y) = (vals(&nodes, left), vals(&nodes, slices), vals(&nodes, right));
            let out = (0..k)
                .map(|l| {
                    let slice = &w[l * d1 * d2..(l + 1) * d1 * d2];
                    let mut acc = 0.0;
                    for (row, &xa) in slice.chunks_exact(d2).zip(x) {
                        acc += dot(row, y) * xa;
                    }
                    acc
                })
                .collect();
            Tensor::from_parts(vec![k], out)
        };
        self.push(value, Op::Bilinear { left, slices, right }, self.any_grad(&[left, slices, right]), "bilinear_slices")
    }

    /// Per-slice trilinear form: `out[l] = Σ first[a]·second[b]·third[e]·slices[l,a,b,e]`.
    ///
    /// Evaluated as `second` contracted into mode 2 first, then `third`, then `first`,
    /// matching [`Graph::contract`] applied in that order.
    pub fn trilinear_slices(&self, first: Var, slices: Var, second: Var, third: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let sw = shape_of(&nodes, slices);
            let dims = [shape_of(&nodes, first), shape_of(&nodes, second), shape_of(&nodes, third)];
            if sw.len() != 4 {
                return Err(Error::dim("trilinear_slices", sw, dims[0]));
            }
            for (mode, s) in dims.iter().enumerate() {
                if s.len() != 1 || s[0] != sw[mode + 1] {
                    return Err(Error::dim("trilinear_slices", sw, s));
                }
            }
            let (k, d1, d2, d3) = (sw[0], sw[1], sw[2], sw[3]);
            let (a, w, b, c) = (vals(&nodes, first), vals(&nodes, slices), vals(&nodes, second), vals(&nodes, third));
            let mut fiber = vec![0.0; d3];
            let out = (0..k)
                .map(|l| {
                    let mut total = 0.0;
                    for (i, &ai) in a.iter().enumerate() {
                        let base = (l * d1 + i) * d2 * d3;
                        contract_middle(&w[base..base + d2 * d3], b, &mut fiber);
                        total += dot(&fiber, c) * ai;
                    }
                    total
                })
                .collect();
            Tensor::from_parts(vec![k], out)
        };
        self.push(
            value,
            Op::Trilinear { first, slices, second, third },
            self.any_grad(&[first, slices, second, third]),
            "trilinear_slices",
        )
    }

    /// Contracts `vector` into axis `axis` of `tensor`, removing that axis.
    ///
    /// Contracting a slice tensor `[k, d1, d2]` with `y` on axis 2 and then
    /// taking `matvec(·, x)` reproduces [`Graph::bilinear_slices`]`(x, ·, y)`
    /// exactly, which lets callers hoist the `y` contraction out of a loop.
    pub fn contract(&self, tensor: Var, vector: Var, axis: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (st, sv) = (shape_of(&nodes, tensor), shape_of(&nodes, vector));
            if axis >= st.len() || sv.len() != 1 || sv[0] != st[axis] {
                return Err(Error::dim("contract", st, sv));
            }
            let (pre, n, post) = split_axis(st, axis);
            let (t, v) = (vals(&nodes, tensor), vals(&nodes, vector));
            let mut out = vec![0.0; pre * post];
            for (p, chunk) in out.chunks_exact_mut(post).enumerate() {
                contract_middle(&t[p * n * post..(p + 1) * n * post], v, chunk);
            }
            let mut shape: Vec<usize> = st.to_vec();
            shape.remove(axis);
            if shape.is_empty() {
                shape.push(1);
            }
            Tensor::from_parts(shape, out)
        };
        self.push(value, Op::Contract { tensor, vector, axis }, self.any_grad(&[tensor, vector]), "contract")
    }

    /// Concatenates vectors in order.
    pub fn concat(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::arg("concat needs at least one part"));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let mut out = Vec::new();
            for &p in parts {
                let s = shape_of(&nodes, p);
                if s.len() != 1 {
                    return Err(Error::dim("concat", s, &[]));
                }
                out.extend_from_slice(vals(&nodes, p));
            }
            let n = out.len();
            Tensor::from_parts(vec![n], out)
        };
        self.push(value, Op::Concat(parts.to_vec()), self.any_grad(parts), "concat")
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&self, rows: &[Var]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::arg("stack needs at least one row"));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let first = shape_of(&nodes, rows[0]).to_vec();
            if first.len() != 1 {
                return Err(Error::dim("stack", &first, &[]));
            }
            let mut out = Vec::with_capacity(first[0] * rows.len());
            for &r in rows {
                let s = shape_of(&nodes, r);
                if s != first.as_slice() {
                    return Err(Error::dim("stack", &first, s));
                }
                out.extend_from_slice(vals(&nodes, r));
            }
            Tensor::from_parts(vec![rows.len(), first[0]], out)
        };
        self.push(value, Op::Stack(rows.to_vec()), self.any_grad(rows), "stack")
    }

    /// Multiplies every entry of `vector` by the one-element `factor`.
    pub fn scale(&self, vector: Var, factor: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let sf = shape_of(&nodes, factor);
            if sf != [1] {
                return Err(Error::dim("scale", shape_of(&nodes, vector), sf));
            }
            let s = vals(&nodes, factor)[0];
            let t = &nodes[vector.0].value;
            Tensor::from_parts(t.shape().to_vec(), t.data().iter().map(|v| v * s).collect())
        };
        self.push(value, Op::Scale { vector, factor }, self.any_grad(&[vector, factor]), "scale")
    }

    /// Row `row` of a matrix (embedding lookup).
    pub fn row(&self, table: Var, row: usize) -> Result<Var> {
        self.row_sum(table, &[row])
    }

    /// Sum of the selected rows of a matrix (bag-of-words embedding).
    pub fn row_sum(&self, table: Var, rows: &[usize]) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::arg("row_sum needs at least one row index"));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let s = shape_of(&nodes, table);
            if s.len() != 2 {
                return Err(Error::dim("row_sum", s, &[]));
            }
            let (n, d) = (s[0], s[1]);
            let w = vals(&nodes, table);
            let mut out = vec![0.0; d];
            for &r in rows {
                if r >= n {
                    return Err(Error::arg(format!("row index {r} out of range for {n} rows")));
                }
                for (o, &x) in out.iter_mut().zip(&w[r * d..(r + 1) * d]) {
                    *o += x;
                }
            }
            Tensor::from_parts(vec![d], out)
        };
        let op =
            if rows.len() == 1 { Op::Row { table, row: rows[0] } } else { Op::RowSum { table, rows: rows.to_vec() } };
        self.push(value, op, self.any_grad(&[table]), "row_sum")
    }

    /// Entry `at` of a vector as a one-element tensor.
    pub fn select(&self, input: Var, at: usize) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let s = shape_of(&nodes, input);
            if s.len() != 1 || at >= s[0] {
                return Err(Error::arg(format!("select index {at} out of range for shape {s:?}")));
            }
            Tensor::scalar(vals(&nodes, input)[at])
        };
        self.push(value, Op::Select { input, at }, self.any_grad(&[input]), "select")
    }

    pub fn dot(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let (sa, sb) = (shape_of(&nodes, a), shape_of(&nodes, b));
            if sa.len() != 1 || sa != sb {
                return Err(Error::dim("dot", sa, sb));
            }
            Tensor::scalar(dot(vals(&nodes, a), vals(&nodes, b)))
        };
        self.push(value, Op::Dot(a, b), self.any_grad(&[a, b]), "dot")
    }

    pub fn sum(&self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.nodes.borrow()[a.0].value.data().iter().sum());
        self.push(value, Op::Sum(a), self.any_grad(&[a]), "sum")
    }

    pub fn sum_squares(&self, a: Var) -> Result<Var> {
        let value = Tensor::scalar(self.nodes.borrow()[a.0].value.sum_squares());
        self.push(value, Op::SumSquares(a), self.any_grad(&[a]), "sum_squares")
    }

    /// `-log softmax(logits)[target]`, fused for stability.
    pub fn cross_entropy(&self, logits: Var, target: usize) -> Result<Var> {
        let (value, probs) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[logits.0].value;
            if t.rank() != 1 {
                return Err(Error::dim("cross_entropy", t.shape(), &[]));
            }
            if target >= t.len() {
                return Err(Error::arg(format!("answer id {target} out of range for {} logits", t.len())));
            }
            let x = t.data();
            let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_total = x.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            (Tensor::scalar(log_total - x[target]), softmax_values(x))
        };
        self.push(value, Op::CrossEntropy { logits, target, probs }, self.any_grad(&[logits]), "cross_entropy")
    }

    /// Multiplies by a constant mask of the same length (dropout).
    pub fn mask(&self, input: Var, mask: Vec<f64>) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let t = &nodes[input.0].value;
            if t.len() != mask.len() {
                return Err(Error::dim("mask", t.shape(), &[mask.len()]));
            }
            Tensor::from_parts(t.shape().to_vec(), t.data().iter().zip(&mask).map(|(v, m)| v * m).collect())
        };
        self.push(value, Op::Mask { input, mask }, self.any_grad(&[input]), "mask")
    }

    /// Reverse-mode sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<GradientMap> {
        let nodes = self.nodes.borrow();
        let loss_node = &nodes[loss.0];
        if loss_node.value.len() != 1 {
            return Err(Error::arg(format!("backward needs a scalar loss, got shape {:?}", loss_node.value.shape())));
        }
        let mut grads: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(vec![1.0]);
        let mut out = GradientMap::new();

        for i in (0..=loss.0).rev() {
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let (lower, _) = grads.split_at_mut(i);
            let mut acc = Accumulator { grads: lower, nodes: &nodes };
            match &node.op {
                Op::Constant => {}
                Op::Param(name) => {
                    out.insert(name.clone(), Tensor::from_parts(node.value.shape().to_vec(), g));
                }
                Op::MatMul(a, b) => {
                    let (sa, sb) = (shape_of(&nodes, *a), shape_of(&nodes, *b));
                    let (m, n, p) = (sa[0], sa[1], sb[1]);
                    if let Some(ga) = acc.buf(*a) {
                        let y = vals(&nodes, *b);
                        for i in 0..m {
                            for k in 0..n {
                                ga[i * n + k] += dot(&g[i * p..(i + 1) * p], &y[k * p..(k + 1) * p]);
                            }
                        }
                    }
                    if let Some(gb) = acc.buf(*b) {
                        let x = vals(&nodes, *a);
                        for i in 0..m {
                            for k in 0..n {
                                let s = x[i * n + k];
                                for (o, &gv) in gb[k * p..(k + 1) * p].iter_mut().zip(&g[i * p..(i + 1) * p]) {
                                    *o += s * gv;
                                }
                            }
                        }
                    }
                }
                Op::MatVec(a, x) => {
                    let n = shape_of(&nodes, *a)[1];
                    if let Some(ga) = acc.buf(*a) {
                        let v = vals(&nodes, *x);
                        for (row, &gi) in ga.chunks_exact_mut(n).zip(&g) {
                            if gi != 0.0 {
                                axpy(row, gi, v);
                            }
                        }
                    }
                    if let Some(gx) = acc.buf(*x) {
                        let w = vals(&nodes, *a);
                        for (row, &gi) in w.chunks_exact(n).zip(&g) {
                            if gi != 0.0 {
                                axpy(gx, gi, row);
                            }
                        }
                    }
                }
                Op::Transpose(a) => {
                    let s = shape_of(&nodes, *a);
                    let (m, n) = (s[0], s[1]);
                    if let Some(ga) = acc.buf(*a) {
                        for i in 0..m {
                            for j in 0..n {
                                ga[i * n + j] += g[j * m + i];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    if let Some(ga) = acc.buf(*a) {
                        axpy(ga, 1.0, &g);
                    }
                    if let Some(gb) = acc.buf(*b) {
                        axpy(gb, 1.0, &g);
                    }
                }
                Op::Sub(a, b) => {
                    if let Some(ga) = acc.buf(*a) {
                        axpy(ga, 1.0, &g);
                    }
                    if let Some(gb) = acc.buf(*b) {
                        axpy(gb, -1.0, &g);
                    }
                }
                Op::Mul(a, b) => {
                    if let Some(ga) = acc.buf(*a) {
                        for ((o, &gv), &y) in ga.iter_mut().zip(&g).zip(vals(&nodes, *b)) {
                            *o += gv * y;
                        }
                    }
                    if let Some(gb) = acc.buf(*b) {
                        for ((o, &gv), &x) in gb.iter_mut().zip(&g).zip(vals(&nodes, *a)) {
                            *o += gv * x;
                        }
                    }
                }
                Op::Abs(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        for ((o, &gv), &x) in ga.iter_mut().zip(&g).zip(vals(&nodes, *a)) {
                            *o += if x > 0.0 {
                                gv
                            } else if x < 0.0 {
                                -gv
                            } else {
                                0.0
                            };
                        }
                    }
                }
                Op::Tanh(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        for ((o, &gv), &y) in ga.iter_mut().zip(&g).zip(node.value.data()) {
                            *o += gv * (1.0 - y * y);
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        for ((o, &gv), &y) in ga.iter_mut().zip(&g).zip(node.value.data()) {
                            *o += gv * y * (1.0 - y);
                        }
                    }
                }
                Op::Affine { input, alpha } => {
                    if let Some(ga) = acc.buf(*input) {
                        axpy(ga, *alpha, &g);
                    }
                }
                Op::Softmax(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        let y = node.value.data();
                        let inner = dot(&g, y);
                        for ((o, &gv), &yv) in ga.iter_mut().zip(&g).zip(y) {
                            *o += yv * (gv - inner);
                        }
                    }
                }
                Op::Bilinear { left, slices, right } => {
                    let sw = shape_of(&nodes, *slices);
                    let (k, d1, d2) = (sw[0], sw[1], sw[2]);
                    let (x, w, y) = (vals(&nodes, *left), vals(&nodes, *slices), vals(&nodes, *right));
                    if let Some(gw) = acc.buf(*slices) {
                        for (l, &gl) in g.iter().enumerate().take(k) {
                            if gl == 0.0 {
                                continue;
                            }
                            let block = &mut gw[l * d1 * d2..(l + 1) * d1 * d2];
                            for (row, &xa) in block.chunks_exact_mut(d2).zip(x) {
                                if xa != 0.0 {
                                    axpy(row, gl * xa, y);
                                }
                            }
                        }
                    }
                    if let Some(gx) = acc.buf(*left) {
                        for (l, &gl) in g.iter().enumerate() {
                            let block = &w[l * d1 * d2..(l + 1) * d1 * d2];
                            for (o, row) in gx.iter_mut().zip(block.chunks_exact(d2)) {
                                *o += gl * dot(row, y);
                            }
                        }
                    }
                    if let Some(gy) = acc.buf(*right) {
                        for (l, &gl) in g.iter().enumerate() {
                            let block = &w[l * d1 * d2..(l + 1) * d1 * d2];
                            for (row, &xa) in block.chunks_exact(d2).zip(x) {
                                if xa != 0.0 {
                                    axpy(gy, gl * xa, row);
                                }
                            }
                        }
                    }
                }
                Op::Trilinear { first, slices, second, third } => {
                    let sw = shape_of(&nodes, *slices);
                    let (d1, d2, d3) = (sw[1], sw[2], sw[3]);
                    let (a, w, b, c) =
                        (vals(&nodes, *first), vals(&nodes, *slices), vals(&nodes, *second), vals(&nodes, *third));
                    let fiber = |l: usize, i: usize, j: usize| {
                        let base = ((l * d1 + i) * d2 + j) * d3;
                        &w[base..base + d3]
                    };
                    if let Some(gw) = acc.buf(*slices) {
                        for (l, &gl) in g.iter().enumerate() {
                            for (i, &ai) in a.iter().enumerate() {
                                for (j, &bj) in b.iter().enumerate() {
                                    let s = gl * ai * bj;
                                    if s != 0.0 {
                                        let base = ((l * d1 + i) * d2 + j) * d3;
                                        axpy(&mut gw[base..base + d3], s, c);
                                    }
                                }
                            }
                        }
                    }
                    if let Some(ga) = acc.buf(*first) {
                        for (l, &gl) in g.iter().enumerate() {
                            for (i, o) in ga.iter_mut().enumerate() {
                                let inner: f64 = (0..d2).map(|j| b[j] * dot(fiber(l, i, j), c)).sum();
                                *o += gl * inner;
                            }
                        }
                    }
                    if let Some(gb) = acc.buf(*second) {
                        for (l, &gl) in g.iter().enumerate() {
                            for (i, &ai) in a.iter().enumerate() {
                                for (j, o) in gb.iter_mut().enumerate() {
                                    *o += gl * ai * dot(fiber(l, i, j), c);
                                }
                            }
                        }
                    }
                    if let Some(gc) = acc.buf(*third) {
                        for (l, &gl) in g.iter().enumerate() {
                            for (i, &ai) in a.iter().enumerate() {
                                for (j, &bj) in b.iter().enumerate() {
                                    let s = gl * ai * bj;
                                    if s != 0.0 {
                                        axpy(gc, s, fiber(l, i, j));
                                    }
                                }
                            }
                        }
                    }
                }
                Op::Contract { tensor, vector, axis } => {
                    let (pre, n, post) = split_axis(shape_of(&nodes, *tensor), *axis);
                    if let Some(gt) = acc.buf(*tensor) {
                        let v = vals(&nodes, *vector);
                        for p in 0..pre {
                            let gp = &g[p * post..(p + 1) * post];
                            for (j, &vj) in v.iter().enumerate() {
                                let base = (p * n + j) * post;
                                axpy(&mut gt[base..base + post], vj, gp);
                            }
                        }
                    }
                    if let Some(gv) = acc.buf(*vector) {
                        let t = vals(&nodes, *tensor);
                        for p in 0..pre {
                            let gp = &g[p * post..(p + 1) * post];
                            for (j, o) in gv.iter_mut().enumerate() {
                                let base = (p * n + j) * post;
                                *o += dot(&t[base..base + post], gp);
                            }
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let n = nodes[p.0].value.len();
                        if let Some(gp) = acc.buf(p) {
                            axpy(gp, 1.0, &g[offset..offset + n]);
                        }
                        offset += n;
                    }
                }
                Op::Stack(rows) => {
                    let d = node.value.shape()[1];
                    for (r, &p) in rows.iter().enumerate() {
                        if let Some(gp) = acc.buf(p) {
                            axpy(gp, 1.0, &g[r * d..(r + 1) * d]);
                        }
                    }
                }
                Op::Scale { vector, factor } => {
                    let s = vals(&nodes, *factor)[0];
                    if let Some(gv) = acc.buf(*vector) {
                        axpy(gv, s, &g);
                    }
                    if let Some(gf) = acc.buf(*factor) {
                        gf[0] += dot(&g, vals(&nodes, *vector));
                    }
                }
                Op::Row { table, row } => {
                    let d = g.len();
                    if let Some(gt) = acc.buf(*table) {
                        axpy(&mut gt[row * d..(row + 1) * d], 1.0, &g);
                    }
                }
                Op::RowSum { table, rows } => {
                    let d = g.len();
                    if let Some(gt) = acc.buf(*table) {
                        for &r in rows {
                            axpy(&mut gt[r * d..(r + 1) * d], 1.0, &g);
                        }
                    }
                }
                Op::Select { input, at } => {
                    if let Some(gi) = acc.buf(*input) {
                        gi[*at] += g[0];
                    }
                }
                Op::Dot(a, b) => {
                    if let Some(ga) = acc.buf(*a) {
                        axpy(ga, g[0], vals(&nodes, *b));
                    }
                    if let Some(gb) = acc.buf(*b) {
                        axpy(gb, g[0], vals(&nodes, *a));
                    }
                }
                Op::Sum(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        ga.iter_mut().for_each(|o| *o += g[0]);
                    }
                }
                Op::SumSquares(a) => {
                    if let Some(ga) = acc.buf(*a) {
                        axpy(ga, 2.0 * g[0], vals(&nodes, *a));
                    }
                }
                Op::CrossEntropy { logits, target, probs } => {
                    if let Some(gl) = acc.buf(*logits) {
                        axpy(gl, g[0], probs);
                        gl[*target] -= g[0];
                    }
                }
                Op::Mask { input, mask } => {
                    if let Some(gi) = acc.buf(*input) {
                        for ((o, &gv), &m) in gi.iter_mut().zip(&g).zip(mask) {
                            *o += gv * m;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

struct Accumulator<'a> {
    grads: &'a mut [Option<Vec<f64>>],
    nodes: &'a [Node],
}

impl Accumulator<'_> {
    /// Gradient buffer for `v`, allocated on first use; `None` for constants.
    fn buf(&mut self, v: Var) -> Option<&mut [f64]> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(self.grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]).as_mut_slice())
    }
}

/// Left-to-right accumulation from `0.0`; every forward kernel reduces through
/// this so that contracting in stages reproduces the single-pass result bit for bit.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

/// `out[e] = Σ_j v[j] · block[j, e]`, accumulated in ascending `j` from `0.0`.
#[inline]
fn contract_middle(block: &[f64], v: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let width = out.len();
    for (row, &vj) in block.chunks_exact(width).zip(v) {
        for (o, &w) in out.iter_mut().zip(row) {
            *o += vj * w;
        }
    }
}

#[inline]
fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (o, &v) in y.iter_mut().zip(x) {
        *o += alpha * v;
    }
}
