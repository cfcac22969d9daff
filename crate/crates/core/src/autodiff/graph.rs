use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use super::{Tensor, TensorError};

/// Handle to a node in a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Concat {
        inputs: Vec<NodeId>,
        axis: usize,
    },
    StackRows(Vec<NodeId>),
    Slice {
        input: NodeId,
        axis: usize,
        start: usize,
        len: usize,
    },
    Row {
        input: NodeId,
        index: usize,
    },
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax {
        input: NodeId,
        axis: usize,
    },
    MaxPoolPairs(NodeId),
    Gather {
        table: NodeId,
        ids: Vec<usize>,
    },
    CrossEntropy {
        probs: NodeId,
        target: usize,
    },
    Sum(NodeId),
    Scale(NodeId, f64),
}

#[derive(Debug)]
struct Node<'a> {
    op: Op,
    value: Cow<'a, Tensor>,
    needs_grad: bool,
}

/// Append-only differentiation graph.
///
/// Leaves either borrow a tensor for the graph's lifetime (parameters, so a
/// forward pass never copies the model) or own a constant. Every op appends
/// one node whose inputs already exist, so append order is a topological
/// order and [`Graph::backward`] is a single reverse sweep.
#[derive(Debug, Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
}

/// Gradients of a scalar loss with respect to every node of a graph.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `id`; nodes that do not influence the loss get zeros.
    pub fn get(&self, id: NodeId) -> Tensor {
        let shape = &self.shapes[id.0];
        match self.grads.get(id.0).and_then(Option::as_ref) {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    /// Raw gradient buffer, `None` when the node is off every path to the loss.
    pub fn raw(&self, id: NodeId) -> Option<&[f64]> {
        self.grads.get(id.0).and_then(|g| g.as_deref())
    }
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<(), TensorError> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(TensorError::NonFinite { op })
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut [f64] {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn shape(&self, id: NodeId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    fn push(&mut self, op: Op, value: Tensor, needs_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value: Cow::Owned(value),
            needs_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push_checked(
        &mut self,
        name: &'static str,
        op: Op,
        value: Tensor,
        inputs: &[NodeId],
    ) -> Result<NodeId, TensorError> {
        check_finite(name, &value)?;
        let needs_grad = inputs.iter().any(|i| self.nodes[i.0].needs_grad);
        Ok(self.push(op, value, needs_grad))
    }

    /// Borrowed leaf that receives a gradient.
    pub fn param(&mut self, t: &'a Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value: Cow::Borrowed(t),
            needs_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Borrowed leaf that never receives a gradient.
    pub fn input(&mut self, t: &'a Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value: Cow::Borrowed(t),
            needs_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Owned constant leaf.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t, false)
    }

    /// Owned leaf that receives a gradient.
    pub fn owned_param(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Leaf, t, true)
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<(), TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::ShapeMismatch {
                op,
                left: self.shape(a).to_vec(),
                right: self.shape(b).to_vec(),
            });
        }
        Ok(())
    }

    fn zip_with(
        &mut self,
        name: &'static str,
        op: Op,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<NodeId, TensorError> {
        self.same_shape(name, a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va
            .data()
            .iter()
            .zip(vb.data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push_checked(name, op, value, &[a, b])
    }

    fn map(
        &mut self,
        name: &'static str,
        op: Op,
        a: NodeId,
        f: impl Fn(f64) -> f64,
    ) -> Result<NodeId, TensorError> {
        let va = self.value(a);
        let data = va.data().iter().map(|x| f(*x)).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        self.push_checked(name, op, value, &[a])
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.zip_with("add", Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.zip_with("sub", Op::Sub(a, b), a, b, |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        self.zip_with("mul", Op::Mul(a, b), a, b, |x, y| x * y)
    }

    /// Adds vector `v` (length `n`) to every row of matrix `m` (`r x n`).
    pub fn add_row(&mut self, m: NodeId, v: NodeId) -> Result<NodeId, TensorError> {
        let (ms, vs) = (self.shape(m), self.shape(v));
        if ms.len() != 2 || vs.len() != 1 || ms[1] != vs[0] {
            return Err(TensorError::ShapeMismatch {
                op: "add_row",
                left: ms.to_vec(),
                right: vs.to_vec(),
            });
        }
        let (rows, cols) = (ms[0], ms[1]);
        let mut out = self.value(m).clone();
        let vd = self.value(v).data();
        for r in 0..rows {
            for (o, x) in out.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(vd) {
                *o += x;
            }
        }
        self.push_checked("add_row", Op::AddRow(m, v), out, &[m, v])
    }

    /// `[m,k] x [k,n] -> [m,n]` or `[m,k] x [k] -> [m]`.
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, TensorError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let mismatch = || TensorError::ShapeMismatch {
            op: "matmul",
            left: sa.to_vec(),
            right: sb.to_vec(),
        };
        if sa.len() != 2 {
            return Err(mismatch());
        }
        let (m, k) = (sa[0], sa[1]);
        let (va, vb) = (self.value(a).data(), self.value(b).data());
        let value = match sb {
            [kb] if *kb == k => {
                let out = (0..m)
                    .map(|i| {
                        va[i * k..(i + 1) * k]
                            .iter()
                            .zip(vb)
                            .map(|(x, y)| x * y)
                            .sum()
                    })
                    .collect();
                Tensor::vector(out)
            }
            [kb, n] if *kb == k => {
                let n = *n;
                let mut out = vec![0.0; m * n];
                for i in 0..m {
                    let orow = &mut out[i * n..(i + 1) * n];
                    for (p, &x) in va[i * k..(i + 1) * k].iter().enumerate() {
                        if x == 0.0 {
                            continue;
                        }
                        for (o, y) in orow.iter_mut().zip(&vb[p * n..(p + 1) * n]) {
                            *o += x * y;
                        }
                    }
                }
                Tensor::matrix(m, n, out)
            }
            _ => return Err(mismatch()),
        };
        self.push_checked("matmul", Op::MatMul(a, b), value, &[a, b])
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        let va = self.value(a);
        if va.rank() != 2 {
            return Err(TensorError::Rank {
                op: "transpose",
                shape: va.shape().to_vec(),
            });
        }
        let (r, c) = va.dims2();
        let d = va.data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = d[i * c + j];
            }
        }
        let value = Tensor::matrix(c, r, out);
        self.push_checked("transpose", Op::Transpose(a), value, &[a])
    }

    /// Concatenates tensors of equal rank along `axis`.
    pub fn concat(&mut self, inputs: &[NodeId], axis: usize) -> Result<NodeId, TensorError> {
        let first = *inputs.first().ok_or(TensorError::Empty { op: "concat" })?;
        let s0 = self.shape(first).to_vec();
        if axis >= s0.len() {
            return Err(TensorError::Axis {
                op: "concat",
                axis,
                shape: s0,
            });
        }
        for &i in &inputs[1..] {
            let si = self.shape(i);
            let compatible = si.len() == s0.len()
                && si
                    .iter()
                    .zip(&s0)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(TensorError::ShapeMismatch {
                    op: "concat",
                    left: s0,
                    right: si.to_vec(),
                });
            }
        }
        let total: usize = inputs.iter().map(|&i| self.shape(i)[axis]).sum();
        let value = if s0.len() == 1 || axis == 0 {
            let data = inputs
                .iter()
                .flat_map(|&i| self.value(i).data().iter().copied())
                .collect();
            let mut shape = s0.clone();
            shape[axis] = total;
            Tensor::new(shape, data)?
        } else {
            let rows = s0[0];
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for &i in inputs {
                    data.extend_from_slice(self.value(i).row(r));
                }
            }
            Tensor::matrix(rows, total, data)
        };
        let op = Op::Concat {
            inputs: inputs.to_vec(),
            axis,
        };
        self.push_checked("concat", op, value, inputs)
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack_rows(&mut self, inputs: &[NodeId]) -> Result<NodeId, TensorError> {
        let first = *inputs
            .first()
            .ok_or(TensorError::Empty { op: "stack_rows" })?;
        let s0 = self.shape(first).to_vec();
        if s0.len() != 1 {
            return Err(TensorError::Rank {
                op: "stack_rows",
                shape: s0,
            });
        }
        for &i in inputs {
            if self.shape(i) != s0.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: "stack_rows",
                    left: s0,
                    right: self.shape(i).to_vec(),
                });
            }
        }
        let data = inputs
            .iter()
            .flat_map(|&i| self.value(i).data().iter().copied())
            .collect();
        let value = Tensor::matrix(inputs.len(), s0[0], data);
        self.push_checked("stack_rows", Op::StackRows(inputs.to_vec()), value, inputs)
    }

    /// `len` entries (vector) or rows/columns (matrix) starting at `start`.
    pub fn slice(
        &mut self,
        input: NodeId,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<NodeId, TensorError> {
        let s = self.shape(input).to_vec();
        if axis >= s.len() {
            return Err(TensorError::Axis {
                op: "slice",
                axis,
                shape: s,
            });
        }
        if len == 0 || start + len > s[axis] {
            return Err(TensorError::Index {
                op: "slice",
                index: start + len,
                bound: s[axis],
            });
        }
        let v = self.value(input);
        let value = match (s.len(), axis) {
            (1, _) => Tensor::vector(v.data()[start..start + len].to_vec()),
            (_, 0) => {
                let cols = s[1];
                Tensor::matrix(
                    len,
                    cols,
                    v.data()[start * cols..(start + len) * cols].to_vec(),
                )
            }
            _ => {
                let data = (0..s[0])
                    .flat_map(|r| v.row(r)[start..start + len].iter().copied())
                    .collect();
                Tensor::matrix(s[0], len, data)
            }
        };
        let op = Op::Slice {
            input,
            axis,
            start,
            len,
        };
        self.push_checked("slice", op, value, &[input])
    }

    /// Row `index` of a matrix as a vector.
    pub fn row(&mut self, input: NodeId, index: usize) -> Result<NodeId, TensorError> {
        let v = self.value(input);
        if v.rank() != 2 {
            return Err(TensorError::Rank {
                op: "row",
                shape: v.shape().to_vec(),
            });
        }
        let rows = v.shape()[0];
        if index >= rows {
            return Err(TensorError::Index {
                op: "row",
                index,
                bound: rows,
            });
        }
        let value = Tensor::vector(v.row(index).to_vec());
        self.push_checked("row", Op::Row { input, index }, value, &[input])
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.map("tanh", Op::Tanh(a), a, libm::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        self.map("sigmoid", Op::Sigmoid(a), a, sigmoid)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId, TensorError> {
        self.map("scale", Op::Scale(a, factor), a, |x| x * factor)
    }

    /// Normalized exponentials along `axis` (max-shifted).
    pub fn softmax(&mut self, input: NodeId, axis: usize) -> Result<NodeId, TensorError> {
        let v = self.value(input);
        let s = v.shape().to_vec();
        if axis >= s.len() {
            return Err(TensorError::Axis {
                op: "softmax",
                axis,
                shape: s,
            });
        }
        let mut out = v.clone();
        for lane in lanes(&s, axis) {
            softmax_lane(out.data_mut(), &lane);
        }
        self.push_checked("softmax", Op::Softmax { input, axis }, out, &[input])
    }

    /// Maximum over adjacent pairs: `[2n] -> [n]`.
    pub fn max_pool_pairs(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        let v = self.value(a);
        if v.rank() != 1 || !v.numel().is_multiple_of(2) {
            return Err(TensorError::Rank {
                op: "max_pool_pairs",
                shape: v.shape().to_vec(),
            });
        }
        let data = v.data().chunks_exact(2).map(|p| p[0].max(p[1])).collect();
        self.push_checked(
            "max_pool_pairs",
            Op::MaxPoolPairs(a),
            Tensor::vector(data),
            &[a],
        )
    }

    /// Rows `ids` of `table`, as an `[ids.len(), dim]` matrix.
    pub fn embedding_gather(
        &mut self,
        table: NodeId,
        ids: &[usize],
    ) -> Result<NodeId, TensorError> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(TensorError::Rank {
                op: "embedding_gather",
                shape: t.shape().to_vec(),
            });
        }
        if ids.is_empty() {
            return Err(TensorError::Empty {
                op: "embedding_gather",
            });
        }
        let (rows, cols) = t.dims2();
        let mut data = Vec::with_capacity(ids.len() * cols);
        for &id in ids {
            if id >= rows {
                return Err(TensorError::Index {
                    op: "embedding_gather",
                    index: id,
                    bound: rows,
                });
            }
            data.extend_from_slice(t.row(id));
        }
        let value = Tensor::matrix(ids.len(), cols, data);
        let op = Op::Gather {
            table,
            ids: ids.to_vec(),
        };
        self.push_checked("embedding_gather", op, value, &[table])
    }

    /// A single embedding row as a vector.
    pub fn embedding_lookup(&mut self, table: NodeId, id: usize) -> Result<NodeId, TensorError> {
        let m = self.embedding_gather(table, &[id])?;
        self.row(m, 0)
    }

    /// `-ln p[target]` for an already-normalized distribution `p`.
    pub fn cross_entropy(&mut self, probs: NodeId, target: usize) -> Result<NodeId, TensorError> {
        let v = self.value(probs);
        if v.rank() != 1 {
            return Err(TensorError::Rank {
                op: "cross_entropy",
                shape: v.shape().to_vec(),
            });
        }
        if target >= v.numel() {
            return Err(TensorError::Index {
                op: "cross_entropy",
                index: target,
                bound: v.numel(),
            });
        }
        let value = Tensor::scalar(-libm::log(v.data()[target]));
        self.push_checked(
            "cross_entropy",
            Op::CrossEntropy { probs, target },
            value,
            &[probs],
        )
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, a: NodeId) -> Result<NodeId, TensorError> {
        let s = self.value(a).data().iter().sum();
        self.push_checked("sum", Op::Sum(a), Tensor::scalar(s), &[a])
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, TensorError> {
        let lv = self.value(loss);
        if lv.numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: lv.shape().to_vec(),
            });
        }
        let n = loss.0 + 1;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..n).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.needs_grad {
                self.propagate(&node.op, &node.value, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        let shapes = self.nodes[..n]
            .iter()
            .map(|nd| nd.value.shape().to_vec())
            .collect();
        Ok(Gradients { grads, shapes })
    }

    fn wants(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) | Op::Sub(a, b) => {
                let sign = if matches!(op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if self.wants(*a) {
                    for (s, x) in slot(grads, *a, g.len()).iter_mut().zip(g) {
                        *s += x;
                    }
                }
                if self.wants(*b) {
                    for (s, x) in slot(grads, *b, g.len()).iter_mut().zip(g) {
                        *s += sign * x;
                    }
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.wants(*a) {
                    for ((s, x), y) in slot(grads, *a, g.len()).iter_mut().zip(g).zip(vb) {
                        *s += x * y;
                    }
                }
                if self.wants(*b) {
                    for ((s, x), y) in slot(grads, *b, g.len()).iter_mut().zip(g).zip(va) {
                        *s += x * y;
                    }
                }
            }
            Op::AddRow(m, v) => {
                let cols = self.shape(*v)[0];
                if self.wants(*m) {
                    for (s, x) in slot(grads, *m, g.len()).iter_mut().zip(g) {
                        *s += x;
                    }
                }
                if self.wants(*v) {
                    let sv = slot(grads, *v, cols);
                    for r in g.chunks_exact(cols) {
                        for (s, x) in sv.iter_mut().zip(r) {
                            *s += x;
                        }
                    }
                }
            }
            Op::MatMul(a, b) => self.matmul_backward(*a, *b, g, grads),
            Op::Transpose(a) => {
                if self.wants(*a) {
                    let (r, c) = self.value(*a).dims2();
                    let sa = slot(grads, *a, r * c);
                    for i in 0..r {
                        for j in 0..c {
                            sa[i * c + j] += g[j * r + i];
                        }
                    }
                }
            }
            Op::Concat { inputs, axis } => {
                let rank = out.rank();
                if rank == 1 || *axis == 0 {
                    let mut offset = 0;
                    for &i in inputs {
                        let len = self.value(i).numel();
                        if self.wants(i) {
                            for (s, x) in
                                slot(grads, i, len).iter_mut().zip(&g[offset..offset + len])
                            {
                                *s += x;
                            }
                        }
                        offset += len;
                    }
                } else {
                    let (rows, total) = out.dims2();
                    let mut col = 0;
                    for &i in inputs {
                        let w = self.value(i).dims2().1;
                        if self.wants(i) {
                            let si = slot(grads, i, rows * w);
                            for r in 0..rows {
                                for c in 0..w {
                                    si[r * w + c] += g[r * total + col + c];
                                }
                            }
                        }
                        col += w;
                    }
                }
            }
            Op::StackRows(inputs) => {
                let cols = out.dims2().1;
                for (r, &i) in inputs.iter().enumerate() {
                    if self.wants(i) {
                        for (s, x) in slot(grads, i, cols)
                            .iter_mut()
                            .zip(&g[r * cols..(r + 1) * cols])
                        {
                            *s += x;
                        }
                    }
                }
            }
            Op::Slice {
                input,
                axis,
                start,
                len,
            } => {
                if !self.wants(*input) {
                    return;
                }
                let v = self.value(*input);
                let n = v.numel();
                let si = slot(grads, *input, n);
                match (v.rank(), axis) {
                    (1, _) => {
                        for (s, x) in si[*start..start + len].iter_mut().zip(g) {
                            *s += x;
                        }
                    }
                    (_, 0) => {
                        let cols = v.dims2().1;
                        for (s, x) in si[start * cols..(start + len) * cols].iter_mut().zip(g) {
                            *s += x;
                        }
                    }
                    _ => {
                        let (rows, cols) = v.dims2();
                        for r in 0..rows {
                            for c in 0..*len {
                                si[r * cols + start + c] += g[r * len + c];
                            }
                        }
                    }
                }
            }
            Op::Row { input, index } => {
                if self.wants(*input) {
                    let v = self.value(*input);
                    let cols = v.dims2().1;
                    let si = slot(grads, *input, v.numel());
                    for (s, x) in si[index * cols..(index + 1) * cols].iter_mut().zip(g) {
                        *s += x;
                    }
                }
            }
            Op::Tanh(a) => {
                if self.wants(*a) {
                    for ((s, x), y) in slot(grads, *a, g.len()).iter_mut().zip(g).zip(out.data()) {
                        *s += x * (1.0 - y * y);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if self.wants(*a) {
                    for ((s, x), y) in slot(grads, *a, g.len()).iter_mut().zip(g).zip(out.data()) {
                        *s += x * y * (1.0 - y);
                    }
                }
            }
            Op::Scale(a, f) => {
                if self.wants(*a) {
                    for (s, x) in slot(grads, *a, g.len()).iter_mut().zip(g) {
                        *s += f * x;
                    }
                }
            }
            Op::Softmax { input, axis } => {
                if !self.wants(*input) {
                    return;
                }
                let y = out.data();
                let si = slot(grads, *input, g.len());
                for lane in lanes(out.shape(), *axis) {
                    let dot: f64 = lane.clone().map(|k| g[k] * y[k]).sum();
                    for k in lane {
                        si[k] += y[k] * (g[k] - dot);
                    }
                }
            }
            Op::MaxPoolPairs(a) => {
                if self.wants(*a) {
                    let x = self.value(*a).data();
                    let sa = slot(grads, *a, x.len());
                    for (k, gk) in g.iter().enumerate() {
                        let pick = if x[2 * k] >= x[2 * k + 1] {
                            2 * k
                        } else {
                            2 * k + 1
                        };
                        sa[pick] += gk;
                    }
                }
            }
            Op::Gather { table, ids } => {
                if self.wants(*table) {
                    let t = self.value(*table);
                    let cols = t.dims2().1;
                    let st = slot(grads, *table, t.numel());
                    for (r, &id) in ids.iter().enumerate() {
                        for (s, x) in st[id * cols..(id + 1) * cols]
                            .iter_mut()
                            .zip(&g[r * cols..(r + 1) * cols])
                        {
                            *s += x;
                        }
                    }
                }
            }
            Op::CrossEntropy { probs, target } => {
                if self.wants(*probs) {
                    let p = self.value(*probs).data();
                    slot(grads, *probs, p.len())[*target] -= g[0] / p[*target];
                }
            }
            Op::Sum(a) => {
                if self.wants(*a) {
                    let n = self.value(*a).numel();
                    for s in slot(grads, *a, n).iter_mut() {
                        *s += g[0];
                    }
                }
            }
        }
    }

    fn matmul_backward(&self, a: NodeId, b: NodeId, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k) = va.dims2();
        let (ad, bd) = (va.data(), vb.data());
        if vb.rank() == 1 {
            if self.wants(a) {
                let sa = slot(grads, a, m * k);
                for i in 0..m {
                    if g[i] == 0.0 {
                        continue;
                    }
                    for (s, y) in sa[i * k..(i + 1) * k].iter_mut().zip(bd) {
                        *s += g[i] * y;
                    }
                }
            }
            if self.wants(b) {
                let sb = slot(grads, b, k);
                for i in 0..m {
                    if g[i] == 0.0 {
                        continue;
                    }
                    for (s, x) in sb.iter_mut().zip(&ad[i * k..(i + 1) * k]) {
                        *s += g[i] * x;
                    }
                }
            }
            return;
        }
        let n = vb.dims2().1;
        if self.wants(a) {
            // dA = G * B^T
            let sa = slot(grads, a, m * k);
            for i in 0..m {
                let grow = &g[i * n..(i + 1) * n];
                for p in 0..k {
                    let brow = &bd[p * n..(p + 1) * n];
                    sa[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                }
            }
        }
        if self.wants(b) {
            // dB = A^T * G
            let sb = slot(grads, b, k * n);
            for i in 0..m {
                let grow = &g[i * n..(i + 1) * n];
                for p in 0..k {
                    let x = ad[i * k + p];
                    if x == 0.0 {
                        continue;
                    }
                    for (s, y) in sb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                        *s += x * y;
                    }
                }
            }
        }
    }
}

#[derive(Clone)]
struct Lane {
    start: usize,
    stride: usize,
    len: usize,
    pos: usize,
}

impl Iterator for Lane {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.pos == self.len {
            return None;
        }
        let k = self.start + self.pos * self.stride;
        self.pos += 1;
        Some(k)
    }
}

/// Flat-index lanes along `axis` of a rank-1 or rank-2 shape.
fn lanes(shape: &[usize], axis: usize) -> Vec<Lane> {
    let lane = |start, stride, len| Lane {
        start,
        stride,
        len,
        pos: 0,
    };
    match (shape, axis) {
        ([n], _) => vec![lane(0, 1, *n)],
        ([r, c], 1) => (0..*r).map(|i| lane(i * c, 1, *c)).collect(),
        ([r, c], _) => (0..*c).map(|j| lane(j, *c, *r)).collect(),
        _ => Vec::new(),
    }
}

fn softmax_lane(data: &mut [f64], lane: &Lane) {
    let max = lane
        .clone()
        .map(|k| data[k])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for k in lane.clone() {
        let e = libm::exp(data[k] - max);
        data[k] = e;
        total += e;
    }
    for k in lane.clone() {
        data[k] /= total;
    }
}
