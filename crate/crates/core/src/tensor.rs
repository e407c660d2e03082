//! Dense N-dimensional tensors with reverse-mode automatic differentiation.
//!
//! Values are stored as row-major `f32`; reductions and matrix products
//! accumulate in `f64` to bound rounding drift. Gradients are computed by
//! recording every operation on a [`Tape`] and replaying it in reverse.
//! A tape is rebuilt per forward pass; tensors that entered a tape are
//! never mutated in place.

use crate::error::{Error, Result};

/// Row-major array of 32-bit reals with an optional same-shape gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    requires_grad: bool,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    /// Build a tensor, checking that the data length matches the shape and
    /// every value is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::shape("tensor", format!("zero extent in {shape:?}")));
        }
        if numel != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {shape:?} implies {numel} elements, got {}", data.len()),
            ));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: "tensor" });
        }
        Ok(Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
        })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn filled(shape: Vec<usize>, value: f32) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![value; numel],
            requires_grad: false,
            grad: None,
        }
    }

    pub fn scalar(value: f32) -> Self {
        Tensor::filled(vec![1], value)
    }

    /// Builder: mark this tensor as a differentiation target.
    pub fn with_requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Mutable access for optimizer updates on master copies. Tensors that
    /// were handed to a tape must not be mutated; tapes take owned clones.
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn accumulate_grad(&mut self, g: &[f32]) {
        debug_assert_eq!(g.len(), self.data.len());
        match &mut self.grad {
            Some(cur) => {
                for (c, v) in cur.iter_mut().zip(g) {
                    *c += v;
                }
            }
            None => self.grad = Some(g.to_vec()),
        }
    }

    pub fn clear_grad(&mut self) {
        self.grad = None;
    }
}

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

pub(crate) struct Node {
    pub(crate) value: Tensor,
    op: Option<Box<dyn TapeOp>>,
}

/// One recorded operation: how to push an upstream gradient to its inputs.
/// Input ids always precede the output id, so reverse traversal of the node
/// list visits each node after all of its consumers.
pub(crate) trait TapeOp {
    fn backward(
        &self,
        out: TensorId,
        out_grad: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    );
}

pub(crate) fn val(nodes: &[Node], id: TensorId) -> &Tensor {
    &nodes[id.0].value
}

pub(crate) fn grad_slot<'g>(
    grads: &'g mut [Option<Vec<f32>>],
    id: TensorId,
    numel: usize,
) -> &'g mut [f32] {
    grads[id.0].get_or_insert_with(|| vec![0.0; numel])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementwiseKind {
    Add,
    Sub,
    Mul,
    Relu,
    Sigmoid,
    Log1p,
    Expm1,
}

impl ElementwiseKind {
    fn is_binary(self) -> bool {
        matches!(self, Self::Add | Self::Sub | Self::Mul)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReduceKind {
    Sum,
    Mean,
    Max,
}

/// Append-only record of a forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Insert a tensor as a leaf node (input or parameter copy).
    pub fn leaf(&mut self, t: Tensor) -> TensorId {
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node { value: t, op: None });
        id
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated on a node after [`Tape::backward`].
    pub fn grad(&self, id: TensorId) -> Option<&[f32]> {
        self.nodes[id.0].value.grad()
    }

    pub(crate) fn push(
        &mut self,
        op_name: &'static str,
        value: Tensor,
        op: Box<dyn TapeOp>,
    ) -> Result<TensorId> {
        if !value.data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite { op: op_name });
        }
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node {
            value,
            op: Some(op),
        });
        Ok(id)
    }

    // ---- elementwise ----------------------------------------------------

    pub fn elementwise(
        &mut self,
        kind: ElementwiseKind,
        a: TensorId,
        b: Option<TensorId>,
    ) -> Result<TensorId> {
        if kind.is_binary() != b.is_some() {
            return Err(Error::Domain {
                op: "elementwise",
                detail: format!("{kind:?} given wrong number of operands"),
            });
        }
        let av = self.value(a);
        let out = match kind {
            ElementwiseKind::Add | ElementwiseKind::Sub | ElementwiseKind::Mul => {
                let bv = self.value(b.unwrap());
                broadcast_check(av.shape(), bv.shape())?;
                let strides = broadcast_strides(av.shape(), bv.shape());
                let mut data = vec![0.0f32; av.numel()];
                let (ad, bd) = (av.data(), bv.data());
                for_each_pair(av.shape(), &strides, |i, j| {
                    data[i] = match kind {
                        ElementwiseKind::Add => ad[i] + bd[j],
                        ElementwiseKind::Sub => ad[i] - bd[j],
                        ElementwiseKind::Mul => ad[i] * bd[j],
                        _ => unreachable!(),
                    };
                });
                Tensor::new(av.shape().to_vec(), data)?
            }
            ElementwiseKind::Relu => {
                let data = av.data().iter().map(|&x| x.max(0.0)).collect();
                Tensor::new(av.shape().to_vec(), data)?
            }
            ElementwiseKind::Sigmoid => {
                let data = av
                    .data()
                    .iter()
                    .map(|&x| (1.0 / (1.0 + (-f64::from(x)).exp())) as f32)
                    .collect();
                Tensor::new(av.shape().to_vec(), data)?
            }
            ElementwiseKind::Log1p => {
                if let Some(&bad) = av.data().iter().find(|&&x| x <= -1.0) {
                    return Err(Error::Domain {
                        op: "log1p",
                        detail: format!("input {bad} outside (-1, inf)"),
                    });
                }
                let data = av.data().iter().map(|&x| f64::from(x).ln_1p() as f32).collect();
                Tensor::new(av.shape().to_vec(), data)?
            }
            ElementwiseKind::Expm1 => {
                let data = av.data().iter().map(|&x| f64::from(x).exp_m1() as f32).collect();
                Tensor::new(av.shape().to_vec(), data)?
            }
        };
        self.push("elementwise", out, Box::new(ElementwiseOp { kind, a, b }))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Add, a, Some(b))
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Sub, a, Some(b))
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Mul, a, Some(b))
    }

    pub fn relu(&mut self, a: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Relu, a, None)
    }

    pub fn sigmoid(&mut self, a: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Sigmoid, a, None)
    }

    pub fn log1p(&mut self, a: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Log1p, a, None)
    }

    pub fn expm1(&mut self, a: TensorId) -> Result<TensorId> {
        self.elementwise(ElementwiseKind::Expm1, a, None)
    }

    // ---- reductions ------------------------------------------------------

    /// Reduce over `axes`, keeping reduced axes with extent 1.
    pub fn reduce(&mut self, kind: ReduceKind, a: TensorId, axes: &[usize]) -> Result<TensorId> {
        let av = self.value(a);
        let rank = av.rank();
        for &ax in axes {
            if ax >= rank {
                return Err(Error::InvalidAxis { axis: ax, rank });
            }
        }
        let mut seen = vec![false; rank];
        for &ax in axes {
            if seen[ax] {
                return Err(Error::InvalidAxis { axis: ax, rank });
            }
            seen[ax] = true;
        }
        let mut out_shape = av.shape().to_vec();
        for &ax in axes {
            out_shape[ax] = 1;
        }
        let out_numel: usize = out_shape.iter().product();
        let count = av.numel() / out_numel;
        let strides = broadcast_strides(av.shape(), &out_shape);

        let (out, argmax) = match kind {
            ReduceKind::Sum | ReduceKind::Mean => {
                let mut acc = vec![0.0f64; out_numel];
                let ad = av.data();
                for_each_pair(av.shape(), &strides, |i, j| {
                    acc[j] += f64::from(ad[i]);
                });
                let scale = if kind == ReduceKind::Mean {
                    1.0 / count as f64
                } else {
                    1.0
                };
                let data = acc.iter().map(|&s| (s * scale) as f32).collect();
                (Tensor::new(out_shape, data)?, None)
            }
            ReduceKind::Max => {
                let mut best = vec![f32::NEG_INFINITY; out_numel];
                let mut arg = vec![0usize; out_numel];
                let ad = av.data();
                for_each_pair(av.shape(), &strides, |i, j| {
                    if ad[i] > best[j] {
                        best[j] = ad[i];
                        arg[j] = i;
                    }
                });
                (Tensor::new(out_shape, best)?, Some(arg))
            }
        };
        let out_shape = out.shape().to_vec();
        self.push(
            "reduce",
            out,
            Box::new(ReduceOp {
                kind,
                a,
                count,
                out_shape,
                argmax,
            }),
        )
    }

    pub fn sum(&mut self, a: TensorId, axes: &[usize]) -> Result<TensorId> {
        self.reduce(ReduceKind::Sum, a, axes)
    }

    pub fn mean(&mut self, a: TensorId, axes: &[usize]) -> Result<TensorId> {
        self.reduce(ReduceKind::Mean, a, axes)
    }

    pub fn max(&mut self, a: TensorId, axes: &[usize]) -> Result<TensorId> {
        self.reduce(ReduceKind::Max, a, axes)
    }

    /// Sum every element down to shape `[1]`.
    pub fn sum_all(&mut self, a: TensorId) -> Result<TensorId> {
        let rank = self.value(a).rank();
        let axes: Vec<usize> = (0..rank).collect();
        let s = self.reduce(ReduceKind::Sum, a, &axes)?;
        self.reshape(s, &[1])
    }

    /// Mean of every element down to shape `[1]`.
    pub fn mean_all(&mut self, a: TensorId) -> Result<TensorId> {
        let rank = self.value(a).rank();
        let axes: Vec<usize> = (0..rank).collect();
        let m = self.reduce(ReduceKind::Mean, a, &axes)?;
        self.reshape(m, &[1])
    }

    // ---- matmul ----------------------------------------------------------

    /// `[m,k] x [k,n] -> [m,n]` with f64 accumulation.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 || bv.rank() != 2 {
            return Err(Error::shape(
                "matmul",
                format!("expected rank-2 operands, got {:?} x {:?}", av.shape(), bv.shape()),
            ));
        }
        let (m, k) = (av.shape()[0], av.shape()[1]);
        let (k2, n) = (bv.shape()[0], bv.shape()[1]);
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                format!("inner dimensions differ: {k} vs {k2}"),
            ));
        }
        let data = matmul_raw(av.data(), bv.data(), m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        self.push("matmul", out, Box::new(MatmulOp { a, b, m, k, n }))
    }

    // ---- concat / reshape --------------------------------------------------

    pub fn concat(&mut self, parts: &[TensorId], axis: usize) -> Result<TensorId> {
        if parts.is_empty() {
            return Err(Error::shape("concat", "no inputs"));
        }
        let first = self.value(parts[0]).shape().to_vec();
        let rank = first.len();
        if axis >= rank {
            return Err(Error::InvalidAxis { axis, rank });
        }
        let mut axis_total = 0;
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != rank {
                return Err(Error::shape("concat", "rank mismatch"));
            }
            for d in 0..rank {
                if d != axis && s[d] != first[d] {
                    return Err(Error::shape(
                        "concat",
                        format!("extent mismatch off axis {axis}: {s:?} vs {first:?}"),
                    ));
                }
            }
            axis_total += s[axis];
        }
        let mut out_shape = first.clone();
        out_shape[axis] = axis_total;
        let outer: usize = first[..axis].iter().product();
        let inner: usize = first[axis + 1..].iter().product();
        let mut data = vec![0.0f32; out_shape.iter().product()];
        let row = axis_total * inner;
        let mut offset = 0;
        let mut extents = Vec::with_capacity(parts.len());
        for &p in parts {
            let pv = self.value(p);
            let ext = pv.shape()[axis];
            let block = ext * inner;
            for o in 0..outer {
                let src = &pv.data()[o * block..(o + 1) * block];
                data[o * row + offset..o * row + offset + block].copy_from_slice(src);
            }
            offset += block;
            extents.push(ext);
        }
        let out = Tensor::new(out_shape, data)?;
        self.push(
            "concat",
            out,
            Box::new(ConcatOp {
                parts: parts.to_vec(),
                extents,
                outer,
                inner,
            }),
        )
    }

    pub fn reshape(&mut self, a: TensorId, shape: &[usize]) -> Result<TensorId> {
        let av = self.value(a);
        let numel: usize = shape.iter().product();
        if numel != av.numel() {
            return Err(Error::shape(
                "reshape",
                format!("{:?} -> {:?} changes element count", av.shape(), shape),
            ));
        }
        let out = Tensor::new(shape.to_vec(), av.data().to_vec())?;
        self.push("reshape", out, Box::new(ReshapeOp { a }))
    }

    // ---- backward ----------------------------------------------------------

    /// Reverse pass from a scalar loss. Gradients accumulate onto every node
    /// whose tensor was marked `requires_grad`; calling twice without a fresh
    /// tape doubles them.
    pub fn backward(&mut self, loss: TensorId) -> Result<()> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(Error::NonScalarLoss {
                numel: self.nodes[loss.0].value.numel(),
            });
        }
        let mut grads: Vec<Option<Vec<f32>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if let Some(op) = self.nodes[idx].op.as_ref() {
                op.backward(TensorId(idx), &g, &self.nodes, &mut grads);
            }
            let node = &mut self.nodes[idx];
            if node.value.requires_grad {
                node.value.accumulate_grad(&g);
            }
        }
        Ok(())
    }
}

// ---- broadcast machinery ----------------------------------------------------

/// Equal-rank broadcast: each axis of `b` must match `a` or have extent 1.
pub(crate) fn broadcast_check(a: &[usize], b: &[usize]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "broadcast",
            format!("rank mismatch {a:?} vs {b:?}"),
        ));
    }
    for (&ea, &eb) in a.iter().zip(b) {
        if eb != ea && eb != 1 {
            return Err(Error::shape(
                "broadcast",
                format!("{b:?} not broadcastable to {a:?}"),
            ));
        }
    }
    Ok(())
}

/// Row-major strides of `b` viewed against `out_shape`, zeroed on broadcast
/// axes. Also used to map reduce inputs onto keepdim outputs.
pub(crate) fn broadcast_strides(out_shape: &[usize], b_shape: &[usize]) -> Vec<usize> {
    let rank = out_shape.len();
    let mut strides = vec![0usize; rank];
    let mut s = 1usize;
    for d in (0..rank).rev() {
        strides[d] = if b_shape[d] == 1 { 0 } else { s };
        s *= b_shape[d];
    }
    strides
}

/// Visit `(flat index into out_shape, mapped flat index)` pairs in row-major
/// order using an odometer; `strides` comes from [`broadcast_strides`].
pub(crate) fn for_each_pair(
    out_shape: &[usize],
    strides: &[usize],
    mut f: impl FnMut(usize, usize),
) {
    let numel: usize = out_shape.iter().product();
    let rank = out_shape.len();
    let mut coords = vec![0usize; rank];
    let mut j = 0usize;
    for i in 0..numel {
        f(i, j);
        for d in (0..rank).rev() {
            coords[d] += 1;
            j += strides[d];
            if coords[d] < out_shape[d] {
                break;
            }
            coords[d] = 0;
            j -= strides[d] * out_shape[d];
        }
    }
}

pub(crate) fn matmul_raw(a: &[f32], b: &[f32], m: usize, k: usize, n: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; m * n];
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        let mut acc = vec![0.0f64; n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &b[p * n..(p + 1) * n];
            let av = f64::from(av);
            for (j, &bv) in brow.iter().enumerate() {
                acc[j] += av * f64::from(bv);
            }
        }
        for (j, &s) in acc.iter().enumerate() {
            orow[j] = s as f32;
        }
    }
    out
}

// ---- op implementations --------------------------------------------------

struct ElementwiseOp {
    kind: ElementwiseKind,
    a: TensorId,
    b: Option<TensorId>,
}

impl TapeOp for ElementwiseOp {
    fn backward(
        &self,
        out: TensorId,
        g: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let a = self.a;
        let numel_a = val(nodes, a).numel();
        match self.kind {
            ElementwiseKind::Add | ElementwiseKind::Sub => {
                {
                    let ga = grad_slot(grads, a, numel_a);
                    for (d, &gv) in ga.iter_mut().zip(g) {
                        *d += gv;
                    }
                }
                let b = self.b.unwrap();
                let bv_shape = val(nodes, b).shape().to_vec();
                let a_shape = val(nodes, a).shape().to_vec();
                let strides = broadcast_strides(&a_shape, &bv_shape);
                let sign = if self.kind == ElementwiseKind::Sub {
                    -1.0
                } else {
                    1.0
                };
                let numel_b = val(nodes, b).numel();
                let gb = grad_slot(grads, b, numel_b);
                for_each_pair(&a_shape, &strides, |i, j| {
                    gb[j] += sign * g[i];
                });
            }
            ElementwiseKind::Mul => {
                let b = self.b.unwrap();
                let a_shape = val(nodes, a).shape().to_vec();
                let strides = broadcast_strides(&a_shape, val(nodes, b).shape());
                {
                    let bd = val(nodes, b).data();
                    // borrow of nodes ends before grad_slot needs grads only
                    let mut contrib = vec![0.0f32; numel_a];
                    for_each_pair(&a_shape, &strides, |i, j| {
                        contrib[i] = g[i] * bd[j];
                    });
                    let ga = grad_slot(grads, a, numel_a);
                    for (d, c) in ga.iter_mut().zip(&contrib) {
                        *d += c;
                    }
                }
                {
                    let ad = val(nodes, a).data();
                    let numel_b = val(nodes, b).numel();
                    let mut contrib = vec![0.0f32; numel_b];
                    for_each_pair(&a_shape, &strides, |i, j| {
                        contrib[j] += g[i] * ad[i];
                    });
                    let gb = grad_slot(grads, b, numel_b);
                    for (d, c) in gb.iter_mut().zip(&contrib) {
                        *d += c;
                    }
                }
            }
            ElementwiseKind::Relu => {
                let mask: Vec<bool> = val(nodes, a).data().iter().map(|&x| x > 0.0).collect();
                let ga = grad_slot(grads, a, numel_a);
                for (i, (d, &gv)) in ga.iter_mut().zip(g).enumerate() {
                    if mask[i] {
                        *d += gv;
                    }
                }
            }
            ElementwiseKind::Sigmoid => {
                let y = val(nodes, out).data().to_vec();
                let ga = grad_slot(grads, a, numel_a);
                for i in 0..numel_a {
                    ga[i] += g[i] * y[i] * (1.0 - y[i]);
                }
            }
            ElementwiseKind::Log1p => {
                let x = val(nodes, a).data().to_vec();
                let ga = grad_slot(grads, a, numel_a);
                for i in 0..numel_a {
                    ga[i] += g[i] / (1.0 + x[i]);
                }
            }
            ElementwiseKind::Expm1 => {
                let y = val(nodes, out).data().to_vec();
                let ga = grad_slot(grads, a, numel_a);
                for i in 0..numel_a {
                    ga[i] += g[i] * (y[i] + 1.0);
                }
            }
        }
    }
}

struct ReduceOp {
    kind: ReduceKind,
    a: TensorId,
    count: usize,
    out_shape: Vec<usize>,
    argmax: Option<Vec<usize>>,
}

impl TapeOp for ReduceOp {
    fn backward(
        &self,
        _out: TensorId,
        g: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let a_shape = val(nodes, self.a).shape().to_vec();
        let numel_a = val(nodes, self.a).numel();
        match self.kind {
            ReduceKind::Sum | ReduceKind::Mean => {
                let scale = if self.kind == ReduceKind::Mean {
                    1.0 / self.count as f32
                } else {
                    1.0
                };
                let strides = broadcast_strides(&a_shape, &self.out_shape);
                let ga = grad_slot(grads, self.a, numel_a);
                for_each_pair(&a_shape, &strides, |i, j| {
                    ga[i] += g[j] * scale;
                });
            }
            ReduceKind::Max => {
                let arg = self.argmax.as_ref().expect("max reduce saves argmax");
                let ga = grad_slot(grads, self.a, numel_a);
                for (k, &src) in arg.iter().enumerate() {
                    ga[src] += g[k];
                }
            }
        }
    }
}

struct MatmulOp {
    a: TensorId,
    b: TensorId,
    m: usize,
    k: usize,
    n: usize,
}

impl TapeOp for MatmulOp {
    fn backward(
        &self,
        _out: TensorId,
        g: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let (m, k, n) = (self.m, self.k, self.n);
        {
            // dA = g . B^T
            let bd = val(nodes, self.b).data();
            let mut contrib = vec![0.0f32; m * k];
            for i in 0..m {
                let grow = &g[i * n..(i + 1) * n];
                for p in 0..k {
                    let brow = &bd[p * n..(p + 1) * n];
                    let mut acc = 0.0f64;
                    for j in 0..n {
                        acc += f64::from(grow[j]) * f64::from(brow[j]);
                    }
                    contrib[i * k + p] = acc as f32;
                }
            }
            let ga = grad_slot(grads, self.a, m * k);
            for (d, c) in ga.iter_mut().zip(&contrib) {
                *d += c;
            }
        }
        {
            // dB = A^T . g
            let ad = val(nodes, self.a).data();
            let mut contrib = vec![0.0f64; k * n];
            for i in 0..m {
                let arow = &ad[i * k..(i + 1) * k];
                let grow = &g[i * n..(i + 1) * n];
                for (p, &av) in arow.iter().enumerate() {
                    let av = f64::from(av);
                    let dst = &mut contrib[p * n..(p + 1) * n];
                    for (j, &gv) in grow.iter().enumerate() {
                        dst[j] += av * f64::from(gv);
                    }
                }
            }
            let gb = grad_slot(grads, self.b, k * n);
            for (d, &c) in gb.iter_mut().zip(&contrib) {
                *d += c as f32;
            }
        }
    }
}

struct ConcatOp {
    parts: Vec<TensorId>,
    extents: Vec<usize>,
    outer: usize,
    inner: usize,
}

impl TapeOp for ConcatOp {
    fn backward(
        &self,
        _out: TensorId,
        g: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let row: usize = self.extents.iter().map(|e| e * self.inner).sum();
        let mut offset = 0;
        for (idx, &p) in self.parts.iter().enumerate() {
            let block = self.extents[idx] * self.inner;
            let numel = val(nodes, p).numel();
            let gp = grad_slot(grads, p, numel);
            for o in 0..self.outer {
                let src = &g[o * row + offset..o * row + offset + block];
                let dst = &mut gp[o * block..(o + 1) * block];
                for (d, &s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            offset += block;
        }
    }
}

struct ReshapeOp {
    a: TensorId,
}

impl TapeOp for ReshapeOp {
    fn backward(
        &self,
        _out: TensorId,
        g: &[f32],
        nodes: &[Node],
        grads: &mut [Option<Vec<f32>>],
    ) {
        let numel = val(nodes, self.a).numel();
        let ga = grad_slot(grads, self.a, numel);
        for (d, &s) in ga.iter_mut().zip(g) {
            *d += s;
        }
    }
}
