//! Reverse-mode automatic differentiation over [`Tensor`]s.
//!
//! A [`Graph`] records every operation as a node in creation order, so the
//! node list is already a topological order and [`Graph::backward`] walks
//! it in reverse. Nodes that do not depend on any trainable leaf carry no
//! gradient and are skipped.

use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

/// Lower and upper probability clamp applied inside binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    /// `b` is either the same shape as `a` or a `1×n` row broadcast over rows.
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Square(NodeId),
    /// Column-wise concatenation of 2-D operands with equal row counts.
    Concat(Vec<NodeId>),
    /// Columns `start..start + width` of a 2-D operand.
    SliceCols(NodeId, usize, usize),
    Mean(NodeId),
    Sum(NodeId),
    Bce { pred: NodeId, target: NodeId },
}

struct Node {
    op: Op,
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { op, value, grad: None, requires_grad });
        NodeId(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// Copies the current value of `id` into a new constant leaf.
    pub fn detach(&mut self, id: NodeId) -> NodeId {
        let v = self.value(id).clone();
        self.constant(v)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last [`backward`](Self::backward) target with respect
    /// to `id`. Nodes the loss does not depend on report zeros.
    pub fn grad(&self, id: NodeId) -> Tensor {
        let node = &self.nodes[id.0];
        match &node.grad {
            Some(g) => Tensor::new(node.value.shape().to_vec(), g.clone()).expect("gradient shape"),
            None => node.value.map(|_| 0.0),
        }
    }

    fn rg(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        let v = &self.nodes[id.0].value;
        (v.rows(), v.cols())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let ((m, k), (k2, n)) = (self.dims(a), self.dims(b));
        if k != k2 {
            return Err(Error::shape(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), Tensor::matrix(m, n, out)?, rg))
    }

    fn binary_shape_check(&self, a: NodeId, b: NodeId, name: &str, allow_row: bool) -> Result<()> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.same_shape(vb) {
            return Ok(());
        }
        if allow_row && vb.rows() == 1 && vb.cols() == va.cols() && va.shape().len() == 2 {
            return Ok(());
        }
        Err(Error::shape(format!("{name} of {:?} and {:?}", va.shape(), vb.shape())))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape_check(a, b, "add", true)?;
        let (va, vb) = (self.value(a), self.value(b));
        let n = vb.numel();
        let data: Vec<f64> = va.data().iter().enumerate().map(|(i, &x)| x + vb.data()[i % n]).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape_check(a, b, "sub", false)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x - y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Sub(a, b), value, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape_check(a, b, "mul", false)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        let value = self.value(a).map(|x| x * factor);
        let rg = self.rg(&[a]);
        self.push(Op::Scale(a, factor), value, rg)
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let value = self.value(a).map(f);
        let rg = self.rg(&[a]);
        self.push(op, value, rg)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = parts.first() else {
            return Err(Error::shape("concat of zero tensors"));
        };
        let rows = self.dims(first).0;
        if parts.iter().any(|&p| self.dims(p).0 != rows) {
            return Err(Error::shape("concat operands differ in row count"));
        }
        let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(Op::Concat(parts.to_vec()), Tensor::matrix(rows, total, data)?, rg))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let (rows, cols) = self.dims(a);
        if width == 0 || start + width > cols {
            return Err(Error::shape(format!("column slice {start}..{} of width {cols}", start + width)));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&src[r * cols + start..r * cols + start + width]);
        }
        let rg = self.rg(&[a]);
        Ok(self.push(Op::SliceCols(a, start, width), Tensor::matrix(rows, width, data)?, rg))
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let m = v.data().iter().sum::<f64>() / v.numel() as f64;
        let rg = self.rg(&[a]);
        self.push(Op::Mean(a), Tensor::scalar(m), rg)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let s = self.value(a).data().iter().sum::<f64>();
        let rg = self.rg(&[a]);
        self.push(Op::Sum(a), Tensor::scalar(s), rg)
    }

    /// Mean binary cross-entropy with probabilities clamped to
    /// `[BCE_EPS, 1 - BCE_EPS]`.
    pub fn bce(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        self.binary_shape_check(pred, target, "bce", false)?;
        let (p, t) = (self.value(pred), self.value(target));
        let loss = p
            .data()
            .iter()
            .zip(t.data())
            .map(|(&p, &t)| {
                let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(t * pc.ln() + (1.0 - t) * (1.0 - pc).ln())
            })
            .sum::<f64>()
            / p.numel() as f64;
        let rg = self.rg(&[pred, target]);
        Ok(self.push(Op::Bce { pred, target }, Tensor::scalar(loss), rg))
    }

    /// Accumulates gradients of the scalar `loss` into every node it
    /// depends on. Clears gradients from any previous call first.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::shape(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = self.nodes[idx].grad.take() else { continue };
            let op = self.nodes[idx].op.clone();
            self.propagate(idx, &op, &g);
            self.nodes[idx].grad = Some(g);
        }
        Ok(())
    }

    fn accumulate(&mut self, id: NodeId, f: impl FnOnce(&mut [f64], &Graph)) {
        if !self.nodes[id.0].requires_grad {
            return;
        }
        let mut buf = self.nodes[id.0]
            .grad
            .take()
            .unwrap_or_else(|| vec![0.0; self.nodes[id.0].value.numel()]);
        f(&mut buf, self);
        self.nodes[id.0].grad = Some(buf);
    }

    fn propagate(&mut self, idx: usize, op: &Op, g: &[f64]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ((m, k), (_, n)) = (self.dims(a), self.dims(b));
                self.accumulate(a, |buf, gr| matmul_bt_acc(g, gr.value(b).data(), buf, m, n, k));
                self.accumulate(b, |buf, gr| matmul_at_acc(gr.value(a).data(), g, buf, m, k, n));
            }
            Op::Add(a, b) => {
                self.accumulate(a, |buf, _| buf.iter_mut().zip(g).for_each(|(o, x)| *o += x));
                self.accumulate(b, |buf, _| {
                    let n = buf.len();
                    for (i, x) in g.iter().enumerate() {
                        buf[i % n] += x;
                    }
                });
            }
            Op::Sub(a, b) => {
                self.accumulate(a, |buf, _| buf.iter_mut().zip(g).for_each(|(o, x)| *o += x));
                self.accumulate(b, |buf, _| buf.iter_mut().zip(g).for_each(|(o, x)| *o -= x));
            }
            Op::Mul(a, b) => {
                self.accumulate(a, |buf, gr| {
                    for ((o, x), y) in buf.iter_mut().zip(g).zip(gr.value(b).data()) {
                        *o += x * y;
                    }
                });
                self.accumulate(b, |buf, gr| {
                    for ((o, x), y) in buf.iter_mut().zip(g).zip(gr.value(a).data()) {
                        *o += x * y;
                    }
                });
            }
            Op::Scale(a, f) => {
                self.accumulate(a, |buf, _| buf.iter_mut().zip(g).for_each(|(o, x)| *o += f * x));
            }
            Op::Sigmoid(a) => self.accumulate(a, |buf, gr| {
                for ((o, x), s) in buf.iter_mut().zip(g).zip(gr.nodes[idx].value.data()) {
                    *o += x * s * (1.0 - s);
                }
            }),
            Op::Tanh(a) => self.accumulate(a, |buf, gr| {
                for ((o, x), t) in buf.iter_mut().zip(g).zip(gr.nodes[idx].value.data()) {
                    *o += x * (1.0 - t * t);
                }
            }),
            Op::Relu(a) => self.accumulate(a, |buf, gr| {
                for ((o, x), v) in buf.iter_mut().zip(g).zip(gr.value(a).data()) {
                    if *v > 0.0 {
                        *o += x;
                    }
                }
            }),
            Op::Square(a) => self.accumulate(a, |buf, gr| {
                for ((o, x), v) in buf.iter_mut().zip(g).zip(gr.value(a).data()) {
                    *o += 2.0 * v * x;
                }
            }),
            Op::Concat(ref parts) => {
                let rows = self.dims(parts[0]).0;
                let widths: Vec<usize> = parts.iter().map(|&p| self.dims(p).1).collect();
                let total: usize = widths.iter().sum();
                let mut offset = 0;
                for (&p, &w) in parts.iter().zip(&widths) {
                    self.accumulate(p, |buf, _| {
                        for r in 0..rows {
                            let src = &g[r * total + offset..r * total + offset + w];
                            buf[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(o, x)| *o += x);
                        }
                    });
                    offset += w;
                }
            }
            Op::SliceCols(a, start, width) => {
                let cols = self.dims(a).1;
                self.accumulate(a, |buf, _| {
                    for (r, src) in g.chunks_exact(width).enumerate() {
                        let dst = &mut buf[r * cols + start..r * cols + start + width];
                        dst.iter_mut().zip(src).for_each(|(o, x)| *o += x);
                    }
                });
            }
            Op::Mean(a) => {
                let n = self.value(a).numel() as f64;
                self.accumulate(a, |buf, _| buf.iter_mut().for_each(|o| *o += g[0] / n));
            }
            Op::Sum(a) => self.accumulate(a, |buf, _| buf.iter_mut().for_each(|o| *o += g[0])),
            Op::Bce { pred, target } => {
                let n = self.value(pred).numel() as f64;
                self.accumulate(pred, |buf, gr| {
                    for ((o, &p), &t) in buf.iter_mut().zip(gr.value(pred).data()).zip(gr.value(target).data()) {
                        if p > BCE_EPS && p < 1.0 - BCE_EPS {
                            *o += g[0] * ((1.0 - t) / (1.0 - p) - t / p) / n;
                        }
                    }
                });
                self.accumulate(target, |buf, gr| {
                    for (o, &p) in buf.iter_mut().zip(gr.value(pred).data()) {
                        let pc = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                        *o += g[0] * ((1.0 - pc).ln() - pc.ln()) / n;
                    }
                });
            }
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_examples() {
        let mut g = Graph::new();
        let z = g.constant(Tensor::scalar(0.0));
        let s = g.sigmoid(z);
        assert_eq!(g.value(s).item().unwrap(), 0.5);

        let p = g.constant(Tensor::scalar(0.5));
        let t = g.constant(Tensor::scalar(1.0));
        let l = g.bce(p, t).unwrap();
        assert!((g.value(l).item().unwrap() - std::f64::consts::LN_2).abs() < 1e-12);

        let i = g.constant(Tensor::identity(3));
        let x = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let xn = g.constant(x.clone());
        let y = g.matmul(i, xn).unwrap();
        assert_eq!(g.value(y), &x);
    }

    #[test]
    fn shape_mismatch_errors() {
        let mut g = Graph::new();
        let a = g.constant(Tensor::zeros(2, 3));
        let b = g.constant(Tensor::zeros(2, 3));
        assert!(g.matmul(a, b).is_err());
        let c = g.constant(Tensor::zeros(3, 2));
        assert!(g.add(a, c).is_err());
        assert!(g.mul(a, c).is_err());
    }

    #[test]
    fn sum_of_squares_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let sq = g.square(x);
        let l = g.sum(sq);
        g.backward(l).unwrap();
        assert_eq!(g.grad(x).data(), &[2.0, 4.0]);
    }

    #[test]
    fn detached_constant_gets_zero_gradient() {
        let mut g = Graph::new();
        let x = g.param(Tensor::matrix(1, 2, vec![1.0, 2.0]).unwrap());
        let d = g.detach(x);
        let prod = g.mul(x, d).unwrap();
        let l = g.sum(prod);
        g.backward(l).unwrap();
        assert_eq!(g.grad(d).data(), &[0.0, 0.0]);
        // Only the non-detached factor contributes: d/dx (x · c) = c.
        assert_eq!(g.grad(x).data(), &[1.0, 2.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.param(Tensor::zeros(2, 2));
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn broadcast_bias_gradient_sums_rows() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(3, 2));
        let b = g.param(Tensor::matrix(1, 2, vec![0.5, -0.5]).unwrap());
        let y = g.add(x, b).unwrap();
        let l = g.sum(y);
        g.backward(l).unwrap();
        assert_eq!(g.grad(b).data(), &[3.0, 3.0]);
    }
}
