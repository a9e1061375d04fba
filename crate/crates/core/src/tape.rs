//! Reverse-mode differentiation over a recorded computation tape.
//!
//! A forward pass builds nodes eagerly (each op computes its value when
//! recorded); `backward` replays the tape in reverse, accumulating vector-
//! Jacobian products into per-node gradient buffers. Stop-gradient nodes cut
//! the flow, which is how target-encoder outputs and anchor poles are kept
//! out of the optimizer's reach.

use crate::error::{Error, Result};
use crate::math;
use crate::tensor::Tensor;
use alloc::vec;
use alloc::vec::Vec;

/// Index of a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Identity forward, zero backward (the value was copied at record
    /// time, so no source edge is kept).
    StopGrad,
    /// y = x · Wᵀ + b with x: n×in, W: out×in, b: 1×out broadcast over rows.
    Linear { x: NodeId, w: NodeId, b: NodeId },
    /// Elementwise exact-erf GELU.
    Gelu { x: NodeId },
    /// Per-row mean/variance normalization followed by the affine gain/shift.
    LayerNorm { x: NodeId, gain: NodeId, shift: NodeId, eps: f64 },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Elementwise product.
    Hadamard { a: NodeId, b: NodeId },
    Scale { x: NodeId, c: f64 },
    /// n×1 column of per-row sums of squares.
    RowSumSq { x: NodeId },
    /// Scalar Σ aᵢⱼ·bᵢⱼ over identically shaped tensors.
    Dot { a: NodeId, b: NodeId },
    SumAll { x: NodeId },
    MeanAll { x: NodeId },
    /// Elementwise max(0, margin − x).
    Hinge { x: NodeId, margin: f64 },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    op: Op,
}

/// Recorded computation for one forward pass.
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

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        self.nodes.push(Node { value, grad: None, op });
        NodeId(self.nodes.len() - 1)
    }

    /// Register an input or parameter value (copied onto the tape).
    pub fn leaf(&mut self, value: &Tensor) -> NodeId {
        self.push(value.clone(), Op::Leaf)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Scalar value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id.0].value.shape(), (1, 1));
        self.nodes[id.0].value.get(0, 0)
    }

    /// Accumulated gradient for a node, if any flowed to it.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    /// Gradient as a tensor, zeros when nothing flowed.
    pub fn grad_tensor(&self, id: NodeId) -> Tensor {
        let shape = self.nodes[id.0].value.shape();
        match &self.nodes[id.0].grad {
            Some(g) => Tensor::from_vec(shape.0, shape.1, g.clone()).unwrap(),
            None => Tensor::zeros(shape.0, shape.1),
        }
    }

    // ── op recording ────────────────────────────────────────────────────

    pub fn stop_grad(&mut self, x: NodeId) -> NodeId {
        let value = self.nodes[x.0].value.clone();
        self.push(value, Op::StopGrad)
    }

    pub fn linear(&mut self, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, in_dim) = self.nodes[x.0].value.shape();
        let (out_dim, w_in) = self.nodes[w.0].value.shape();
        if w_in != in_dim {
            return Err(Error::ShapeMismatch {
                op: "linear",
                expected: (out_dim, in_dim),
                got: (out_dim, w_in),
            });
        }
        if self.nodes[b.0].value.shape() != (1, out_dim) {
            return Err(Error::ShapeMismatch {
                op: "linear bias",
                expected: (1, out_dim),
                got: self.nodes[b.0].value.shape(),
            });
        }
        let xv = &self.nodes[x.0].value;
        let wv = &self.nodes[w.0].value;
        let bv = &self.nodes[b.0].value;
        let mut out = Tensor::zeros(n, out_dim);
        for r in 0..n {
            let xr = xv.row(r);
            for o in 0..out_dim {
                let wr = wv.row(o);
                let mut acc = bv.get(0, o);
                for k in 0..in_dim {
                    acc += xr[k] * wr[k];
                }
                out.set(r, o, acc);
            }
        }
        Ok(self.push(out, Op::Linear { x, w, b }))
    }

    pub fn gelu(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x.0].value.map(math::gelu);
        self.push(out, Op::Gelu { x })
    }

    pub fn layer_norm(&mut self, x: NodeId, gain: NodeId, shift: NodeId, eps: f64) -> Result<NodeId> {
        let (n, d) = self.nodes[x.0].value.shape();
        for (name, id) in [("layer_norm gain", gain), ("layer_norm shift", shift)] {
            if self.nodes[id.0].value.shape() != (1, d) {
                return Err(Error::ShapeMismatch {
                    op: name,
                    expected: (1, d),
                    got: self.nodes[id.0].value.shape(),
                });
            }
        }
        let xv = &self.nodes[x.0].value;
        let gv = &self.nodes[gain.0].value;
        let sv = &self.nodes[shift.0].value;
        let mut out = Tensor::zeros(n, d);
        for r in 0..n {
            let row = xv.row(r);
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv_std = 1.0 / libm::sqrt(var + eps);
            for c in 0..d {
                let xhat = (row[c] - mean) * inv_std;
                out.set(r, c, gv.get(0, c) * xhat + sv.get(0, c));
            }
        }
        Ok(self.push(out, Op::LayerNorm { x, gain, shift, eps }))
    }

    fn binary_same_shape(&mut self, op_name: &'static str, a: NodeId, b: NodeId) -> Result<(usize, usize)> {
        let sa = self.nodes[a.0].value.shape();
        let sb = self.nodes[b.0].value.shape();
        if sa != sb {
            return Err(Error::ShapeMismatch { op: op_name, expected: sa, got: sb });
        }
        Ok(sa)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.binary_same_shape("add", a, b)?;
        let data = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x + y)
            .collect();
        Ok(self.push(Tensor::from_vec(r, c, data).unwrap(), Op::Add { a, b }))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.binary_same_shape("sub", a, b)?;
        let data = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x - y)
            .collect();
        Ok(self.push(Tensor::from_vec(r, c, data).unwrap(), Op::Sub { a, b }))
    }

    pub fn hadamard(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (r, c) = self.binary_same_shape("hadamard", a, b)?;
        let data = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x * y)
            .collect();
        Ok(self.push(Tensor::from_vec(r, c, data).unwrap(), Op::Hadamard { a, b }))
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = self.nodes[x.0].value.map(|v| c * v);
        self.push(out, Op::Scale { x, c })
    }

    pub fn row_sum_sq(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x.0].value;
        let mut out = Tensor::zeros(xv.rows(), 1);
        for r in 0..xv.rows() {
            out.set(r, 0, xv.row(r).iter().map(|v| v * v).sum());
        }
        self.push(out, Op::RowSumSq { x })
    }

    pub fn dot(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_same_shape("dot", a, b)?;
        let s: f64 = self.nodes[a.0]
            .value
            .data()
            .iter()
            .zip(self.nodes[b.0].value.data())
            .map(|(x, y)| x * y)
            .sum();
        Ok(self.push(Tensor::from_vec(1, 1, vec![s]).unwrap(), Op::Dot { a, b }))
    }

    pub fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.nodes[x.0].value.data().iter().sum();
        self.push(Tensor::from_vec(1, 1, vec![s]).unwrap(), Op::SumAll { x })
    }

    pub fn mean_all(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x.0].value.len().max(1);
        let s: f64 = self.nodes[x.0].value.data().iter().sum::<f64>() / n as f64;
        self.push(Tensor::from_vec(1, 1, vec![s]).unwrap(), Op::MeanAll { x })
    }

    pub fn hinge(&mut self, x: NodeId, margin: f64) -> NodeId {
        let out = self.nodes[x.0].value.map(|v| (margin - v).max(0.0));
        self.push(out, Op::Hinge { x, margin })
    }

    // ── backward ────────────────────────────────────────────────────────

    fn accumulate(&mut self, id: NodeId, delta: &[f64]) {
        let node = &mut self.nodes[id.0];
        match &mut node.grad {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += di;
                }
            }
            None => node.grad = Some(delta.to_vec()),
        }
    }

    /// Reverse-mode accumulation from a recorded scalar loss.
    ///
    /// Populates gradients for every node the loss depends on; nodes behind a
    /// stop-gradient boundary receive none.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if self.nodes.is_empty() || loss.0 >= self.nodes.len() {
            return Err(Error::EmptyInput { context: "backward without a recorded forward" });
        }
        let shape = self.nodes[loss.0].value.shape();
        if shape != (1, 1) {
            return Err(Error::NotAScalar { op: "backward", got: shape });
        }
        for node in self.nodes.iter_mut() {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(up) = self.nodes[i].grad.clone() else { continue };
            let op = self.nodes[i].op.clone();
            match op {
                Op::Leaf | Op::StopGrad => {}
                Op::Linear { x, w, b } => {
                    let (n, in_dim) = self.nodes[x.0].value.shape();
                    let out_dim = self.nodes[w.0].value.rows();
                    // dx = dy · W ; dW = dyᵀ · x ; db = column sums of dy.
                    let mut dx = vec![0.0; n * in_dim];
                    let mut dw = vec![0.0; out_dim * in_dim];
                    let mut db = vec![0.0; out_dim];
                    {
                        let xv = &self.nodes[x.0].value;
                        let wv = &self.nodes[w.0].value;
                        for r in 0..n {
                            let xr = xv.row(r);
                            let ur = &up[r * out_dim..(r + 1) * out_dim];
                            for o in 0..out_dim {
                                let u = ur[o];
                                if u == 0.0 {
                                    continue;
                                }
                                db[o] += u;
                                let wr = wv.row(o);
                                for k in 0..in_dim {
                                    dx[r * in_dim + k] += u * wr[k];
                                    dw[o * in_dim + k] += u * xr[k];
                                }
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                    self.accumulate(w, &dw);
                    self.accumulate(b, &db);
                }
                Op::Gelu { x } => {
                    let dx: Vec<f64> = self.nodes[x.0]
                        .value
                        .data()
                        .iter()
                        .zip(&up)
                        .map(|(&v, &u)| u * math::gelu_derivative(v))
                        .collect();
                    self.accumulate(x, &dx);
                }
                Op::LayerNorm { x, gain, shift, eps } => {
                    let (n, d) = self.nodes[x.0].value.shape();
                    let mut dx = vec![0.0; n * d];
                    let mut dg = vec![0.0; d];
                    let mut ds = vec![0.0; d];
                    {
                        let xv = &self.nodes[x.0].value;
                        let gv = &self.nodes[gain.0].value;
                        for r in 0..n {
                            let row = xv.row(r);
                            let ur = &up[r * d..(r + 1) * d];
                            let mean = row.iter().sum::<f64>() / d as f64;
                            let var =
                                row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
                            let inv_std = 1.0 / libm::sqrt(var + eps);
                            // a = gain ∘ dy ; dx = (a − mean(a) − x̂·mean(a∘x̂)) / std
                            let mut mean_a = 0.0;
                            let mut mean_ax = 0.0;
                            for c in 0..d {
                                let xhat = (row[c] - mean) * inv_std;
                                let a = gv.get(0, c) * ur[c];
                                mean_a += a;
                                mean_ax += a * xhat;
                                dg[c] += ur[c] * xhat;
                                ds[c] += ur[c];
                            }
                            mean_a /= d as f64;
                            mean_ax /= d as f64;
                            for c in 0..d {
                                let xhat = (row[c] - mean) * inv_std;
                                let a = gv.get(0, c) * ur[c];
                                dx[r * d + c] = (a - mean_a - xhat * mean_ax) * inv_std;
                            }
                        }
                    }
                    self.accumulate(x, &dx);
                    self.accumulate(gain, &dg);
                    self.accumulate(shift, &ds);
                }
                Op::Add { a, b } => {
                    self.accumulate(a, &up);
                    self.accumulate(b, &up);
                }
                Op::Sub { a, b } => {
                    self.accumulate(a, &up);
                    let neg: Vec<f64> = up.iter().map(|u| -u).collect();
                    self.accumulate(b, &neg);
                }
                Op::Hadamard { a, b } => {
                    let da: Vec<f64> =
                        up.iter().zip(self.nodes[b.0].value.data()).map(|(u, v)| u * v).collect();
                    let db: Vec<f64> =
                        up.iter().zip(self.nodes[a.0].value.data()).map(|(u, v)| u * v).collect();
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::Scale { x, c } => {
                    let dx: Vec<f64> = up.iter().map(|u| c * u).collect();
                    self.accumulate(x, &dx);
                }
                Op::RowSumSq { x } => {
                    let xv = &self.nodes[x.0].value;
                    let (n, d) = xv.shape();
                    let mut dx = vec![0.0; n * d];
                    for r in 0..n {
                        let u = up[r];
                        for c in 0..d {
                            dx[r * d + c] = 2.0 * xv.get(r, c) * u;
                        }
                    }
                    self.accumulate(x, &dx);
                }
                Op::Dot { a, b } => {
                    let u = up[0];
                    let da: Vec<f64> = self.nodes[b.0].value.data().iter().map(|v| u * v).collect();
                    let db: Vec<f64> = self.nodes[a.0].value.data().iter().map(|v| u * v).collect();
                    self.accumulate(a, &da);
                    self.accumulate(b, &db);
                }
                Op::SumAll { x } => {
                    let u = up[0];
                    let dx = vec![u; self.nodes[x.0].value.len()];
                    self.accumulate(x, &dx);
                }
                Op::MeanAll { x } => {
                    let len = self.nodes[x.0].value.len().max(1);
                    let u = up[0] / len as f64;
                    let dx = vec![u; self.nodes[x.0].value.len()];
                    self.accumulate(x, &dx);
                }
                Op::Hinge { x, margin } => {
                    // d max(0, m − x) / dx = −1 on the active side, 0 otherwise.
                    let dx: Vec<f64> = self.nodes[x.0]
                        .value
                        .data()
                        .iter()
                        .zip(&up)
                        .map(|(&v, &u)| if margin - v > 0.0 { -u } else { 0.0 })
                        .collect();
                    self.accumulate(x, &dx);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_requires_recorded_scalar() {
        let mut tape = Tape::new();
        assert!(matches!(tape.backward(NodeId(0)), Err(Error::EmptyInput { .. })));
        let x = tape.leaf(&Tensor::zeros(2, 2));
        assert!(matches!(tape.backward(x), Err(Error::NotAScalar { .. })));
    }

    #[test]
    fn sum_of_linear_grad_is_input_broadcast() {
        // loss = sum(x · Wᵀ) with x fixed → dW has x in every output row.
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        let w = tape.leaf(&Tensor::from_rows(&[vec![0.5, -0.5], vec![1.0, 1.0]]).unwrap());
        let b = tape.leaf(&Tensor::zeros(1, 2));
        let y = tape.linear(x, w, b).unwrap();
        let loss = tape.sum_all(y);
        tape.backward(loss).unwrap();
        // dW[o][k] = Σ_r x[r][k]
        assert_eq!(tape.grad(w).unwrap(), &[4.0, 6.0, 4.0, 6.0]);
        assert_eq!(tape.grad(b).unwrap(), &[2.0, 2.0]);
    }

    #[test]
    fn unreached_parameter_gets_no_grad() {
        let mut tape = Tape::new();
        let p = tape.leaf(&Tensor::row_vector(&[1.0, 2.0]));
        let q = tape.leaf(&Tensor::row_vector(&[3.0, 4.0]));
        let loss = tape.row_sum_sq(q);
        let loss = tape.sum_all(loss);
        tape.backward(loss).unwrap();
        assert!(tape.grad(p).is_none());
        assert_eq!(tape.grad_tensor(p).data(), &[0.0, 0.0]);
    }

    #[test]
    fn stop_gradient_blocks_flow() {
        // loss = ‖a − sg(b)‖²: grad(a) = 2(a−b), grad(b) = none.
        let mut tape = Tape::new();
        let a = tape.leaf(&Tensor::row_vector(&[1.0, 3.0]));
        let b = tape.leaf(&Tensor::row_vector(&[0.5, 1.0]));
        let b_sg = tape.stop_grad(b);
        let diff = tape.sub(a, b_sg).unwrap();
        let sq = tape.row_sum_sq(diff);
        let loss = tape.sum_all(sq);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[1.0, 4.0]); // 2(a−b)
        assert!(tape.grad(b).is_none());
    }

    #[test]
    fn grad_accumulates_across_consumers() {
        // loss = sum(2x) + sum(3x) → dx = 5.
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::row_vector(&[1.0]));
        let a = tape.scale(x, 2.0);
        let b = tape.scale(x, 3.0);
        let s = tape.add(a, b).unwrap();
        let loss = tape.sum_all(s);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[5.0]);
    }

    #[test]
    fn hinge_inactive_side_has_zero_grad() {
        let mut tape = Tape::new();
        let e = tape.leaf(&Tensor::row_vector(&[6.0, 2.0]));
        let h = tape.hinge(e, 5.0); // max(0, 5−e) → [0, 3]
        let loss = tape.sum_all(h);
        tape.backward(loss).unwrap();
        assert_eq!(tape.value(h).data(), &[0.0, 3.0]);
        assert_eq!(tape.grad(e).unwrap(), &[0.0, -1.0]);
    }
}
