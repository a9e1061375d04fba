//! Layers and the small MLP used by every encoder and predictor.
//!
//! Weight initialization is uniform in [−1/√fan_in, +1/√fan_in] from the
//! seeded stream, so two components constructed from equal substreams are
//! bitwise identical.

use crate::error::Result;
use crate::math;
use crate::rng::RngStream;
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Fully connected layer computing x·Wᵀ + b.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    /// out_dim × in_dim.
    pub weight: Tensor,
    /// 1 × out_dim.
    pub bias: Tensor,
}

impl LinearLayer {
    pub fn new(in_dim: usize, out_dim: usize, rng: &mut RngStream) -> Self {
        let bound = 1.0 / libm::sqrt(in_dim as f64);
        let mut weight = Tensor::zeros(out_dim, in_dim);
        for v in weight.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        let mut bias = Tensor::zeros(1, out_dim);
        for v in bias.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        LinearLayer { weight, bias }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Tape-free forward pass.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        if x.cols() != self.in_dim() {
            return Err(crate::error::Error::ShapeMismatch {
                op: "linear_forward",
                expected: (x.rows(), self.in_dim()),
                got: x.shape(),
            });
        }
        let mut out = Tensor::zeros(x.rows(), self.out_dim());
        for r in 0..x.rows() {
            let xr = x.row(r);
            for o in 0..self.out_dim() {
                let wr = self.weight.row(o);
                let mut acc = self.bias.get(0, o);
                for k in 0..xr.len() {
                    acc += xr[k] * wr[k];
                }
                out.set(r, o, acc);
            }
        }
        Ok(out)
    }
}

/// Forward pass through a layer, recording on the tape.
pub fn linear_forward(tape: &mut Tape, layer_nodes: (NodeId, NodeId), x: NodeId) -> Result<NodeId> {
    tape.linear(x, layer_nodes.0, layer_nodes.1)
}

/// Elementwise exact-erf GELU, tape-free.
pub fn gelu(x: &Tensor) -> Tensor {
    x.map(math::gelu)
}

/// Per-row LayerNorm followed by the affine gain/shift, tape-free.
pub fn layer_norm(x: &Tensor, gain: &Tensor, shift: &Tensor, eps: f64) -> Result<Tensor> {
    let mut tape = Tape::new();
    let xn = tape.leaf(x);
    let gn = tape.leaf(gain);
    let sn = tape.leaf(shift);
    let out = tape.layer_norm(xn, gn, sn, eps)?;
    Ok(tape.value(out).clone())
}

/// Layer pattern shared by every encoder and the predictor:
/// Linear → GELU → [LayerNorm] → Linear.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EncoderSpec {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub latent_dim: usize,
    pub layer_norm: bool,
}

impl EncoderSpec {
    /// Synthetic-study pattern: in 3 → hidden 32 → latent 16, no norm.
    pub fn synthetic(in_dim: usize) -> Self {
        EncoderSpec { in_dim, hidden_dim: 32, latent_dim: 16, layer_norm: false }
    }

    /// Clinical pattern: in d → 64 → GELU → LayerNorm(64) → 32.
    pub fn clinical(in_dim: usize) -> Self {
        EncoderSpec { in_dim, hidden_dim: 64, latent_dim: 32, layer_norm: true }
    }
}

/// Two-layer MLP with optional mid LayerNorm; the building block for the four
/// encoders and the shared predictor.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: EncoderSpec,
    pub l1: LinearLayer,
    /// LayerNorm gain/shift over the hidden width, when enabled.
    pub norm: Option<(Tensor, Tensor)>,
    pub l2: LinearLayer,
}

/// Tape node ids for one bound MLP's parameters.
#[derive(Debug, Clone, Copy)]
pub struct MlpBinding {
    w1: NodeId,
    b1: NodeId,
    norm: Option<(NodeId, NodeId)>,
    w2: NodeId,
    b2: NodeId,
}

impl Mlp {
    pub fn new(spec: EncoderSpec, rng: &mut RngStream) -> Self {
        let l1 = LinearLayer::new(spec.in_dim, spec.hidden_dim, rng);
        let norm = spec
            .layer_norm
            .then(|| (Tensor::filled(1, spec.hidden_dim, 1.0), Tensor::zeros(1, spec.hidden_dim)));
        let l2 = LinearLayer::new(spec.hidden_dim, spec.latent_dim, rng);
        Mlp { spec, l1, norm, l2 }
    }

    pub fn in_dim(&self) -> usize {
        self.spec.in_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent_dim
    }

    /// Tape-free forward pass (frozen evaluation path).
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let h = self.l1.forward(x)?;
        let h = gelu(&h);
        let h = match &self.norm {
            Some((gain, shift)) => layer_norm(&h, gain, shift, LAYER_NORM_EPS)?,
            None => h,
        };
        self.l2.forward(&h)
    }

    /// Register this MLP's parameters as tape leaves.
    pub fn bind(&self, tape: &mut Tape) -> MlpBinding {
        MlpBinding {
            w1: tape.leaf(&self.l1.weight),
            b1: tape.leaf(&self.l1.bias),
            norm: self.norm.as_ref().map(|(g, s)| (tape.leaf(g), tape.leaf(s))),
            w2: tape.leaf(&self.l2.weight),
            b2: tape.leaf(&self.l2.bias),
        }
    }

    /// Recorded forward pass through bound parameters.
    pub fn forward_on(&self, tape: &mut Tape, binding: &MlpBinding, x: NodeId) -> Result<NodeId> {
        let h = tape.linear(x, binding.w1, binding.b1)?;
        let h = tape.gelu(h);
        let h = match binding.norm {
            Some((g, s)) => tape.layer_norm(h, g, s, LAYER_NORM_EPS)?,
            None => h,
        };
        tape.linear(h, binding.w2, binding.b2)
    }

    /// Copy accumulated tape gradients into the parameter tensors' grad slots.
    pub fn collect_grads(&mut self, tape: &Tape, binding: &MlpBinding) {
        fn copy(t: &mut Tensor, tape: &Tape, id: NodeId) {
            let g = tape.grad_tensor(id);
            t.set_grad(g.data().to_vec());
        }
        copy(&mut self.l1.weight, tape, binding.w1);
        copy(&mut self.l1.bias, tape, binding.b1);
        if let (Some((gain, shift)), Some((gid, sid))) = (self.norm.as_mut(), binding.norm) {
            copy(gain, tape, gid);
            copy(shift, tape, sid);
        }
        copy(&mut self.l2.weight, tape, binding.w2);
        copy(&mut self.l2.bias, tape, binding.b2);
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out = Vec::with_capacity(6);
        out.push(&self.l1.weight);
        out.push(&self.l1.bias);
        if let Some((g, s)) = &self.norm {
            out.push(g);
            out.push(s);
        }
        out.push(&self.l2.weight);
        out.push(&self.l2.bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::with_capacity(6);
        out.push(&mut self.l1.weight);
        out.push(&mut self.l1.bias);
        if let Some((g, s)) = &mut self.norm {
            out.push(g);
            out.push(s);
        }
        out.push(&mut self.l2.weight);
        out.push(&mut self.l2.bias);
        out
    }

    /// Stable parameter names under a component prefix, matching `params` order.
    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        let mut names = Vec::with_capacity(6);
        names.push(format!("{prefix}.l1.weight"));
        names.push(format!("{prefix}.l1.bias"));
        if self.norm.is_some() {
            names.push(format!("{prefix}.norm.gain"));
            names.push(format!("{prefix}.norm.shift"));
        }
        names.push(format!("{prefix}.l2.weight"));
        names.push(format!("{prefix}.l2.bias"));
        names
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }
}
