//! Training losses: the weighted rule-pair prediction loss, the data
//! prediction loss, the energy-based constraint with its contrastive margin,
//! the anchor (pole-alignment) loss, their linear composition, and negative
//! pair generation for both experiments.

use crate::error::{Error, Result};
use crate::model::{encode_rule_batch, DualEncoderModel, ModelBinding};
use crate::rng::{sample_gaussian, RngStream};
use crate::rulemine::{corrupt_rule, RuleTuple, Vocabulary};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use alloc::vec::Vec;

/// Loss weighting: the EBC weight (β in the synthetic objective, α in the
/// clinical one), the anchor weight (clinical β), the in-EBC negative weight
/// λ, and the margin m.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub ebc: f64,
    pub anchor: f64,
    pub lambda: f64,
    pub margin: f64,
}

impl LossWeights {
    /// Synthetic composition: L = L_JEPA + β·(Σ E_valid + λ·Σ hinge).
    pub fn synthetic(beta: f64, lambda: f64, margin: f64) -> Self {
        LossWeights { ebc: beta, anchor: 0.0, lambda, margin }
    }

    /// Clinical composition: L = L_JEPA + α·L_EBC + β·L_anchor, with the EBC
    /// terms as batch means and λ = 1.
    pub fn clinical(alpha: f64, beta: f64, margin: f64) -> Self {
        LossWeights { ebc: alpha, anchor: beta, lambda: 1.0, margin }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ebc < 0.0 || self.anchor < 0.0 || self.lambda < 0.0 {
            return Err(Error::InvalidConfig {
                what: "loss_weights",
                detail: alloc::string::String::from("weights must be nonnegative"),
            });
        }
        if self.ebc > 0.0 && self.margin <= 0.0 {
            return Err(Error::InvalidConfig {
                what: "loss_weights",
                detail: alloc::string::String::from("margin must be positive when EBC is active"),
            });
        }
        Ok(())
    }
}

/// Whether EBC terms are summed (synthetic full batch) or averaged
/// (clinical batches).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EbcReduction {
    Sum,
    Mean,
}

/// Where a batch of negative pairs came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeProvenance {
    FlippedConsequent,
    OodGaussian,
}

/// Antecedent/consequent pairs that must sit above the margin.
#[derive(Debug, Clone)]
pub struct NegativeRuleBatch {
    pub antecedents: Tensor,
    pub consequents: Tensor,
    pub provenance: NegativeProvenance,
}

// ── individual losses (recorded on the tape) ────────────────────────────

/// Σᵢ wᵢ·‖ẑᵗ⁽ⁱ⁾ − zᵗ⁽ⁱ⁾‖² over already-computed latent nodes.
pub fn loss_rbjepa(
    tape: &mut Tape,
    pred_latents: NodeId,
    target_latents: NodeId,
    weights: &[f64],
) -> Result<NodeId> {
    let rows = tape.value(pred_latents).rows();
    if weights.len() != rows {
        return Err(Error::ShapeMismatch {
            op: "loss_rbjepa",
            expected: (rows, 1),
            got: (weights.len(), 1),
        });
    }
    if weights.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidConfig {
            what: "rule weights",
            detail: alloc::string::String::from("weights must be nonnegative"),
        });
    }
    let diff = tape.sub(pred_latents, target_latents)?;
    let energies = tape.row_sum_sq(diff);
    let w = tape.leaf(&Tensor::from_vec(rows, 1, weights.to_vec())?);
    let w = tape.stop_grad(w);
    tape.dot(energies, w)
}

/// Mean over the batch of ‖g(f_c_data(x_c)) − f_t_data(x_t)‖²; the target
/// side passes through the EMA shadow behind stop-gradient.
pub fn loss_jepa_data(
    tape: &mut Tape,
    model: &DualEncoderModel,
    binding: &ModelBinding,
    x_c: &Tensor,
    x_t: &Tensor,
) -> Result<NodeId> {
    if x_c.shape() != x_t.shape() {
        return Err(Error::ShapeMismatch { op: "loss_jepa_data", expected: x_c.shape(), got: x_t.shape() });
    }
    let pred = model.taped_data_prediction(tape, binding, x_c)?;
    let target = model.taped_data_target(tape, binding, x_t)?;
    let diff = tape.sub(pred, target)?;
    let energies = tape.row_sum_sq(diff);
    Ok(tape.mean_all(energies))
}

/// Per-pair rule energies E(A, C) on the tape: ‖g(f_c_rule(A)) − f_t_rule(C)‖²
/// as an n×1 node.
pub fn taped_rule_energies(
    tape: &mut Tape,
    model: &DualEncoderModel,
    binding: &ModelBinding,
    antecedents: &Tensor,
    consequents: &Tensor,
) -> Result<NodeId> {
    let pred = model.taped_rule_prediction(tape, binding, antecedents)?;
    let target = model.taped_rule_target(tape, binding, consequents)?;
    let diff = tape.sub(pred, target)?;
    Ok(tape.row_sum_sq(diff))
}

/// Energy-based constraint: pull valid pairs to low energy, push corrupted
/// pairs above the margin. `reduction` picks the synthetic sum or the
/// clinical mean form.
#[allow(clippy::too_many_arguments)]
pub fn loss_ebc(
    tape: &mut Tape,
    model: &DualEncoderModel,
    binding: &ModelBinding,
    valid_antecedents: &Tensor,
    valid_consequents: &Tensor,
    negatives: &NegativeRuleBatch,
    margin: f64,
    lambda: f64,
    reduction: EbcReduction,
) -> Result<NodeId> {
    if margin <= 0.0 {
        return Err(Error::InvalidConfig {
            what: "margin",
            detail: alloc::string::String::from("must be positive"),
        });
    }
    let e_valid = taped_rule_energies(tape, model, binding, valid_antecedents, valid_consequents)?;
    let e_neg =
        taped_rule_energies(tape, model, binding, &negatives.antecedents, &negatives.consequents)?;
    let hinge = tape.hinge(e_neg, margin);
    let (pos, neg) = match reduction {
        EbcReduction::Sum => (tape.sum_all(e_valid), tape.sum_all(hinge)),
        EbcReduction::Mean => (tape.mean_all(e_valid), tape.mean_all(hinge)),
    };
    let neg_weighted = tape.scale(neg, lambda);
    tape.add(pos, neg_weighted)
}

/// Anchor loss: mean over the batch of y·‖ẑ − z_high‖² + (1−y)·‖ẑ − z_low‖²
/// with ẑ = g(f_c_data(x_c)). The poles are constants at training time
/// (stop-gradient).
pub fn loss_anchor(
    tape: &mut Tape,
    model: &DualEncoderModel,
    binding: &ModelBinding,
    x_c: &Tensor,
    labels: &[f64],
    pole_high: &Tensor,
    pole_low: &Tensor,
) -> Result<NodeId> {
    let n = x_c.rows();
    if labels.len() != n {
        return Err(Error::ShapeMismatch { op: "loss_anchor", expected: (n, 1), got: (labels.len(), 1) });
    }
    if labels.iter().any(|y| *y != 0.0 && *y != 1.0) {
        return Err(Error::InvalidConfig {
            what: "anchor labels",
            detail: alloc::string::String::from("labels must lie in {0, 1}"),
        });
    }
    let pred = model.taped_data_prediction(tape, binding, x_c)?;
    let high_leaf = tape.leaf(&pole_high.tile_rows(n));
    let high = tape.stop_grad(high_leaf);
    let low_leaf = tape.leaf(&pole_low.tile_rows(n));
    let low = tape.stop_grad(low_leaf);

    let d_high = tape.sub(pred, high)?;
    let e_high = tape.row_sum_sq(d_high);
    let d_low = tape.sub(pred, low)?;
    let e_low = tape.row_sum_sq(d_low);

    let y = Tensor::from_vec(n, 1, labels.to_vec())?;
    let y_leaf = tape.leaf(&y);
    let y_node = tape.stop_grad(y_leaf);
    let inv = y.map(|v| 1.0 - v);
    let inv_leaf = tape.leaf(&inv);
    let inv_node = tape.stop_grad(inv_leaf);

    let term_high = tape.dot(y_node, e_high)?;
    let term_low = tape.dot(inv_node, e_low)?;
    let sum = tape.add(term_high, term_low)?;
    Ok(tape.scale(sum, 1.0 / n as f64))
}

/// Exact linear combination L_JEPA + w_ebc·L_EBC + w_anchor·L_anchor; the
/// component values stay readable on the tape for the per-epoch metrics log.
pub fn loss_total(
    tape: &mut Tape,
    l_jepa: NodeId,
    l_ebc: Option<NodeId>,
    l_anchor: Option<NodeId>,
    weights: &LossWeights,
) -> Result<NodeId> {
    weights.validate()?;
    let mut total = l_jepa;
    if let Some(ebc) = l_ebc {
        let scaled = tape.scale(ebc, weights.ebc);
        total = tape.add(total, scaled)?;
    }
    if let Some(anchor) = l_anchor {
        let scaled = tape.scale(anchor, weights.anchor);
        total = tape.add(total, scaled)?;
    }
    Ok(total)
}

// ── negative generation ─────────────────────────────────────────────────

/// Synthetic OOD negatives: antecedents split evenly between the two
/// out-of-distribution Gaussians; consequents are A + δ with δ ~ N(0, δ_cov·I)
/// resampled while ‖δ − offset‖ < reject_radius, so no negative accidentally
/// satisfies the true rule.
pub fn make_negatives_synthetic(
    rng: &mut RngStream,
    n: usize,
    mu_neg1: &[f64],
    mu_neg2: &[f64],
    cov_scale: f64,
    offset: &[f64],
    delta_cov: f64,
    reject_radius: f64,
) -> Result<NegativeRuleBatch> {
    if n == 0 {
        return Err(Error::EmptyInput { context: "make_negatives_synthetic" });
    }
    let dim = mu_neg1.len();
    let half = n / 2;
    let a1 = sample_gaussian(rng, mu_neg1, cov_scale, half);
    let a2 = sample_gaussian(rng, mu_neg2, cov_scale, n - half);
    let mut antecedents = Tensor::zeros(n, dim);
    for r in 0..half {
        for c in 0..dim {
            antecedents.set(r, c, a1.get(r, c));
        }
    }
    for r in 0..(n - half) {
        for c in 0..dim {
            antecedents.set(half + r, c, a2.get(r, c));
        }
    }
    let delta_std = libm::sqrt(delta_cov);
    let mut consequents = Tensor::zeros(n, dim);
    for r in 0..n {
        loop {
            let delta: Vec<f64> = (0..dim).map(|_| delta_std * rng.normal()).collect();
            let dist_sq: f64 =
                delta.iter().zip(offset).map(|(d, o)| (d - o) * (d - o)).sum();
            if libm::sqrt(dist_sq) >= reject_radius {
                for c in 0..dim {
                    consequents.set(r, c, antecedents.get(r, c) + delta[c]);
                }
                break;
            }
        }
    }
    Ok(NegativeRuleBatch {
        antecedents,
        consequents,
        provenance: NegativeProvenance::OodGaussian,
    })
}

/// Clinical negatives: one flipped-consequent corruption per valid rule,
/// antecedents unchanged.
pub fn make_negatives_clinical(
    valid_rules: &[RuleTuple],
    vocab: &Vocabulary,
) -> Result<NegativeRuleBatch> {
    if valid_rules.is_empty() {
        return Err(Error::EmptyInput { context: "make_negatives_clinical" });
    }
    let flipped: Vec<RuleTuple> =
        valid_rules.iter().map(corrupt_rule).collect::<Result<_>>()?;
    let (antecedents, consequents) = encode_rule_batch(&flipped, vocab)?;
    Ok(NegativeRuleBatch {
        antecedents,
        consequents,
        provenance: NegativeProvenance::FlippedConsequent,
    })
}
