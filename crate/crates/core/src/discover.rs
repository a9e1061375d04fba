//! Gradient-guided Langevin diffusion over the learned energy landscape —
//! joint, forward, and abductive modes — plus marginal-predictive discovery
//! with Metropolis–Hastings validation and nearest-token latent decoding.
//!
//! All discovery runs operate on a frozen model: gradients flow through the
//! predictor to the latent state being updated, never into parameters.

use crate::error::{Error, Result};
use crate::model::DualEncoderModel;
use crate::rng::RngStream;
use crate::rulemine::Vocabulary;
use crate::tape::Tape;
use crate::tensor::Tensor;
use alloc::string::String;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LangevinMode {
    Joint,
    Forward,
    Abductive,
    Marginal,
}

/// Langevin dynamics configuration. The update is
/// z ← z − η·∇E(z) + √(2ηT)·ε, so `temperature` is a pure noise knob;
/// `noise_scale` overrides the √(2ηT) coefficient directly when set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LangevinConfig {
    pub eta: f64,
    pub temperature: f64,
    pub iterations: usize,
    pub mode: LangevinMode,
    pub clamp: Option<(f64, f64)>,
    pub noise_scale: Option<f64>,
}

impl LangevinConfig {
    pub fn new(mode: LangevinMode) -> Self {
        LangevinConfig {
            eta: 0.1,
            temperature: 1e-4,
            iterations: 100,
            mode,
            clamp: None,
            noise_scale: None,
        }
    }

    /// Deterministic descent (T = 0).
    pub fn deterministic(mode: LangevinMode, eta: f64, iterations: usize) -> Self {
        LangevinConfig { eta, temperature: 0.0, iterations, mode, clamp: None, noise_scale: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta <= 0.0 || self.temperature < 0.0 || self.iterations == 0 {
            return Err(Error::InvalidConfig {
                what: "langevin",
                detail: alloc::format!(
                    "need eta > 0, T >= 0, iterations >= 1 (got {}, {}, {})",
                    self.eta,
                    self.temperature,
                    self.iterations
                ),
            });
        }
        Ok(())
    }

    /// √(2ηT) unless overridden.
    pub fn effective_noise(&self) -> f64 {
        self.noise_scale
            .unwrap_or_else(|| libm::sqrt(2.0 * self.eta * self.temperature))
    }
}

/// Final latents, the per-iteration energy trajectory (length K+1 including
/// the initial state), and — for decoded/validated runs — the symbolic
/// profile and MH acceptance flag.
#[derive(Debug, Clone)]
pub struct DiscoveryResult {
    pub z_c: Tensor,
    pub z_t: Tensor,
    pub energies: Vec<f64>,
    pub decoded: Option<DecodedPair>,
    pub accepted: Option<bool>,
}

/// Energy E(z_c, z_t) = ‖g(z_c) − z_t‖² and its gradients w.r.t. both latent
/// blocks, computed through the frozen predictor.
fn energy_and_grads(
    model: &DualEncoderModel,
    z_c: &Tensor,
    z_t: &Tensor,
) -> Result<(f64, Tensor, Tensor)> {
    let mut tape = Tape::new();
    let g_binding = model.g.bind(&mut tape);
    let zc_node = tape.leaf(z_c);
    let zt_node = tape.leaf(z_t);
    let pred = model.g.forward_on(&mut tape, &g_binding, zc_node)?;
    let diff = tape.sub(pred, zt_node)?;
    let row = tape.row_sum_sq(diff);
    let energy = tape.sum_all(row);
    tape.backward(energy)?;
    Ok((tape.scalar(energy), tape.grad_tensor(zc_node), tape.grad_tensor(zt_node)))
}

fn apply_update(
    z: &mut Tensor,
    grad: &Tensor,
    eta: f64,
    noise: f64,
    rng: &mut RngStream,
    clamp: Option<(f64, f64)>,
) {
    for i in 0..z.len() {
        let mut v = z.data()[i] - eta * grad.data()[i];
        if noise > 0.0 {
            v += noise * rng.normal();
        }
        if let Some((lo, hi)) = clamp {
            v = v.clamp(lo, hi);
        }
        z.data_mut()[i] = v;
    }
}

fn run_joint_family(
    model: &DualEncoderModel,
    mut z_c: Tensor,
    mut z_t: Tensor,
    update_c: bool,
    update_t: bool,
    cfg: &LangevinConfig,
    rng: &mut RngStream,
) -> Result<DiscoveryResult> {
    cfg.validate()?;
    let noise = cfg.effective_noise();
    let mut energies = Vec::with_capacity(cfg.iterations + 1);
    let (e0, _, _) = energy_and_grads(model, &z_c, &z_t)?;
    if !e0.is_finite() {
        return Err(Error::NonFinite { context: "langevin initial energy" });
    }
    energies.push(e0);
    for _ in 0..cfg.iterations {
        let (_, g_c, g_t) = energy_and_grads(model, &z_c, &z_t)?;
        if update_c {
            apply_update(&mut z_c, &g_c, cfg.eta, noise, rng, cfg.clamp);
        }
        if update_t {
            apply_update(&mut z_t, &g_t, cfg.eta, noise, rng, cfg.clamp);
        }
        let (e, _, _) = energy_and_grads(model, &z_c, &z_t)?;
        if !e.is_finite() {
            return Err(Error::NonFinite { context: "langevin energy" });
        }
        energies.push(e);
    }
    Ok(DiscoveryResult { z_c, z_t, energies, decoded: None, accepted: None })
}

/// Unconditional rule discovery: both latent blocks flow down the joint
/// energy.
pub fn langevin_joint(
    model: &DualEncoderModel,
    z0_c: Tensor,
    z0_t: Tensor,
    cfg: &LangevinConfig,
    rng: &mut RngStream,
) -> Result<DiscoveryResult> {
    run_joint_family(model, z0_c, z0_t, true, true, cfg, rng)
}

/// Forward inference: the antecedent latent is fixed, only z_t moves. With
/// T = 0 this contracts geometrically onto g(z_c) with ratio (1 − 2η).
pub fn langevin_forward(
    model: &DualEncoderModel,
    z_c: Tensor,
    z0_t: Tensor,
    cfg: &LangevinConfig,
    rng: &mut RngStream,
) -> Result<DiscoveryResult> {
    run_joint_family(model, z_c, z0_t, false, true, cfg, rng)
}

/// Abductive reasoning: the consequent latent is fixed, z_c moves with the
/// gradient backpropagated through the predictor.
pub fn langevin_abductive(
    model: &DualEncoderModel,
    z0_c: Tensor,
    z_t: Tensor,
    cfg: &LangevinConfig,
    rng: &mut RngStream,
) -> Result<DiscoveryResult> {
    run_joint_family(model, z0_c, z_t, true, false, cfg, rng)
}

// ── marginal context energy ─────────────────────────────────────────────

/// Soft-min energy over a bank of stored context latents:
/// E_ctx(z) = −τ_s·log Σⱼ exp(−‖z − zⱼ‖²/τ_s). A differentiable surrogate
/// for squared nearest-neighbor distance; never exceeds minⱼ ‖z − zⱼ‖².
pub fn marginal_context_energy(z_c: &Tensor, bank: &Tensor, tau_s: f64) -> Result<f64> {
    let (e, _) = marginal_context_energy_grad(z_c, bank, tau_s, false)?;
    Ok(e)
}

/// Energy and (optionally) its analytic gradient: ∇E = Σⱼ wⱼ·2(z − zⱼ) with
/// softmax weights wⱼ ∝ exp(−dⱼ/τ_s).
pub fn marginal_context_energy_grad(
    z_c: &Tensor,
    bank: &Tensor,
    tau_s: f64,
    want_grad: bool,
) -> Result<(f64, Tensor)> {
    if bank.rows() == 0 {
        return Err(Error::EmptyInput { context: "marginal_context_energy latent bank" });
    }
    if z_c.cols() != bank.cols() {
        return Err(Error::ShapeMismatch {
            op: "marginal_context_energy",
            expected: (1, bank.cols()),
            got: z_c.shape(),
        });
    }
    let z = z_c.row(0);
    let dists: Vec<f64> = (0..bank.rows())
        .map(|r| Tensor::row_distance_sq(z, bank.row(r)))
        .collect();
    let min_d = dists.iter().copied().fold(f64::INFINITY, f64::min);
    // log-sum-exp with the max factored out for stability
    let sum: f64 = dists.iter().map(|d| libm::exp(-(d - min_d) / tau_s)).sum();
    let energy = min_d - tau_s * libm::log(sum);
    let mut grad = Tensor::zeros(1, z_c.cols());
    if want_grad {
        for (r, d) in dists.iter().enumerate() {
            let w = libm::exp(-(d - min_d) / tau_s) / sum;
            for c in 0..z_c.cols() {
                let g = grad.get(0, c) + w * 2.0 * (z[c] - bank.get(r, c));
                grad.set(0, c, g);
            }
        }
    }
    Ok((energy, grad))
}

// ── Metropolis–Hastings validation ──────────────────────────────────────

/// Decoded symbolic forms of a proposed rule, domain-dependent.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodedPair {
    /// Synthetic domain: antecedent/consequent points.
    Points { antecedent: Vec<f64>, consequent: Vec<f64> },
    /// Clinical domain: antecedent token profile and consequent tokens.
    Tokens { antecedent: Vec<String>, consequent: Vec<String> },
}

/// Validity score π(A, C) ≥ 0; deterministic for a fixed knowledge base.
pub trait Validator {
    fn score(&self, pair: &DecodedPair) -> f64;
}

/// Ground-truth synthetic validator: π = exp(−‖C − (A + offset)‖²).
pub struct OffsetRuleValidator {
    pub offset: Vec<f64>,
}

impl Validator for OffsetRuleValidator {
    fn score(&self, pair: &DecodedPair) -> f64 {
        match pair {
            DecodedPair::Points { antecedent, consequent } => {
                let d: f64 = consequent
                    .iter()
                    .zip(antecedent.iter().zip(&self.offset))
                    .map(|(c, (a, o))| {
                        let diff = c - (a + o);
                        diff * diff
                    })
                    .sum();
                libm::exp(-d)
            }
            DecodedPair::Tokens { .. } => 0.0,
        }
    }
}

/// Clinical validator backed by the mined rule base: π = 1 when some mined
/// rule with the proposed consequent has its antecedent contained in the
/// decoded profile and confidence ≥ 0.5, else 0.1 (soft rejection).
pub struct RuleBaseValidator {
    /// (sorted antecedent tokens, consequent token, confidence) per rule.
    rules: Vec<(Vec<String>, String, f64)>,
}

impl RuleBaseValidator {
    pub fn new(rules: &[crate::rulemine::RuleTuple]) -> Self {
        let rules = rules
            .iter()
            .map(|r| {
                let mut a = r.antecedent_tokens();
                a.sort();
                (a, r.consequent_token(), r.stats.confidence)
            })
            .collect();
        RuleBaseValidator { rules }
    }
}

impl Validator for RuleBaseValidator {
    fn score(&self, pair: &DecodedPair) -> f64 {
        let DecodedPair::Tokens { antecedent, consequent } = pair else { return 0.0 };
        let mut best = 0.0f64;
        for (rule_ante, rule_cons, conf) in &self.rules {
            if consequent.iter().any(|c| c == rule_cons)
                && rule_ante.iter().all(|t| antecedent.contains(t))
            {
                best = best.max(*conf);
            }
        }
        if best >= 0.5 {
            1.0
        } else {
            0.1
        }
    }
}

/// One MH acceptance decision with probability min(1, π_new/π_old). A
/// non-positive π_new is always rejected; a non-positive π_old (with a
/// positive π_new) is always accepted.
pub fn mh_accept(rng: &mut RngStream, pi_new: f64, pi_old: f64) -> bool {
    if pi_new <= 0.0 {
        return false;
    }
    if pi_old <= 0.0 {
        return true;
    }
    let ratio = pi_new / pi_old;
    ratio >= 1.0 || rng.next_f64() < ratio
}

/// Marginal-predictive discovery (one chain per proposal):
/// (1) Langevin on the marginal context energy over the latent bank,
/// (2) feed-forward ẑ_t = g(z_c),
/// (3) decode and MH-validate against the previously accepted rule (the
///     first proposal is auto-accepted).
#[allow(clippy::too_many_arguments)]
pub fn discover_marginal(
    model: &DualEncoderModel,
    bank: &Tensor,
    cfg: &LangevinConfig,
    tau_s: f64,
    validator: &dyn Validator,
    decode: &dyn Fn(&Tensor, &Tensor) -> Result<DecodedPair>,
    rng: &mut RngStream,
    n_proposals: usize,
) -> Result<Vec<DiscoveryResult>> {
    cfg.validate()?;
    if bank.rows() == 0 {
        return Err(Error::EmptyInput { context: "discover_marginal latent bank" });
    }
    let latent_dim = model.latent_dim();
    let noise = cfg.effective_noise();
    let mut results = Vec::with_capacity(n_proposals);
    let mut pi_old: Option<f64> = None;
    for _ in 0..n_proposals {
        // init z_c ~ N(0, I) in latent space
        let mut z_c = Tensor::zeros(1, latent_dim);
        for v in z_c.data_mut() {
            *v = rng.normal();
        }
        let mut energies = Vec::with_capacity(cfg.iterations + 1);
        let (e0, _) = marginal_context_energy_grad(&z_c, bank, tau_s, false)?;
        energies.push(e0);
        for _ in 0..cfg.iterations {
            let (_, grad) = marginal_context_energy_grad(&z_c, bank, tau_s, true)?;
            apply_update(&mut z_c, &grad, cfg.eta, noise, rng, cfg.clamp);
            let (e, _) = marginal_context_energy_grad(&z_c, bank, tau_s, false)?;
            if !e.is_finite() {
                return Err(Error::NonFinite { context: "marginal context energy" });
            }
            energies.push(e);
        }
        let z_t = model.g.forward(&z_c)?;
        let decoded = decode(&z_c, &z_t)?;
        let pi_new = validator.score(&decoded);
        let accepted = match pi_old {
            None => true,
            Some(old) => mh_accept(rng, pi_new, old),
        };
        if accepted {
            pi_old = Some(pi_new);
        }
        results.push(DiscoveryResult {
            z_c,
            z_t,
            energies,
            decoded: Some(decoded),
            accepted: Some(accepted),
        });
    }
    Ok(results)
}

// ── latent-to-symbolic decoding ─────────────────────────────────────────

/// Cached token → latent dictionary for one encoder side, with the median
/// inter-token distance used as the profile cutoff.
#[derive(Debug, Clone)]
pub struct TokenDictionary {
    pub tokens: Vec<String>,
    pub latents: Tensor,
    pub median_inter_distance: f64,
}

impl TokenDictionary {
    /// Encode every single-token one-hot through the supplied encoder side.
    pub fn build(
        vocab: &Vocabulary,
        encode: impl Fn(&Tensor) -> Result<Tensor>,
    ) -> Result<TokenDictionary> {
        if vocab.is_empty() {
            return Err(Error::EmptyInput { context: "token dictionary vocabulary" });
        }
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(vocab.len());
        for id in 0..vocab.len() {
            let mut one_hot = Tensor::zeros(1, vocab.len());
            one_hot.set(0, id, 1.0);
            let z = encode(&one_hot)?;
            rows.push(z.row(0).to_vec());
        }
        let latents = Tensor::from_rows(&rows)?;
        let mut dists = Vec::new();
        for i in 0..latents.rows() {
            for j in (i + 1)..latents.rows() {
                dists.push(libm::sqrt(Tensor::row_distance_sq(latents.row(i), latents.row(j))));
            }
        }
        dists.sort_by(f64::total_cmp);
        let median_inter_distance = if dists.is_empty() {
            f64::INFINITY
        } else if dists.len() % 2 == 1 {
            dists[dists.len() / 2]
        } else {
            0.5 * (dists[dists.len() / 2 - 1] + dists[dists.len() / 2])
        };
        Ok(TokenDictionary {
            tokens: vocab.tokens().to_vec(),
            latents,
            median_inter_distance,
        })
    }

    fn feature_of(token: &str) -> &str {
        token.split_once('=').map(|(f, _)| f).unwrap_or(token)
    }
}

/// A decoded profile: the raw k-nearest ranking (which can expose e.g. a
/// dual-age profile) and the deduplicated, distance-thresholded profile.
#[derive(Debug, Clone)]
pub struct DecodedProfile {
    /// k nearest tokens with distances, before any filtering.
    pub raw: Vec<(String, f64)>,
    /// At most one token per feature, nearer than the median inter-token
    /// distance.
    pub profile: Vec<(String, f64)>,
}

/// k-nearest-token decoding of a latent against a cached dictionary.
pub fn decode_latent(z: &Tensor, dict: &TokenDictionary, k: usize) -> Result<DecodedProfile> {
    if dict.tokens.is_empty() {
        return Err(Error::EmptyInput { context: "decode_latent dictionary" });
    }
    if z.cols() != dict.latents.cols() {
        return Err(Error::ShapeMismatch {
            op: "decode_latent",
            expected: (1, dict.latents.cols()),
            got: z.shape(),
        });
    }
    let mut ranked: Vec<(usize, f64)> = (0..dict.latents.rows())
        .map(|r| (r, libm::sqrt(Tensor::row_distance_sq(z.row(0), dict.latents.row(r)))))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    let raw: Vec<(String, f64)> =
        ranked.iter().map(|&(i, d)| (dict.tokens[i].clone(), d)).collect();

    let mut profile: Vec<(String, f64)> = Vec::new();
    for (token, d) in &raw {
        if *d > dict.median_inter_distance {
            continue;
        }
        let feature = TokenDictionary::feature_of(token);
        // highest-ranked token wins per feature
        if !profile.iter().any(|(t, _)| TokenDictionary::feature_of(t) == feature) {
            profile.push((token.clone(), *d));
        }
    }
    Ok(DecodedProfile { raw, profile })
}

/// Zero-shot translation of a raw observation into a consequent profile:
/// pass g(f_c_data(x)) and decode the nearest symbolic neighbors on the rule
/// target side.
pub fn translate_patient(
    model: &DualEncoderModel,
    x_test: &Tensor,
    consequent_dict: &TokenDictionary,
    k: usize,
) -> Result<DecodedProfile> {
    let z = model.forward_data(x_test)?;
    decode_latent(&z, consequent_dict, k)
}

/// Index of the nearest bank row (payload decoding for point domains).
pub fn nearest_row(z: &Tensor, bank: &Tensor) -> Result<usize> {
    if bank.rows() == 0 {
        return Err(Error::EmptyInput { context: "nearest_row bank" });
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for r in 0..bank.rows() {
        let d = Tensor::row_distance_sq(z.row(0), bank.row(r));
        if d < best_d {
            best_d = d;
            best = r;
        }
    }
    Ok(best)
}
