//! The multi-modal dual-encoder architecture: data/rule context and target
//! encoders converging on one shared predictor `g`, plus rule feature
//! encoding, context masking, and the energy function.
//!
//! Both modalities pass through `g` independently (never concatenated). In
//! dual mode the data target encoder is an EMA shadow of the data context
//! encoder behind the stop-gradient boundary — it is never bound to the
//! tape, so backward cannot touch it — while the rule encoders train by
//! backprop. In unified mode all three networks (shared context encoder,
//! shared target encoder, predictor) train jointly by backprop, the setup
//! the synthetic study uses.

use crate::error::{Error, Result};
use crate::nn::{EncoderSpec, Mlp, MlpBinding};
use crate::rng::RngStream;
use crate::rulemine::{RuleTuple, Vocabulary};
use crate::tape::{NodeId, Tape};
use crate::tensor::Tensor;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum ModelMode {
    /// Data and rules share one context and one target encoder (the
    /// synthetic setting, where both live in the same space).
    Unified,
    /// Four encoders; rule inputs are vocabulary vectors (the clinical
    /// setting).
    Dual,
}

/// Which encoders the energy runs through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModalityPair {
    DataToData,
    RuleToRule,
    DataToRule,
}

#[derive(Debug, Clone)]
pub struct RuleEncoders {
    pub context: Mlp,
    pub target: Mlp,
}

/// Antecedent multi-hot / consequent one-hot encoding of a rule over the
/// vocabulary. An all-zero antecedent is the masked/null rule.
#[derive(Debug, Clone)]
pub struct RuleFeatureVector {
    pub antecedent: Tensor,
    pub consequent: Tensor,
}

/// Four encoders plus the shared universal predictor and the EMA shadow.
#[derive(Debug, Clone)]
pub struct DualEncoderModel {
    pub mode: ModelMode,
    pub f_c_data: Mlp,
    /// Data target encoder. In dual mode it is the EMA shadow of `f_c_data`
    /// and changes only via [`DualEncoderModel::ema_step`]; in unified mode
    /// it trains by backprop like everything else.
    pub f_t_data: Mlp,
    /// Present only in dual mode with a rule pathway; `None` is the classic,
    /// purely data-driven baseline.
    pub rules: Option<RuleEncoders>,
    pub g: Mlp,
}

/// Tape leaves for the trainable components of one forward/backward step.
pub struct ModelBinding {
    pub f_c_data: MlpBinding,
    /// Bound only in unified mode, where the target encoder backprops.
    pub f_t_data: Option<MlpBinding>,
    pub g: MlpBinding,
    pub rules: Option<(MlpBinding, MlpBinding)>,
}

impl DualEncoderModel {
    /// General builder: encoders and predictor from explicit specs. Each
    /// component draws from its own named substream, so two models built
    /// from the same master stream share bitwise-identical data pathways.
    pub fn with_specs(
        mode: ModelMode,
        data_spec: EncoderSpec,
        rule_spec: Option<EncoderSpec>,
        g_spec: EncoderSpec,
        rng: &RngStream,
    ) -> Self {
        debug_assert_eq!(data_spec.latent_dim, g_spec.in_dim);
        debug_assert_eq!(g_spec.in_dim, g_spec.latent_dim);
        // target starts as an exact copy of the context encoder
        let f_c_data = Mlp::new(data_spec, &mut rng.substream("init/f_c_data"));
        let f_t_data = f_c_data.clone();
        let rules = rule_spec.map(|spec| RuleEncoders {
            context: Mlp::new(spec.clone(), &mut rng.substream("init/f_c_rule")),
            target: Mlp::new(spec, &mut rng.substream("init/f_t_rule")),
        });
        DualEncoderModel {
            mode,
            f_c_data,
            f_t_data,
            rules,
            g: Mlp::new(g_spec, &mut rng.substream("init/g")),
        }
    }

    /// Synthetic unified model: one shared encoder pair plus predictor, all
    /// without LayerNorm; encoders map the 3-D space to a 16-D latent.
    pub fn new_unified(in_dim: usize, rng: &RngStream) -> Self {
        let enc = EncoderSpec::synthetic(in_dim);
        let g_spec = EncoderSpec {
            in_dim: enc.latent_dim,
            hidden_dim: enc.hidden_dim,
            latent_dim: enc.latent_dim,
            layer_norm: false,
        };
        Self::with_specs(ModelMode::Unified, enc, None, g_spec, rng)
    }

    /// Clinical dual model. `vocab_dim = None` builds the classic baseline
    /// with an identical data pathway and no rule encoders.
    pub fn new_dual(data_in_dim: usize, vocab_dim: Option<usize>, rng: &RngStream) -> Self {
        let data_spec = EncoderSpec::clinical(data_in_dim);
        let latent = data_spec.latent_dim;
        let g_spec = EncoderSpec { in_dim: latent, hidden_dim: 64, latent_dim: latent, layer_norm: true };
        Self::with_specs(
            ModelMode::Dual,
            data_spec,
            vocab_dim.map(EncoderSpec::clinical),
            g_spec,
            rng,
        )
    }

    pub fn latent_dim(&self) -> usize {
        self.g.latent_dim()
    }

    pub fn data_in_dim(&self) -> usize {
        self.f_c_data.in_dim()
    }

    pub fn has_rule_pathway(&self) -> bool {
        matches!(self.mode, ModelMode::Unified) || self.rules.is_some()
    }

    fn rule_context_encoder(&self) -> Result<&Mlp> {
        match self.mode {
            ModelMode::Unified => Ok(&self.f_c_data),
            ModelMode::Dual => self
                .rules
                .as_ref()
                .map(|r| &r.context)
                .ok_or(Error::Unsupported { what: "rule pathway on a classic model" }),
        }
    }

    fn rule_target_encoder(&self) -> Result<&Mlp> {
        match self.mode {
            ModelMode::Unified => Ok(&self.f_t_data),
            ModelMode::Dual => self
                .rules
                .as_ref()
                .map(|r| &r.target)
                .ok_or(Error::Unsupported { what: "rule pathway on a classic model" }),
        }
    }

    // ── frozen-model forward paths ──────────────────────────────────────

    /// ẑ = g(f_c_data(x)); the EMA shadow is not involved.
    pub fn forward_data(&self, x: &Tensor) -> Result<Tensor> {
        let z = self.f_c_data.forward(x)?;
        let out = self.g.forward(&z)?;
        out.check_finite("forward_data")?;
        Ok(out)
    }

    /// ẑ = g(f_c_rule(A)) for an antecedent vector (or point, in unified
    /// mode).
    pub fn forward_rule(&self, antecedent: &Tensor) -> Result<Tensor> {
        let z = self.rule_context_encoder()?.forward(antecedent)?;
        let out = self.g.forward(&z)?;
        out.check_finite("forward_rule")?;
        Ok(out)
    }

    /// Target-side rule encoding f_t_rule(C).
    pub fn encode_rule_target(&self, consequent: &Tensor) -> Result<Tensor> {
        self.rule_target_encoder()?.forward(consequent)
    }

    /// Per-row energies ‖g(f_c(·)) − f_t(·)‖² under the chosen encoder pair.
    pub fn energy(&self, context: &Tensor, target: &Tensor, pair: ModalityPair) -> Result<Vec<f64>> {
        if context.rows() != target.rows() {
            return Err(Error::ShapeMismatch {
                op: "energy",
                expected: (context.rows(), 0),
                got: (target.rows(), 0),
            });
        }
        let pred = match pair {
            ModalityPair::DataToData | ModalityPair::DataToRule => self.forward_data(context)?,
            ModalityPair::RuleToRule => self.forward_rule(context)?,
        };
        let tgt = match pair {
            ModalityPair::DataToData => self.f_t_data.forward(target)?,
            ModalityPair::RuleToRule | ModalityPair::DataToRule => {
                self.rule_target_encoder()?.forward(target)?
            }
        };
        Ok((0..pred.rows())
            .map(|r| Tensor::row_distance_sq(pred.row(r), tgt.row(r)))
            .collect())
    }

    /// Mean energy over a batch of pairs.
    pub fn mean_energy(&self, context: &Tensor, target: &Tensor, pair: ModalityPair) -> Result<f64> {
        let e = self.energy(context, target, pair)?;
        if e.is_empty() {
            return Err(Error::EmptyInput { context: "mean_energy" });
        }
        Ok(e.iter().sum::<f64>() / e.len() as f64)
    }

    /// Diagnostic poles: f_t_rule applied to the one-hot high/low risk
    /// consequents. Deterministic for a frozen model.
    pub fn risk_poles(&self, vocab: &Vocabulary) -> Result<(Tensor, Tensor)> {
        let enc = self.rule_target_encoder()?;
        let high = one_hot(vocab, "target_risk=1.0")?;
        let low = one_hot(vocab, "target_risk=0.0")?;
        Ok((enc.forward(&high)?, enc.forward(&low)?))
    }

    // ── taped training paths ────────────────────────────────────────────

    /// Bind the trainable components onto a tape. In dual mode the EMA
    /// shadow is deliberately absent; in unified mode the shared target
    /// encoder is bound because it trains by backprop.
    pub fn bind_trainable(&self, tape: &mut Tape) -> ModelBinding {
        ModelBinding {
            f_c_data: self.f_c_data.bind(tape),
            f_t_data: matches!(self.mode, ModelMode::Unified).then(|| self.f_t_data.bind(tape)),
            g: self.g.bind(tape),
            rules: self.rules.as_ref().map(|r| (r.context.bind(tape), r.target.bind(tape))),
        }
    }

    /// g(f_c_data(x_c)) recorded on the tape.
    pub fn taped_data_prediction(
        &self,
        tape: &mut Tape,
        binding: &ModelBinding,
        x_c: &Tensor,
    ) -> Result<NodeId> {
        let x = tape.leaf(x_c);
        let z = self.f_c_data.forward_on(tape, &binding.f_c_data, x)?;
        self.g.forward_on(tape, &binding.g, z)
    }

    /// g(f_c_rule(A)) recorded on the tape (shared encoders in unified mode).
    pub fn taped_rule_prediction(
        &self,
        tape: &mut Tape,
        binding: &ModelBinding,
        antecedent: &Tensor,
    ) -> Result<NodeId> {
        let a = tape.leaf(antecedent);
        let z = match (self.mode, &binding.rules) {
            (ModelMode::Unified, _) => self.f_c_data.forward_on(tape, &binding.f_c_data, a)?,
            (ModelMode::Dual, Some((ctx, _))) => {
                self.rule_context_encoder()?.forward_on(tape, ctx, a)?
            }
            (ModelMode::Dual, None) => {
                return Err(Error::Unsupported { what: "rule pathway on a classic model" })
            }
        };
        self.g.forward_on(tape, &binding.g, z)
    }

    /// Target-side rule latent. Trains by backprop through f_t_rule in dual
    /// mode and through the shared target encoder in unified mode.
    pub fn taped_rule_target(
        &self,
        tape: &mut Tape,
        binding: &ModelBinding,
        consequent: &Tensor,
    ) -> Result<NodeId> {
        match (self.mode, &binding.rules) {
            (ModelMode::Unified, _) => {
                let c = tape.leaf(consequent);
                let ft = binding
                    .f_t_data
                    .as_ref()
                    .expect("unified binding always carries the target encoder");
                self.f_t_data.forward_on(tape, ft, c)
            }
            (ModelMode::Dual, Some((_, tgt))) => {
                let c = tape.leaf(consequent);
                self.rule_target_encoder()?.forward_on(tape, tgt, c)
            }
            (ModelMode::Dual, None) => {
                Err(Error::Unsupported { what: "rule pathway on a classic model" })
            }
        }
    }

    /// f_t_data(x_t) on the data target side. In dual mode this is a
    /// stop-gradient leaf (the EMA shadow never backpropagates); in unified
    /// mode it is a live taped pass.
    pub fn taped_data_target(
        &self,
        tape: &mut Tape,
        binding: &ModelBinding,
        x_t: &Tensor,
    ) -> Result<NodeId> {
        match &binding.f_t_data {
            Some(ft) => {
                let x = tape.leaf(x_t);
                self.f_t_data.forward_on(tape, ft, x)
            }
            None => {
                let value = self.f_t_data.forward(x_t)?;
                let leaf = tape.leaf(&value);
                Ok(tape.stop_grad(leaf))
            }
        }
    }

    /// Copy tape gradients into the trainable parameters' grad buffers.
    pub fn collect_grads(&mut self, tape: &Tape, binding: &ModelBinding) {
        self.f_c_data.collect_grads(tape, &binding.f_c_data);
        if let Some(ft) = binding.f_t_data.as_ref() {
            self.f_t_data.collect_grads(tape, ft);
        }
        self.g.collect_grads(tape, &binding.g);
        if let (Some(r), Some((ctx, tgt))) = (self.rules.as_mut(), binding.rules.as_ref()) {
            r.context.collect_grads(tape, ctx);
            r.target.collect_grads(tape, tgt);
        }
    }

    /// Trainable parameters in stable order: data context encoder, (unified
    /// only) target encoder, predictor, then rule encoders when present.
    pub fn trainable_params_mut(&mut self) -> Vec<&mut Tensor> {
        let unified = matches!(self.mode, ModelMode::Unified);
        let mut out = self.f_c_data.params_mut();
        if unified {
            out.extend(self.f_t_data.params_mut());
        }
        out.extend(self.g.params_mut());
        if let Some(r) = self.rules.as_mut() {
            out.extend(r.context.params_mut());
            out.extend(r.target.params_mut());
        }
        out
    }

    pub fn trainable_params(&self) -> Vec<&Tensor> {
        let mut out = self.f_c_data.params();
        if matches!(self.mode, ModelMode::Unified) {
            out.extend(self.f_t_data.params());
        }
        out.extend(self.g.params());
        if let Some(r) = self.rules.as_ref() {
            out.extend(r.context.params());
            out.extend(r.target.params());
        }
        out
    }

    /// All parameters with stable names (trainables plus the EMA shadow).
    pub fn named_params(&self) -> Vec<(alloc::string::String, &Tensor)> {
        let mut out: Vec<(alloc::string::String, &Tensor)> = Vec::new();
        let mut components: Vec<(&'static str, &Mlp)> = alloc::vec![
            ("f_c_data", &self.f_c_data),
            ("f_t_data", &self.f_t_data),
            ("g", &self.g),
        ];
        if let Some(r) = self.rules.as_ref() {
            components.push(("f_c_rule", &r.context));
            components.push(("f_t_rule", &r.target));
        }
        for (prefix, mlp) in components {
            for (n, p) in mlp.param_names(prefix).into_iter().zip(mlp.params()) {
                out.push((n, p));
            }
        }
        out
    }

    /// Write a named parameter's values (checkpoint restore path).
    pub fn set_param(&mut self, name: &str, values: &[f64]) -> Result<()> {
        let (component, rest) = name
            .split_once('.')
            .ok_or(Error::InvalidConfig { what: "param name", detail: name.into() })?;
        let mlp: &mut Mlp = match component {
            "f_c_data" => &mut self.f_c_data,
            "f_t_data" => &mut self.f_t_data,
            "g" => &mut self.g,
            "f_c_rule" => {
                &mut self.rules.as_mut().ok_or(Error::Unsupported { what: "no rule encoders" })?.context
            }
            "f_t_rule" => {
                &mut self.rules.as_mut().ok_or(Error::Unsupported { what: "no rule encoders" })?.target
            }
            _ => return Err(Error::InvalidConfig { what: "param component", detail: name.into() }),
        };
        let names = mlp.param_names(component);
        let idx = names
            .iter()
            .position(|n| n.split_once('.').map(|(_, r)| r) == Some(rest))
            .ok_or(Error::InvalidConfig { what: "param name", detail: name.into() })?;
        let tensor = &mut mlp.params_mut()[idx];
        if tensor.len() != values.len() {
            return Err(Error::ShapeMismatch {
                op: "set_param",
                expected: tensor.shape(),
                got: (values.len(), 1),
            });
        }
        tensor.data_mut().copy_from_slice(values);
        Ok(())
    }

    /// EMA update of the data target shadow from the data context encoder.
    pub fn ema_step(&mut self, tau: f64) {
        let src: Vec<Tensor> = self.f_c_data.params().into_iter().cloned().collect();
        let mut tgt = self.f_t_data.params_mut();
        let src_refs: Vec<&Tensor> = src.iter().collect();
        crate::opt::ema_update(&mut tgt, &src_refs, tau);
    }

    /// Total parameter count of the data pathway (f_c_data, f_t_data, g);
    /// identical between a classic and a rule-informed model by construction.
    pub fn data_pathway_param_count(&self) -> usize {
        self.f_c_data.param_count() + self.f_t_data.param_count() + self.g.param_count()
    }

    /// FNV-1a over all parameter bits; used to assert frozen-model contracts.
    pub fn params_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |t: &Tensor| {
            for v in t.data() {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        };
        for (_, p) in self.named_params() {
            eat(p);
        }
        h
    }
}

// ── rule encoding ───────────────────────────────────────────────────────

fn one_hot(vocab: &Vocabulary, token: &str) -> Result<Tensor> {
    let mut t = Tensor::zeros(1, vocab.len());
    t.set(0, vocab.id(token)? as usize, 1.0);
    Ok(t)
}

/// Multi-hot antecedent and one-hot consequent vectors for one rule.
/// Deterministic given the vocabulary order.
pub fn encode_rule(rule: &RuleTuple, vocab: &Vocabulary) -> Result<RuleFeatureVector> {
    let mut antecedent = Tensor::zeros(1, vocab.len());
    for token in rule.antecedent_tokens() {
        antecedent.set(0, vocab.id(&token)? as usize, 1.0);
    }
    let consequent = one_hot(vocab, &rule.consequent_token())?;
    Ok(RuleFeatureVector { antecedent, consequent })
}

/// Stacked antecedent/consequent matrices for a batch of rules.
pub fn encode_rule_batch(rules: &[RuleTuple], vocab: &Vocabulary) -> Result<(Tensor, Tensor)> {
    let mut ante = Tensor::zeros(rules.len(), vocab.len());
    let mut cons = Tensor::zeros(rules.len(), vocab.len());
    for (r, rule) in rules.iter().enumerate() {
        let enc = encode_rule(rule, vocab)?;
        for c in 0..vocab.len() {
            ante.set(r, c, enc.antecedent.get(0, c));
            cons.set(r, c, enc.consequent.get(0, c));
        }
    }
    Ok((ante, cons))
}

/// Multi-hot vector for a list of antecedent tokens (an empty list encodes
/// the null rule).
pub fn encode_tokens(tokens: &[&str], vocab: &Vocabulary) -> Result<Tensor> {
    let mut t = Tensor::zeros(1, vocab.len());
    for token in tokens {
        t.set(0, vocab.id(token)? as usize, 1.0);
    }
    Ok(t)
}

// ── masking and zero-shot classification ────────────────────────────────

/// Independently zero each entry with probability `p_mask`; the target side
/// keeps the unmasked row.
pub fn mask_context(x: &Tensor, p_mask: f64, rng: &mut RngStream) -> Tensor {
    debug_assert!((0.0..1.0).contains(&p_mask) || p_mask == 0.0);
    let mut out = x.clone();
    for v in out.data_mut() {
        if rng.next_f64() < p_mask {
            *v = 0.0;
        }
    }
    out
}

/// Zero-shot diagnosis of one row: label by the nearer pole (Euclidean),
/// ties resolved toward low risk. Returns (label, distance_high,
/// distance_low).
pub fn zero_shot_classify(
    model: &DualEncoderModel,
    x: &Tensor,
    pole_high: &Tensor,
    pole_low: &Tensor,
) -> Result<Vec<(u8, f64, f64)>> {
    let pred = model.forward_data(x)?;
    let mut out = Vec::with_capacity(pred.rows());
    for r in 0..pred.rows() {
        let dh = libm::sqrt(Tensor::row_distance_sq(pred.row(r), pole_high.row(0)));
        let dl = libm::sqrt(Tensor::row_distance_sq(pred.row(r), pole_low.row(0)));
        out.push((u8::from(dh < dl), dh, dl));
    }
    Ok(out)
}
