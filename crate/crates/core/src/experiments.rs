//! The two end-to-end studies — the synthetic 3-D energy landscape and the
//! clinical heart-disease case — plus shared evaluation machinery: energy
//! tables, PCA via cyclic Jacobi rotations, the logistic linear probe,
//! landscape rasterization, and embedding banks.
//!
//! Everything here is pure computation over in-memory records; file parsing
//! and report emission live in the companion crate.

use crate::discover::{
    decode_latent, langevin_abductive, langevin_forward, langevin_joint, translate_patient,
    DecodedProfile, LangevinConfig, LangevinMode, TokenDictionary,
};
use crate::error::{Error, Result};
use crate::model::{
    encode_rule_batch, encode_tokens, mask_context, zero_shot_classify, DualEncoderModel,
    ModalityPair,
};
use crate::nn::Mlp;
use crate::objectives::{
    loss_anchor, loss_ebc, loss_jepa_data, loss_total, make_negatives_clinical,
    make_negatives_synthetic, EbcReduction, LossWeights, NegativeRuleBatch,
};
use crate::opt::{clip_grad_norm, AdamWConfig, AdamWState};
use crate::rng::{sample_gaussian, RngStream};
use crate::rulemine::{
    discretize, fp_growth, generate_rules, BinningSpec, ConsequentFilter, FeatureValue, RawRow,
    RuleTuple, Vocabulary,
};
use crate::tape::Tape;
use crate::tensor::Tensor;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

// ── configurations ──────────────────────────────────────────────────────

/// Synthetic landscape grid: square bounds, z-axis fixed to 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { min: -5.0, max: 5.0, resolution: 100 }
    }
}

/// Full synthetic study configuration with the benchmark defaults.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticConfig {
    pub n_data: usize,
    pub n_rules: usize,
    pub n_neg: usize,
    pub n_test: usize,
    pub mu1: [f64; 3],
    pub mu2: [f64; 3],
    pub mu_neg1: [f64; 3],
    pub mu_neg2: [f64; 3],
    /// Diagonal of the rule-sampling covariance (Σ = cov_scale·I).
    pub cov_scale: f64,
    /// Raw-data covariance factor: data are drawn with data_cov_factor·Σ.
    pub data_cov_factor: f64,
    pub rule_offset: [f64; 3],
    pub noise_sigma: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub lambda: f64,
    /// EBC weight in the synthetic composition.
    pub beta: f64,
    pub seed: u64,
    pub grid: GridSpec,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_data: 1000,
            n_rules: 200,
            n_neg: 500,
            n_test: 300,
            mu1: [2.0, 2.0, 0.0],
            mu2: [-2.0, -2.0, 0.0],
            mu_neg1: [-3.0, 3.0, 0.0],
            mu_neg2: [3.0, -3.0, 0.0],
            cov_scale: 0.5,
            data_cov_factor: 1.5,
            rule_offset: [1.0, 1.0, 1.0],
            noise_sigma: 0.2,
            epochs: 500,
            learning_rate: 1e-3,
            margin: 5.0,
            lambda: 1.0,
            beta: 1.0,
            seed: 111,
            grid: GridSpec::default(),
        }
    }
}

/// Clinical study configuration with the benchmark defaults.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClinicalConfig {
    pub test_fraction: f64,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// EBC weight α.
    pub alpha: f64,
    /// Anchor weight β.
    pub beta: f64,
    pub margin: f64,
    pub tau: f64,
    pub clip_norm: f64,
    pub min_support: f64,
    pub min_confidence: f64,
    pub p_mask: f64,
    pub max_antecedent_len: usize,
    pub discovery_k: usize,
}

impl Default for ClinicalConfig {
    fn default() -> Self {
        ClinicalConfig {
            test_fraction: 0.2,
            seed: 111,
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            alpha: 2.0,
            beta: 5.0,
            margin: 2.0,
            tau: 0.99,
            clip_norm: 1.0,
            min_support: 0.04,
            min_confidence: 0.70,
            p_mask: 0.3,
            max_antecedent_len: 4,
            discovery_k: 8,
        }
    }
}

// ── patient records and preprocessing ───────────────────────────────────

/// One complete record of the 14 clinical attributes, target binarized
/// (angiographic narrowing ≥ 50% ↦ 1).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PatientRecord {
    pub age: f64,
    pub sex: f64,
    pub cp: f64,
    pub trestbps: f64,
    pub chol: f64,
    pub fbs: f64,
    pub restecg: f64,
    pub thalach: f64,
    pub exang: f64,
    pub oldpeak: f64,
    pub slope: f64,
    pub ca: f64,
    pub thal: f64,
    pub target: u8,
}

impl PatientRecord {
    /// Domain checks over the categorical encodings.
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, &[f64]); 8] = [
            ("sex", self.sex, &[0.0, 1.0]),
            ("cp", self.cp, &[1.0, 2.0, 3.0, 4.0]),
            ("fbs", self.fbs, &[0.0, 1.0]),
            ("restecg", self.restecg, &[0.0, 1.0, 2.0]),
            ("exang", self.exang, &[0.0, 1.0]),
            ("slope", self.slope, &[1.0, 2.0, 3.0]),
            ("ca", self.ca, &[0.0, 1.0, 2.0, 3.0]),
            ("thal", self.thal, &[3.0, 6.0, 7.0]),
        ];
        for (name, value, domain) in checks {
            if !domain.contains(&value) {
                return Err(Error::InvalidConfig {
                    what: "patient record",
                    detail: format!("{name}={value} outside its domain"),
                });
            }
        }
        for (name, value) in [
            ("age", self.age),
            ("trestbps", self.trestbps),
            ("chol", self.chol),
            ("thalach", self.thalach),
            ("oldpeak", self.oldpeak),
        ] {
            if !value.is_finite() {
                return Err(Error::InvalidConfig {
                    what: "patient record",
                    detail: format!("{name} is not finite"),
                });
            }
        }
        Ok(())
    }

    /// Raw row for itemization, including the target token.
    pub fn to_raw_row(&self) -> RawRow {
        vec![
            ("age".to_string(), FeatureValue::Continuous(self.age)),
            ("sex".to_string(), FeatureValue::Categorical(self.sex)),
            ("cp".to_string(), FeatureValue::Categorical(self.cp)),
            ("trestbps".to_string(), FeatureValue::Continuous(self.trestbps)),
            ("chol".to_string(), FeatureValue::Continuous(self.chol)),
            ("fbs".to_string(), FeatureValue::Categorical(self.fbs)),
            ("restecg".to_string(), FeatureValue::Categorical(self.restecg)),
            ("thalach".to_string(), FeatureValue::Continuous(self.thalach)),
            ("exang".to_string(), FeatureValue::Categorical(self.exang)),
            ("oldpeak".to_string(), FeatureValue::Continuous(self.oldpeak)),
            ("slope".to_string(), FeatureValue::Categorical(self.slope)),
            ("ca".to_string(), FeatureValue::Categorical(self.ca)),
            ("thal".to_string(), FeatureValue::Categorical(self.thal)),
            ("target_risk".to_string(), FeatureValue::Categorical(self.target as f64)),
        ]
    }
}

/// Z-scoring statistics fit on the training split for the five continuous
/// features; categoricals are one-hot expanded, giving a 28-wide encoder
/// input.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Preprocessor {
    pub means: [f64; 5],
    pub stds: [f64; 5],
}

pub const CLINICAL_INPUT_DIM: usize = 28;

fn continuous_of(r: &PatientRecord) -> [f64; 5] {
    [r.age, r.trestbps, r.chol, r.thalach, r.oldpeak]
}

impl Preprocessor {
    pub fn fit(train: &[&PatientRecord]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyInput { context: "preprocessor fit" });
        }
        let n = train.len() as f64;
        let mut means = [0.0; 5];
        for r in train {
            for (m, v) in means.iter_mut().zip(continuous_of(r)) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = [0.0; 5];
        for r in train {
            for ((s, v), m) in stds.iter_mut().zip(continuous_of(r)).zip(means) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut stds {
            *s = if n > 1.0 { libm::sqrt(*s / (n - 1.0)) } else { 1.0 };
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Preprocessor { means, stds })
    }

    /// Encode records: z-scored continuous block then one-hot categoricals.
    pub fn transform(&self, records: &[PatientRecord]) -> Result<Tensor> {
        let mut out = Tensor::zeros(records.len(), CLINICAL_INPUT_DIM);
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            let cont = continuous_of(r);
            for c in 0..5 {
                out.set(i, c, (cont[c] - self.means[c]) / self.stds[c]);
            }
            let mut offset = 5;
            let mut one_hot = |slot: usize, width: usize, out: &mut Tensor| {
                out.set(i, offset + slot, 1.0);
                offset += width;
            };
            one_hot(r.sex as usize, 2, &mut out);
            one_hot(r.cp as usize - 1, 4, &mut out);
            one_hot(r.fbs as usize, 2, &mut out);
            one_hot(r.restecg as usize, 3, &mut out);
            one_hot(r.exang as usize, 2, &mut out);
            one_hot(r.slope as usize - 1, 3, &mut out);
            one_hot(r.ca as usize, 4, &mut out);
            let thal_slot = match r.thal as u32 {
                3 => 0,
                6 => 1,
                _ => 2,
            };
            one_hot(thal_slot, 3, &mut out);
        }
        Ok(out)
    }
}

/// Stratified train/test split: per-class shuffles from the split stream,
/// the rounded test fraction taken from each class.
pub fn stratified_split(
    labels: &[u8],
    test_fraction: f64,
    rng: &mut RngStream,
) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> =
            labels.iter().enumerate().filter(|(_, &l)| l == class).map(|(i, _)| i).collect();
        rng.shuffle(&mut idx);
        let n_test = libm::round(test_fraction * idx.len() as f64) as usize;
        test.extend(idx.iter().take(n_test).copied());
        train.extend(idx.iter().skip(n_test).copied());
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

// ── PCA via cyclic Jacobi rotations ─────────────────────────────────────

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// k×d row-major principal axes, ordered by descending eigenvalue.
    pub components: Tensor,
    pub mean: Vec<f64>,
    /// Fraction of total variance per retained component.
    pub explained_variance_ratio: Vec<f64>,
    /// n×k projected coordinates.
    pub projected: Tensor,
}

/// Mean-centered covariance eigendecomposition by cyclic Jacobi sweeps,
/// deterministic sign convention (largest-magnitude entry positive).
pub fn pca_fit_project(embeddings: &Tensor, n_components: usize) -> Result<PcaResult> {
    let (n, d) = embeddings.shape();
    if n < 2 {
        return Err(Error::EmptyInput { context: "pca needs at least two rows" });
    }
    if n_components == 0 || n_components > d {
        return Err(Error::InvalidConfig {
            what: "n_components",
            detail: format!("must be in [1, {d}], got {n_components}"),
        });
    }
    let mut mean = vec![0.0; d];
    for r in 0..n {
        for (m, v) in mean.iter_mut().zip(embeddings.row(r)) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    // sample covariance
    let mut cov = vec![0.0; d * d];
    for r in 0..n {
        let row = embeddings.row(r);
        for i in 0..d {
            let di = row[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (row[j] - mean[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in i..d {
            cov[i * d + j] /= denom;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    if trace <= 1e-12 {
        return Err(Error::DegenerateInput { context: "pca input has no variance" });
    }

    // cyclic Jacobi: rotate away off-diagonal mass
    let mut a = cov;
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let tol = 1e-14 * trace;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..d {
            for q in (p + 1)..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if libm::sqrt(off) < tol {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[p * d + p];
                let aqq = a[q * d + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut eig: Vec<(f64, usize)> = (0..d).map(|i| (a[i * d + i], i)).collect();
    eig.sort_by(|x, y| y.0.total_cmp(&x.0));

    let mut components = Tensor::zeros(n_components, d);
    let mut explained = Vec::with_capacity(n_components);
    for (k, &(lambda, col)) in eig.iter().take(n_components).enumerate() {
        let mut axis: Vec<f64> = (0..d).map(|r| v[r * d + col]).collect();
        // sign convention: the largest-magnitude entry is positive
        let mut max_idx = 0;
        for (i, x) in axis.iter().enumerate() {
            if x.abs() > axis[max_idx].abs() {
                max_idx = i;
            }
        }
        if axis[max_idx] < 0.0 {
            for x in &mut axis {
                *x = -*x;
            }
        }
        for (c, x) in axis.iter().enumerate() {
            components.set(k, c, *x);
        }
        explained.push(lambda.max(0.0) / trace);
    }

    let mut projected = Tensor::zeros(n, n_components);
    for r in 0..n {
        let row = embeddings.row(r);
        for k in 0..n_components {
            let mut acc = 0.0;
            for c in 0..d {
                acc += (row[c] - mean[c]) * components.get(k, c);
            }
            projected.set(r, k, acc);
        }
    }
    Ok(PcaResult { components, mean, explained_variance_ratio: explained, projected })
}

// ── logistic linear probe ───────────────────────────────────────────────

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub accuracy: f64,
    pub predictions: Vec<u8>,
}

const PROBE_LR: f64 = 0.1;
const PROBE_ITERS: usize = 1000;
const PROBE_L2: f64 = 1e-4;

/// Logistic regression by full-batch gradient descent on frozen embeddings;
/// returns test accuracy.
pub fn linear_probe(
    train_embeddings: &Tensor,
    train_labels: &[u8],
    test_embeddings: &Tensor,
    test_labels: &[u8],
) -> Result<ProbeResult> {
    let (n, d) = train_embeddings.shape();
    if n != train_labels.len() || test_embeddings.rows() != test_labels.len() {
        return Err(Error::ShapeMismatch {
            op: "linear_probe",
            expected: (n, 1),
            got: (train_labels.len(), 1),
        });
    }
    if test_labels.is_empty() {
        return Err(Error::EmptyInput { context: "probe test set" });
    }
    let positives = train_labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == train_labels.len() {
        return Err(Error::DegenerateProbe);
    }
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let sigmoid = |z: f64| 1.0 / (1.0 + libm::exp(-z));
    for _ in 0..PROBE_ITERS {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for r in 0..n {
            let row = train_embeddings.row(r);
            let z: f64 = row.iter().zip(&w).map(|(x, wi)| x * wi).sum::<f64>() + b;
            let err = sigmoid(z) - train_labels[r] as f64;
            for (g, x) in gw.iter_mut().zip(row) {
                *g += err * x;
            }
            gb += err;
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= PROBE_LR * (g / n as f64 + PROBE_L2 * *wi);
        }
        b -= PROBE_LR * gb / n as f64;
    }
    let mut correct = 0usize;
    let mut predictions = Vec::with_capacity(test_labels.len());
    for r in 0..test_embeddings.rows() {
        let row = test_embeddings.row(r);
        let z: f64 = row.iter().zip(&w).map(|(x, wi)| x * wi).sum::<f64>() + b;
        let pred = u8::from(sigmoid(z) > 0.5);
        predictions.push(pred);
        if pred == test_labels[r] {
            correct += 1;
        }
    }
    Ok(ProbeResult { accuracy: correct as f64 / test_labels.len() as f64, predictions })
}

// ── synthetic experiment ────────────────────────────────────────────────

/// Everything the synthetic study samples up front, shared verbatim by both
/// models.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub x: Tensor,
    pub y: Tensor,
    pub rule_antecedents: Tensor,
    pub rule_consequents: Tensor,
    pub negatives: NegativeRuleBatch,
    pub id_test: (Tensor, Tensor),
    pub ood_test: (Tensor, Tensor),
}

fn stack_halves(a: Tensor, b: Tensor) -> Tensor {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(a.rows() + b.rows());
    for r in 0..a.rows() {
        rows.push(a.row(r).to_vec());
    }
    for r in 0..b.rows() {
        rows.push(b.row(r).to_vec());
    }
    Tensor::from_rows(&rows).unwrap()
}

fn apply_offset(points: &Tensor, offset: &[f64]) -> Tensor {
    let mut out = points.clone();
    for r in 0..out.rows() {
        for (c, o) in offset.iter().enumerate() {
            out.set(r, c, out.get(r, c) + o);
        }
    }
    out
}

/// Sample the full synthetic corpus from per-purpose substreams of the seed.
pub fn generate_synthetic_data(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    let root = RngStream::new(cfg.seed);
    let data_cov = cfg.data_cov_factor * cfg.cov_scale;

    let mut data_rng = root.substream("data");
    let half = cfg.n_data / 2;
    let x = stack_halves(
        sample_gaussian(&mut data_rng, &cfg.mu1, data_cov, half),
        sample_gaussian(&mut data_rng, &cfg.mu2, data_cov, cfg.n_data - half),
    );
    let mut noise_rng = root.substream("noise");
    let noise =
        sample_gaussian(&mut noise_rng, &[0.0, 0.0, 0.0], cfg.noise_sigma * cfg.noise_sigma, cfg.n_data);
    let mut y = apply_offset(&x, &cfg.rule_offset);
    for r in 0..y.rows() {
        for c in 0..3 {
            y.set(r, c, y.get(r, c) + noise.get(r, c));
        }
    }

    let mut rule_rng = root.substream("rules");
    let rhalf = cfg.n_rules / 2;
    let rule_antecedents = stack_halves(
        sample_gaussian(&mut rule_rng, &cfg.mu1, cfg.cov_scale, rhalf),
        sample_gaussian(&mut rule_rng, &cfg.mu2, cfg.cov_scale, cfg.n_rules - rhalf),
    );
    let rule_consequents = apply_offset(&rule_antecedents, &cfg.rule_offset);

    let mut neg_rng = root.substream("negatives");
    let negatives = make_negatives_synthetic(
        &mut neg_rng,
        cfg.n_neg,
        &cfg.mu_neg1,
        &cfg.mu_neg2,
        cfg.cov_scale,
        &cfg.rule_offset,
        2.0,
        1.0,
    )?;

    let mut test_rng = root.substream("test");
    let thalf = cfg.n_test / 2;
    let id_points = stack_halves(
        sample_gaussian(&mut test_rng, &cfg.mu1, cfg.cov_scale, thalf),
        sample_gaussian(&mut test_rng, &cfg.mu2, cfg.cov_scale, cfg.n_test - thalf),
    );
    let ood_points = stack_halves(
        sample_gaussian(&mut test_rng, &cfg.mu_neg1, cfg.cov_scale, thalf),
        sample_gaussian(&mut test_rng, &cfg.mu_neg2, cfg.cov_scale, cfg.n_test - thalf),
    );
    let id_test = (id_points.clone(), apply_offset(&id_points, &cfg.rule_offset));
    let ood_test = (ood_points.clone(), apply_offset(&ood_points, &cfg.rule_offset));

    Ok(SyntheticData { x, y, rule_antecedents, rule_consequents, negatives, id_test, ood_test })
}

/// One per-epoch entry of the loss-component log.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossCurvePoint {
    pub epoch: usize,
    pub l_jepa: f64,
    pub l_ebc: f64,
    pub l_anchor: f64,
    pub l_total: f64,
}

/// Train one synthetic model (classic when `with_rules` is false) with
/// full-batch AdamW and the EMA target update.
pub fn train_synthetic_model(
    cfg: &SyntheticConfig,
    data: &SyntheticData,
    with_rules: bool,
) -> Result<(DualEncoderModel, Vec<LossCurvePoint>)> {
    let root = RngStream::new(cfg.seed);
    let mut model = DualEncoderModel::new_unified(3, &root);
    let adam = AdamWConfig { learning_rate: cfg.learning_rate, ..AdamWConfig::default() };
    let mut opt = AdamWState::new(adam, &model.trainable_params());
    let weights = LossWeights::synthetic(cfg.beta, cfg.lambda, cfg.margin);
    let mut curves = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut tape = Tape::new();
        let binding = model.bind_trainable(&mut tape);
        let l_jepa = loss_jepa_data(&mut tape, &model, &binding, &data.x, &data.y)?;
        let l_ebc = if with_rules {
            Some(loss_ebc(
                &mut tape,
                &model,
                &binding,
                &data.rule_antecedents,
                &data.rule_consequents,
                &data.negatives,
                cfg.margin,
                cfg.lambda,
                EbcReduction::Sum,
            )?)
        } else {
            None
        };
        let total = loss_total(&mut tape, l_jepa, l_ebc, None, &weights)?;
        let total_val = tape.scalar(total);
        if !total_val.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        curves.push(LossCurvePoint {
            epoch,
            l_jepa: tape.scalar(l_jepa),
            l_ebc: l_ebc.map_or(0.0, |n| tape.scalar(n)),
            l_anchor: 0.0,
            l_total: total_val,
        });
        tape.backward(total)?;
        model.collect_grads(&tape, &binding);
        let mut params = model.trainable_params_mut();
        opt.step(&mut params)?;
    }
    Ok((model, curves))
}

/// Energy landscape over the grid at z = 0: E(A, A + offset) per cell,
/// row-major with y varying last.
pub fn rasterize_energy(
    model: &DualEncoderModel,
    grid: &GridSpec,
    rule_offset: &[f64],
) -> Result<Tensor> {
    let res = grid.resolution;
    if res < 2 || grid.max <= grid.min {
        return Err(Error::InvalidConfig {
            what: "grid",
            detail: format!("bad bounds/resolution {}..{} x{res}", grid.min, grid.max),
        });
    }
    let step = (grid.max - grid.min) / (res - 1) as f64;
    let mut points = Tensor::zeros(res * res, 3);
    for iy in 0..res {
        for ix in 0..res {
            let r = iy * res + ix;
            points.set(r, 0, grid.min + ix as f64 * step);
            points.set(r, 1, grid.min + iy as f64 * step);
        }
    }
    let targets = apply_offset(&points, rule_offset);
    let energies = model.energy(&points, &targets, ModalityPair::RuleToRule)?;
    Tensor::from_vec(res, res, energies)
}

/// Mean energies of Table-1 form.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyTable {
    pub classic_id: f64,
    pub classic_ood: f64,
    pub rijepa_id: f64,
    pub rijepa_ood: f64,
}

/// Labeled PCA projection of context embeddings from both models.
#[derive(Debug, Clone)]
pub struct PcaProjection {
    /// (model, kind) per projected row; kind is "valid" or "invalid".
    pub labels: Vec<(String, String)>,
    pub coordinates: Tensor,
    pub explained_variance_ratio: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SyntheticReport {
    pub config: SyntheticConfig,
    pub energy: EnergyTable,
    pub landscape_classic: Tensor,
    pub landscape_rijepa: Tensor,
    pub pca: PcaProjection,
    pub curves_classic: Vec<LossCurvePoint>,
    pub curves_rijepa: Vec<LossCurvePoint>,
    pub classic: DualEncoderModel,
    pub rijepa: DualEncoderModel,
    pub data: SyntheticData,
}

/// The full synthetic study: train both models on identical data and seeds,
/// evaluate the ID/OOD energy table, rasterize both landscapes, and fit one
/// universal PCA over the combined context embeddings.
pub fn run_synthetic(cfg: &SyntheticConfig) -> Result<SyntheticReport> {
    let data = generate_synthetic_data(cfg)?;
    let (classic, curves_classic) = train_synthetic_model(cfg, &data, false)?;
    let (rijepa, curves_rijepa) = train_synthetic_model(cfg, &data, true)?;

    let energy = EnergyTable {
        classic_id: classic.mean_energy(&data.id_test.0, &data.id_test.1, ModalityPair::RuleToRule)?,
        classic_ood: classic.mean_energy(&data.ood_test.0, &data.ood_test.1, ModalityPair::RuleToRule)?,
        rijepa_id: rijepa.mean_energy(&data.id_test.0, &data.id_test.1, ModalityPair::RuleToRule)?,
        rijepa_ood: rijepa.mean_energy(&data.ood_test.0, &data.ood_test.1, ModalityPair::RuleToRule)?,
    };

    let landscape_classic = rasterize_energy(&classic, &cfg.grid, &cfg.rule_offset)?;
    let landscape_rijepa = rasterize_energy(&rijepa, &cfg.grid, &cfg.rule_offset)?;

    // one universal projection across both models' embeddings of the valid
    // and invalid antecedents
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<(String, String)> = Vec::new();
    for (name, model) in [("classic", &classic), ("rijepa", &rijepa)] {
        let valid = model.f_c_data.forward(&data.rule_antecedents)?;
        let invalid = model.f_c_data.forward(&data.negatives.antecedents)?;
        for r in 0..valid.rows() {
            rows.push(valid.row(r).to_vec());
            labels.push((name.to_string(), "valid".to_string()));
        }
        for r in 0..invalid.rows() {
            rows.push(invalid.row(r).to_vec());
            labels.push((name.to_string(), "invalid".to_string()));
        }
    }
    let combined = Tensor::from_rows(&rows)?;
    let pca = pca_fit_project(&combined, 2)?;

    Ok(SyntheticReport {
        config: cfg.clone(),
        energy,
        landscape_classic,
        landscape_rijepa,
        pca: PcaProjection {
            labels,
            coordinates: pca.projected,
            explained_variance_ratio: pca.explained_variance_ratio,
        },
        curves_classic,
        curves_rijepa,
        classic,
        rijepa,
        data,
    })
}

// ── clinical experiment ─────────────────────────────────────────────────

/// One generative discovery run with its decoded profiles.
#[derive(Debug, Clone)]
pub struct DiscoveryBundle {
    pub mode: LangevinMode,
    pub query: String,
    pub energies: Vec<f64>,
    pub antecedent: Option<DecodedProfile>,
    pub consequent: Option<DecodedProfile>,
    /// Metropolis–Hastings decision, present for validated proposals.
    pub accepted: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct ClinicalDiscovery {
    pub joint: DiscoveryBundle,
    pub forward: DiscoveryBundle,
    pub abductive: DiscoveryBundle,
    pub marginal: DiscoveryBundle,
}

#[derive(Debug, Clone)]
pub struct ClinicalReport {
    pub config: ClinicalConfig,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub preprocessor: Preprocessor,
    pub vocabulary: Vocabulary,
    pub binning: BinningSpec,
    pub rules: Vec<RuleTuple>,
    pub probe_classic: f64,
    pub probe_rijepa: f64,
    pub zero_shot_accuracy: f64,
    pub zero_shot_details: Vec<(u8, u8, f64, f64)>,
    pub fallback_norm: f64,
    pub poles: (Tensor, Tensor),
    pub curves_classic: Vec<LossCurvePoint>,
    pub curves_rijepa: Vec<LossCurvePoint>,
    pub embeddings_classic: (Tensor, Tensor),
    pub embeddings_rijepa: (Tensor, Tensor),
    pub train_labels: Vec<u8>,
    pub test_labels: Vec<u8>,
    pub discovery: ClinicalDiscovery,
    pub classic: DualEncoderModel,
    pub rijepa: DualEncoderModel,
}

/// Zero-shot logical accuracy is undefined for a model without a rule
/// pathway; the harness refuses to compute it.
pub fn zero_shot_accuracy(
    model: &DualEncoderModel,
    x: &Tensor,
    labels: &[u8],
    poles: &(Tensor, Tensor),
) -> Result<(f64, Vec<(u8, u8, f64, f64)>)> {
    if !model.has_rule_pathway() {
        return Err(Error::Unsupported { what: "zero-shot accuracy of a classic model" });
    }
    let results = zero_shot_classify(model, x, &poles.0, &poles.1)?;
    let mut correct = 0;
    let mut details = Vec::with_capacity(labels.len());
    for (i, (pred, dh, dl)) in results.into_iter().enumerate() {
        if pred == labels[i] {
            correct += 1;
        }
        details.push((labels[i], pred, dh, dl));
    }
    Ok((correct as f64 / labels.len() as f64, details))
}

struct ClinicalStepInputs<'a> {
    x_c: &'a Tensor,
    x_t: &'a Tensor,
    labels: &'a [f64],
    rule_antecedents: Option<&'a Tensor>,
    rule_consequents: Option<&'a Tensor>,
    negatives: Option<&'a NegativeRuleBatch>,
    poles: Option<&'a (Tensor, Tensor)>,
}

fn clinical_step(
    model: &mut DualEncoderModel,
    opt: &mut AdamWState,
    weights: &LossWeights,
    clip: f64,
    tau: f64,
    inputs: &ClinicalStepInputs<'_>,
) -> Result<(f64, f64, f64, f64)> {
    let mut tape = Tape::new();
    let binding = model.bind_trainable(&mut tape);
    let l_jepa = loss_jepa_data(&mut tape, model, &binding, inputs.x_c, inputs.x_t)?;
    let l_ebc = match (inputs.rule_antecedents, inputs.rule_consequents, inputs.negatives) {
        (Some(a), Some(c), Some(n)) => Some(loss_ebc(
            &mut tape,
            model,
            &binding,
            a,
            c,
            n,
            weights.margin,
            weights.lambda,
            EbcReduction::Mean,
        )?),
        _ => None,
    };
    let l_anchor = match inputs.poles {
        Some((high, low)) => {
            Some(loss_anchor(&mut tape, model, &binding, inputs.x_c, inputs.labels, high, low)?)
        }
        None => None,
    };
    let total = loss_total(&mut tape, l_jepa, l_ebc, l_anchor, weights)?;
    let values = (
        tape.scalar(l_jepa),
        l_ebc.map_or(0.0, |n| tape.scalar(n)),
        l_anchor.map_or(0.0, |n| tape.scalar(n)),
        tape.scalar(total),
    );
    tape.backward(total)?;
    model.collect_grads(&tape, &binding);
    let mut params = model.trainable_params_mut();
    clip_grad_norm(&mut params, clip);
    opt.step(&mut params)?;
    model.ema_step(tau);
    Ok(values)
}

/// The full clinical study under the fair-baseline protocol: both models
/// consume identical batches and masks; the rule-informed model additionally
/// receives the EBC and anchor losses.
pub fn run_clinical(cfg: &ClinicalConfig, records: &[PatientRecord]) -> Result<ClinicalReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput { context: "clinical records" });
    }
    for r in records {
        r.validate()?;
    }
    let labels: Vec<u8> = records.iter().map(|r| r.target).collect();
    let root = RngStream::new(cfg.seed);

    let mut split_rng = root.substream("split");
    let (train_idx, test_idx) = stratified_split(&labels, cfg.test_fraction, &mut split_rng);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::EmptyInput { context: "train/test split" });
    }
    let train_records: Vec<&PatientRecord> = train_idx.iter().map(|&i| &records[i]).collect();
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();

    // rules are mined on the training split only
    let binning = BinningSpec::clinical_default();
    let train_rows: Vec<RawRow> = train_records.iter().map(|r| r.to_raw_row()).collect();
    let (transactions, vocabulary) = discretize(&train_rows, &binning)?;
    let itemsets =
        fp_growth(&transactions, cfg.min_support, Some(cfg.max_antecedent_len + 1))?;
    let filter = ConsequentFilter::for_feature(&vocabulary, "target_risk");
    let rules = generate_rules(&itemsets, cfg.min_confidence, &filter, &vocabulary)?;
    if rules.is_empty() {
        return Err(Error::EmptyInput { context: "mined rule base" });
    }

    let preprocessor = Preprocessor::fit(&train_records)?;
    let all_x = preprocessor.transform(records)?;
    let x_train = all_x.select_rows(&train_idx);
    let x_test = all_x.select_rows(&test_idx);

    let mut classic = DualEncoderModel::new_dual(CLINICAL_INPUT_DIM, None, &root);
    let mut rijepa = DualEncoderModel::new_dual(CLINICAL_INPUT_DIM, Some(vocabulary.len()), &root);
    let adam = AdamWConfig { learning_rate: cfg.learning_rate, ..AdamWConfig::default() };
    let mut opt_classic = AdamWState::new(adam, &classic.trainable_params());
    let mut opt_rijepa = AdamWState::new(adam, &rijepa.trainable_params());
    let classic_weights = LossWeights::clinical(0.0, 0.0, cfg.margin);
    let rijepa_weights = LossWeights::clinical(cfg.alpha, cfg.beta, cfg.margin);

    let mut batch_rng = root.substream("batch");
    let mut mask_rng = root.substream("mask");
    let mut rule_rng = root.substream("rules");

    let mut curves_classic = Vec::with_capacity(cfg.epochs);
    let mut curves_rijepa = Vec::with_capacity(cfg.epochs);
    let n_train = train_idx.len();

    for epoch in 0..cfg.epochs {
        // anchor poles refresh once per epoch from the current rule target
        // encoder (stop-gradient inside the loss)
        let poles = rijepa.risk_poles(&vocabulary)?;

        let mut order: Vec<usize> = (0..n_train).collect();
        batch_rng.shuffle(&mut order);
        let mut rule_order: Vec<usize> = (0..rules.len()).collect();
        rule_rng.shuffle(&mut rule_order);
        let mut rule_cursor = 0usize;

        let mut sums_classic = [0.0f64; 4];
        let mut sums_rijepa = [0.0f64; 4];
        let mut n_batches = 0usize;

        for batch in order.chunks(cfg.batch_size) {
            let x_t = x_train.select_rows(batch);
            let x_c = mask_context(&x_t, cfg.p_mask, &mut mask_rng);
            let y_batch: Vec<f64> = batch.iter().map(|&i| train_labels[i] as f64).collect();

            let rule_batch: Vec<RuleTuple> = (0..cfg.batch_size.min(rules.len()))
                .map(|k| rules[rule_order[(rule_cursor + k) % rules.len()]].clone())
                .collect();
            rule_cursor = (rule_cursor + rule_batch.len()) % rules.len();
            let (rule_a, rule_c) = encode_rule_batch(&rule_batch, &vocabulary)?;
            let negatives = make_negatives_clinical(&rule_batch, &vocabulary)?;

            let c_vals = clinical_step(
                &mut classic,
                &mut opt_classic,
                &classic_weights,
                cfg.clip_norm,
                cfg.tau,
                &ClinicalStepInputs {
                    x_c: &x_c,
                    x_t: &x_t,
                    labels: &y_batch,
                    rule_antecedents: None,
                    rule_consequents: None,
                    negatives: None,
                    poles: None,
                },
            )?;
            let r_vals = clinical_step(
                &mut rijepa,
                &mut opt_rijepa,
                &rijepa_weights,
                cfg.clip_norm,
                cfg.tau,
                &ClinicalStepInputs {
                    x_c: &x_c,
                    x_t: &x_t,
                    labels: &y_batch,
                    rule_antecedents: Some(&rule_a),
                    rule_consequents: Some(&rule_c),
                    negatives: Some(&negatives),
                    poles: Some(&poles),
                },
            )?;
            if !c_vals.3.is_finite() || !r_vals.3.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            for (s, v) in sums_classic.iter_mut().zip([c_vals.0, c_vals.1, c_vals.2, c_vals.3]) {
                *s += v;
            }
            for (s, v) in sums_rijepa.iter_mut().zip([r_vals.0, r_vals.1, r_vals.2, r_vals.3]) {
                *s += v;
            }
            n_batches += 1;
        }
        let nb = n_batches.max(1) as f64;
        curves_classic.push(LossCurvePoint {
            epoch,
            l_jepa: sums_classic[0] / nb,
            l_ebc: sums_classic[1] / nb,
            l_anchor: sums_classic[2] / nb,
            l_total: sums_classic[3] / nb,
        });
        curves_rijepa.push(LossCurvePoint {
            epoch,
            l_jepa: sums_rijepa[0] / nb,
            l_ebc: sums_rijepa[1] / nb,
            l_anchor: sums_rijepa[2] / nb,
            l_total: sums_rijepa[3] / nb,
        });
    }

    // frozen-model evaluation
    let emb_train_classic = classic.f_c_data.forward(&x_train)?;
    let emb_test_classic = classic.f_c_data.forward(&x_test)?;
    let emb_train_rijepa = rijepa.f_c_data.forward(&x_train)?;
    let emb_test_rijepa = rijepa.f_c_data.forward(&x_test)?;

    let probe_classic =
        linear_probe(&emb_train_classic, &train_labels, &emb_test_classic, &test_labels)?.accuracy;
    let probe_rijepa =
        linear_probe(&emb_train_rijepa, &train_labels, &emb_test_rijepa, &test_labels)?.accuracy;

    let poles = rijepa.risk_poles(&vocabulary)?;
    let (zero_shot, zero_shot_details) =
        zero_shot_accuracy(&rijepa, &x_test, &test_labels, &poles)?;

    let fallback_norm =
        rijepa.forward_rule(&Tensor::zeros(1, vocabulary.len()))?.l2_norm();

    let discovery = clinical_discovery_suite(
        cfg,
        &rijepa,
        &vocabulary,
        &x_test,
        &test_idx,
        records,
        &root,
    )?;

    Ok(ClinicalReport {
        config: cfg.clone(),
        train_indices: train_idx,
        test_indices: test_idx,
        preprocessor,
        vocabulary,
        binning,
        rules,
        probe_classic,
        probe_rijepa,
        zero_shot_accuracy: zero_shot,
        zero_shot_details,
        fallback_norm,
        poles,
        curves_classic,
        curves_rijepa,
        embeddings_classic: (emb_train_classic, emb_test_classic),
        embeddings_rijepa: (emb_train_rijepa, emb_test_rijepa),
        train_labels,
        test_labels,
        discovery,
        classic,
        rijepa,
    })
}

/// Classic-only clinical run (the `--skip-rules` path): same split,
/// preprocessing, batches, and masks as the paired run, no mining and no
/// rule losses.
pub struct ClassicReport {
    pub config: ClinicalConfig,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub preprocessor: Preprocessor,
    pub probe_accuracy: f64,
    pub curves: Vec<LossCurvePoint>,
    pub embeddings: (Tensor, Tensor),
    pub train_labels: Vec<u8>,
    pub test_labels: Vec<u8>,
    pub model: DualEncoderModel,
}

pub fn run_clinical_classic_only(
    cfg: &ClinicalConfig,
    records: &[PatientRecord],
) -> Result<ClassicReport> {
    if records.is_empty() {
        return Err(Error::EmptyInput { context: "clinical records" });
    }
    for r in records {
        r.validate()?;
    }
    let labels: Vec<u8> = records.iter().map(|r| r.target).collect();
    let root = RngStream::new(cfg.seed);
    let mut split_rng = root.substream("split");
    let (train_idx, test_idx) = stratified_split(&labels, cfg.test_fraction, &mut split_rng);
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::EmptyInput { context: "train/test split" });
    }
    let train_records: Vec<&PatientRecord> = train_idx.iter().map(|&i| &records[i]).collect();
    let train_labels: Vec<u8> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<u8> = test_idx.iter().map(|&i| labels[i]).collect();
    let preprocessor = Preprocessor::fit(&train_records)?;
    let all_x = preprocessor.transform(records)?;
    let x_train = all_x.select_rows(&train_idx);
    let x_test = all_x.select_rows(&test_idx);

    let mut classic = DualEncoderModel::new_dual(CLINICAL_INPUT_DIM, None, &root);
    let adam = AdamWConfig { learning_rate: cfg.learning_rate, ..AdamWConfig::default() };
    let mut opt = AdamWState::new(adam, &classic.trainable_params());
    let weights = LossWeights::clinical(0.0, 0.0, cfg.margin);
    let mut batch_rng = root.substream("batch");
    let mut mask_rng = root.substream("mask");
    let mut curves = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_idx.len()).collect();
        batch_rng.shuffle(&mut order);
        let mut sums = [0.0f64; 4];
        let mut n_batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let x_t = x_train.select_rows(batch);
            let x_c = mask_context(&x_t, cfg.p_mask, &mut mask_rng);
            let y_batch: Vec<f64> = batch.iter().map(|&i| train_labels[i] as f64).collect();
            let vals = clinical_step(
                &mut classic,
                &mut opt,
                &weights,
                cfg.clip_norm,
                cfg.tau,
                &ClinicalStepInputs {
                    x_c: &x_c,
                    x_t: &x_t,
                    labels: &y_batch,
                    rule_antecedents: None,
                    rule_consequents: None,
                    negatives: None,
                    poles: None,
                },
            )?;
            if !vals.3.is_finite() {
                return Err(Error::Diverged { epoch });
            }
            for (s, v) in sums.iter_mut().zip([vals.0, vals.1, vals.2, vals.3]) {
                *s += v;
            }
            n_batches += 1;
        }
        let nb = n_batches.max(1) as f64;
        curves.push(LossCurvePoint {
            epoch,
            l_jepa: sums[0] / nb,
            l_ebc: 0.0,
            l_anchor: 0.0,
            l_total: sums[3] / nb,
        });
    }
    let emb_train = classic.f_c_data.forward(&x_train)?;
    let emb_test = classic.f_c_data.forward(&x_test)?;
    let probe_accuracy = linear_probe(&emb_train, &train_labels, &emb_test, &test_labels)?.accuracy;
    Ok(ClassicReport {
        config: cfg.clone(),
        train_indices: train_idx,
        test_indices: test_idx,
        preprocessor,
        probe_accuracy,
        curves,
        embeddings: (emb_train, emb_test),
        train_labels,
        test_labels,
        model: classic,
    })
}

/// Token dictionaries for both rule-encoder sides of a trained model.
pub fn rule_dictionaries(
    model: &DualEncoderModel,
    vocab: &Vocabulary,
) -> Result<(TokenDictionary, TokenDictionary)> {
    let context_encoder: &Mlp = match (&model.mode, &model.rules) {
        (crate::model::ModelMode::Unified, _) => &model.f_c_data,
        (_, Some(r)) => &r.context,
        _ => return Err(Error::Unsupported { what: "dictionaries on a classic model" }),
    };
    let target_encoder: &Mlp = match (&model.mode, &model.rules) {
        (crate::model::ModelMode::Unified, _) => &model.f_t_data,
        (_, Some(r)) => &r.target,
        _ => return Err(Error::Unsupported { what: "dictionaries on a classic model" }),
    };
    let antecedent = TokenDictionary::build(vocab, |x| context_encoder.forward(x))?;
    let consequent = TokenDictionary::build(vocab, |x| target_encoder.forward(x))?;
    Ok((antecedent, consequent))
}

/// Pick the most "young, high max heart rate" test patient for the marginal
/// translation demo.
fn marginal_demo_patient(test_idx: &[usize], records: &[PatientRecord]) -> usize {
    let mut best = test_idx[0];
    let mut best_score = f64::NEG_INFINITY;
    for &i in test_idx {
        let score = records[i].thalach - records[i].age;
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    best
}

fn clinical_discovery_suite(
    cfg: &ClinicalConfig,
    rijepa: &DualEncoderModel,
    vocabulary: &Vocabulary,
    x_test: &Tensor,
    test_idx: &[usize],
    records: &[PatientRecord],
    root: &RngStream,
) -> Result<ClinicalDiscovery> {
    let (ante_dict, cons_dict) = rule_dictionaries(rijepa, vocabulary)?;
    let latent = rijepa.latent_dim();
    let k = cfg.discovery_k;
    let lcfg = |mode| LangevinConfig::new(mode);

    // joint: free fall from N(0, I) in both blocks
    let mut rng = root.substream("discover/joint");
    let mut z0_c = Tensor::zeros(1, latent);
    let mut z0_t = Tensor::zeros(1, latent);
    for v in z0_c.data_mut() {
        *v = rng.normal();
    }
    for v in z0_t.data_mut() {
        *v = rng.normal();
    }
    let joint_run =
        langevin_joint(rijepa, z0_c, z0_t, &lcfg(LangevinMode::Joint), &mut rng)?;
    let joint = DiscoveryBundle {
        mode: LangevinMode::Joint,
        query: "unconditional".to_string(),
        energies: joint_run.energies.clone(),
        antecedent: Some(decode_latent(&joint_run.z_c, &ante_dict, k)?),
        consequent: Some(decode_latent(&joint_run.z_t, &cons_dict, k)?),
        accepted: None,
    };

    // forward: condition on Senior age
    let mut rng = root.substream("discover/forward");
    let condition = encode_tokens(&["age_group=Senior"], vocabulary)?;
    let z_c = rijepa.rules.as_ref().map_or_else(
        || rijepa.f_c_data.forward(&condition),
        |r| r.context.forward(&condition),
    )?;
    let mut z0_t = Tensor::zeros(1, latent);
    for v in z0_t.data_mut() {
        *v = rng.normal();
    }
    let forward_run =
        langevin_forward(rijepa, z_c, z0_t, &lcfg(LangevinMode::Forward), &mut rng)?;
    let forward = DiscoveryBundle {
        mode: LangevinMode::Forward,
        query: "IF age_group=Senior THEN ...".to_string(),
        energies: forward_run.energies.clone(),
        antecedent: None,
        consequent: Some(decode_latent(&forward_run.z_t, &cons_dict, k)?),
        accepted: None,
    };

    // abductive: fix the high-risk pole as the outcome
    let mut rng = root.substream("discover/abductive");
    let outcome = encode_tokens(&["target_risk=1.0"], vocabulary)?;
    let z_t = rijepa.encode_rule_target(&outcome)?;
    let mut z0_c = Tensor::zeros(1, latent);
    for v in z0_c.data_mut() {
        *v = rng.normal();
    }
    let abductive_run =
        langevin_abductive(rijepa, z0_c, z_t, &lcfg(LangevinMode::Abductive), &mut rng)?;
    let abductive = DiscoveryBundle {
        mode: LangevinMode::Abductive,
        query: "target_risk=1.0 BECAUSE ...".to_string(),
        energies: abductive_run.energies.clone(),
        antecedent: Some(decode_latent(&abductive_run.z_c, &ante_dict, k)?),
        consequent: None,
        accepted: None,
    };

    // marginal-predictive: translate a real unseen patient
    let patient = marginal_demo_patient(test_idx, records);
    let pos = test_idx.iter().position(|&i| i == patient).unwrap_or(0);
    let x_row = x_test.row_tensor(pos);
    let translated = translate_patient(rijepa, &x_row, &cons_dict, k)?;
    let marginal = DiscoveryBundle {
        mode: LangevinMode::Marginal,
        query: format!(
            "patient age={} thalach={}",
            records[patient].age, records[patient].thalach
        ),
        energies: Vec::new(),
        antecedent: None,
        consequent: Some(translated),
        accepted: None,
    };

    Ok(ClinicalDiscovery { joint, forward, abductive, marginal })
}
