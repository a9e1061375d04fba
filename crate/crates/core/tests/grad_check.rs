//! Central finite-difference verification of every analytic gradient: each
//! layer primitive and each training loss, on random small shapes.
//!
//! The finite-difference quotient is the independent oracle here; it never
//! touches the tape's backward path.

use rijepa_core::model::{DualEncoderModel, ModelBinding, ModelMode};
use rijepa_core::nn::EncoderSpec;
use rijepa_core::objectives::{
    loss_anchor, loss_ebc, loss_jepa_data, loss_rbjepa, loss_total, EbcReduction, LossWeights,
    NegativeProvenance, NegativeRuleBatch,
};
use rijepa_core::rng::RngStream;
use rijepa_core::tape::{NodeId, Tape};
use rijepa_core::tensor::Tensor;

const H: f64 = 1e-4;
const TOL: f64 = 1e-4;

// The denominator floor makes tiny components an absolute check at the
// 1e-6 scale of the oracle's own h² truncation error.
fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-2)
}

fn random_tensor(rng: &mut RngStream, rows: usize, cols: usize) -> Tensor {
    let mut t = Tensor::zeros(rows, cols);
    for v in t.data_mut() {
        *v = rng.uniform(-2.0, 2.0);
    }
    t
}

fn random_hot(rng: &mut RngStream, rows: usize, cols: usize, ones: usize) -> Tensor {
    let mut t = Tensor::zeros(rows, cols);
    for r in 0..rows {
        for _ in 0..ones {
            let c = rng.index(cols);
            t.set(r, c, 1.0);
        }
    }
    t
}

// ── layer primitives ────────────────────────────────────────────────────

/// FD-check leaf gradients of a tape program built by `build`.
fn check_leaf_grads(
    label: &str,
    tensors: &mut [&mut Tensor],
    build: &dyn Fn(&mut Tape, &[&mut Tensor]) -> (NodeId, Vec<NodeId>),
) {
    let (analytic, n_coords): (Vec<Vec<f64>>, Vec<usize>) = {
        let mut tape = Tape::new();
        let (loss, leaves) = build(&mut tape, tensors);
        tape.backward(loss).unwrap();
        let grads: Vec<Vec<f64>> =
            leaves.iter().map(|&id| tape.grad_tensor(id).data().to_vec()).collect();
        let coords = grads.iter().map(|g| g.len()).collect();
        (grads, coords)
    };
    for ti in 0..tensors.len() {
        for k in 0..n_coords[ti] {
            let orig = tensors[ti].data()[k];
            tensors[ti].data_mut()[k] = orig + H;
            let up = {
                let mut tape = Tape::new();
                let (loss, _) = build(&mut tape, tensors);
                tape.scalar(loss)
            };
            tensors[ti].data_mut()[k] = orig - H;
            let down = {
                let mut tape = Tape::new();
                let (loss, _) = build(&mut tape, tensors);
                tape.scalar(loss)
            };
            tensors[ti].data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * H);
            let err = rel_err(analytic[ti][k], fd);
            assert!(
                err < TOL,
                "{label}: tensor {ti} coord {k}: analytic {} vs fd {fd} (rel {err})",
                analytic[ti][k]
            );
        }
    }
}

#[test]
fn linear_layer_gradients_match_finite_differences() {
    let mut rng = RngStream::new(2024);
    for instance in 0..20 {
        let rows = 1 + rng.index(4);
        let in_dim = 1 + rng.index(8);
        let out_dim = 1 + rng.index(8);
        let mut x = random_tensor(&mut rng, rows, in_dim);
        let mut w = random_tensor(&mut rng, out_dim, in_dim);
        let mut b = random_tensor(&mut rng, 1, out_dim);
        let build = |tape: &mut Tape, ts: &[&mut Tensor]| {
            let xn = tape.leaf(ts[0]);
            let wn = tape.leaf(ts[1]);
            let bn = tape.leaf(ts[2]);
            let y = tape.linear(xn, wn, bn).unwrap();
            let sq = tape.row_sum_sq(y);
            (tape.sum_all(sq), vec![xn, wn, bn])
        };
        check_leaf_grads(&format!("linear[{instance}]"), &mut [&mut x, &mut w, &mut b], &build);
    }
}

#[test]
fn gelu_gradients_match_finite_differences() {
    let mut rng = RngStream::new(77);
    for instance in 0..20 {
        let rows = 1 + rng.index(8);
        let cols = 1 + rng.index(8);
        let mut x = random_tensor(&mut rng, rows, cols);
        let build = |tape: &mut Tape, ts: &[&mut Tensor]| {
            let xn = tape.leaf(ts[0]);
            let y = tape.gelu(xn);
            let sq = tape.row_sum_sq(y);
            (tape.sum_all(sq), vec![xn])
        };
        check_leaf_grads(&format!("gelu[{instance}]"), &mut [&mut x], &build);
    }
}

#[test]
fn layer_norm_gradients_match_finite_differences() {
    let mut rng = RngStream::new(501);
    for instance in 0..20 {
        let rows = 1 + rng.index(4);
        let cols = 2 + rng.index(7);
        let mut x = random_tensor(&mut rng, rows, cols);
        let mut gain = random_tensor(&mut rng, 1, cols);
        let mut shift = random_tensor(&mut rng, 1, cols);
        let build = |tape: &mut Tape, ts: &[&mut Tensor]| {
            let xn = tape.leaf(ts[0]);
            let gn = tape.leaf(ts[1]);
            let sn = tape.leaf(ts[2]);
            let y = tape.layer_norm(xn, gn, sn, 1e-5).unwrap();
            let sq = tape.row_sum_sq(y);
            (tape.sum_all(sq), vec![xn, gn, sn])
        };
        check_leaf_grads(
            &format!("layer_norm[{instance}]"),
            &mut [&mut x, &mut gain, &mut shift],
            &build,
        );
    }
}

#[test]
fn hinge_gradients_match_finite_differences_off_the_kink() {
    let mut rng = RngStream::new(909);
    for instance in 0..20 {
        let n = 2 + rng.index(6);
        let mut e = random_tensor(&mut rng, n, 1);
        // keep samples away from the margin kink so the FD quotient is valid
        for v in e.data_mut() {
            *v = v.abs() * 3.0 + if *v > 0.0 { 1.2 } else { 0.1 };
            if (*v - 1.0).abs() < 0.05 {
                *v += 0.1;
            }
        }
        let build = |tape: &mut Tape, ts: &[&mut Tensor]| {
            let en = tape.leaf(ts[0]);
            let h = tape.hinge(en, 1.0);
            (tape.sum_all(h), vec![en])
        };
        check_leaf_grads(&format!("hinge[{instance}]"), &mut [&mut e], &build);
    }
}

// ── loss-level checks over whole models ─────────────────────────────────

fn tiny_unified(seed: u64) -> DualEncoderModel {
    let enc = EncoderSpec { in_dim: 3, hidden_dim: 5, latent_dim: 4, layer_norm: false };
    let g = EncoderSpec { in_dim: 4, hidden_dim: 6, latent_dim: 4, layer_norm: false };
    DualEncoderModel::with_specs(ModelMode::Unified, enc, None, g, &RngStream::new(seed))
}

fn tiny_dual(seed: u64, vocab: usize) -> DualEncoderModel {
    let enc = EncoderSpec { in_dim: 4, hidden_dim: 6, latent_dim: 4, layer_norm: true };
    let rule = EncoderSpec { in_dim: vocab, hidden_dim: 5, latent_dim: 4, layer_norm: true };
    let g = EncoderSpec { in_dim: 4, hidden_dim: 6, latent_dim: 4, layer_norm: true };
    DualEncoderModel::with_specs(ModelMode::Dual, enc, Some(rule), g, &RngStream::new(seed))
}

type ModelLossBuilder<'a> = dyn Fn(&mut Tape, &DualEncoderModel) -> (NodeId, ModelBinding) + 'a;

/// FD-check the trainable-parameter gradients of a model-level loss.
fn check_model_grads(label: &str, model: &mut DualEncoderModel, build: &ModelLossBuilder) {
    let analytic: Vec<Vec<f64>> = {
        let mut tape = Tape::new();
        let (loss, binding) = build(&mut tape, model);
        tape.backward(loss).unwrap();
        let mut probe = model.clone();
        probe.collect_grads(&tape, &binding);
        probe
            .trainable_params()
            .iter()
            .map(|p| p.grad().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; p.len()]))
            .collect()
    };
    let n_tensors = analytic.len();
    for ti in 0..n_tensors {
        for k in 0..analytic[ti].len() {
            let orig = model.trainable_params_mut()[ti].data()[k];
            model.trainable_params_mut()[ti].data_mut()[k] = orig + H;
            let up = {
                let mut tape = Tape::new();
                let (loss, _) = build(&mut tape, model);
                tape.scalar(loss)
            };
            model.trainable_params_mut()[ti].data_mut()[k] = orig - H;
            let down = {
                let mut tape = Tape::new();
                let (loss, _) = build(&mut tape, model);
                tape.scalar(loss)
            };
            model.trainable_params_mut()[ti].data_mut()[k] = orig;
            let fd = (up - down) / (2.0 * H);
            let err = rel_err(analytic[ti][k], fd);
            assert!(
                err < TOL,
                "{label}: param {ti} coord {k}: analytic {} vs fd {fd} (rel {err})",
                analytic[ti][k]
            );
        }
    }
}

#[test]
fn rule_pair_loss_gradients_match_finite_differences() {
    let mut rng = RngStream::new(41);
    for instance in 0..10 {
        // dual mode: both rule encoders receive gradients
        let mut model = tiny_dual(100 + instance, 6);
        let n = 1 + rng.index(3);
        let ante = random_hot(&mut rng, n, 6, 2);
        let cons = random_hot(&mut rng, n, 6, 1);
        let weights: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 2.0)).collect();
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let pred = m.taped_rule_prediction(tape, &binding, &ante).unwrap();
            let target = m.taped_rule_target(tape, &binding, &cons).unwrap();
            (loss_rbjepa(tape, pred, target, &weights).unwrap(), binding)
        };
        check_model_grads(&format!("rbjepa_dual[{instance}]"), &mut model, &build);
    }
    // unified mode: the target side is a stop-gradient leaf
    for instance in 0..10 {
        let mut model = tiny_unified(300 + instance);
        let n = 1 + rng.index(3);
        let ante = random_tensor(&mut rng, n, 3);
        let cons = random_tensor(&mut rng, n, 3);
        let weights: Vec<f64> = (0..n).map(|_| rng.uniform(0.0, 2.0)).collect();
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let pred = m.taped_rule_prediction(tape, &binding, &ante).unwrap();
            let target = m.taped_rule_target(tape, &binding, &cons).unwrap();
            (loss_rbjepa(tape, pred, target, &weights).unwrap(), binding)
        };
        check_model_grads(&format!("rbjepa_unified[{instance}]"), &mut model, &build);
    }
}

#[test]
fn data_loss_gradients_match_finite_differences() {
    let mut rng = RngStream::new(43);
    for instance in 0..20 {
        let mut model = tiny_dual(500 + instance, 5);
        let n = 1 + rng.index(4);
        let x_c = random_tensor(&mut rng, n, 4);
        let x_t = random_tensor(&mut rng, n, 4);
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            (loss_jepa_data(tape, m, &binding, &x_c, &x_t).unwrap(), binding)
        };
        check_model_grads(&format!("jepa_data[{instance}]"), &mut model, &build);
    }
}

#[test]
fn ebc_loss_gradients_match_finite_differences() {
    let mut rng = RngStream::new(47);
    // synthetic form: sums over point pairs, unified encoders
    for instance in 0..10 {
        let mut model = tiny_unified(700 + instance);
        let nv = 1 + rng.index(3);
        let nn = 1 + rng.index(3);
        let valid_a = random_tensor(&mut rng, nv, 3);
        let valid_c = random_tensor(&mut rng, nv, 3);
        let negatives = NegativeRuleBatch {
            antecedents: random_tensor(&mut rng, nn, 3),
            consequents: random_tensor(&mut rng, nn, 3),
            provenance: NegativeProvenance::OodGaussian,
        };
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let loss = loss_ebc(
                tape, m, &binding, &valid_a, &valid_c, &negatives, 5.0, 1.0, EbcReduction::Sum,
            )
            .unwrap();
            (loss, binding)
        };
        check_model_grads(&format!("ebc_sum[{instance}]"), &mut model, &build);
    }
    // clinical form: means over encoded rule vectors, dual encoders
    for instance in 0..10 {
        let mut model = tiny_dual(900 + instance, 6);
        let nv = 1 + rng.index(3);
        let valid_a = random_hot(&mut rng, nv, 6, 2);
        let valid_c = random_hot(&mut rng, nv, 6, 1);
        let negatives = NegativeRuleBatch {
            antecedents: valid_a.clone(),
            consequents: random_hot(&mut rng, nv, 6, 1),
            provenance: NegativeProvenance::FlippedConsequent,
        };
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let loss = loss_ebc(
                tape, m, &binding, &valid_a, &valid_c, &negatives, 2.0, 1.0, EbcReduction::Mean,
            )
            .unwrap();
            (loss, binding)
        };
        check_model_grads(&format!("ebc_mean[{instance}]"), &mut model, &build);
    }
}

#[test]
fn anchor_loss_gradients_match_finite_differences() {
    let mut rng = RngStream::new(53);
    for instance in 0..20 {
        let mut model = tiny_dual(1100 + instance, 5);
        let n = 1 + rng.index(4);
        let x_c = random_tensor(&mut rng, n, 4);
        let labels: Vec<f64> = (0..n).map(|_| (rng.next_u64() & 1) as f64).collect();
        // poles are per-epoch constants; freeze them across FD evaluations
        let pole_high = random_tensor(&mut rng, 1, 4);
        let pole_low = random_tensor(&mut rng, 1, 4);
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let loss =
                loss_anchor(tape, m, &binding, &x_c, &labels, &pole_high, &pole_low).unwrap();
            (loss, binding)
        };
        check_model_grads(&format!("anchor[{instance}]"), &mut model, &build);
    }
}

#[test]
fn total_loss_gradients_match_finite_differences() {
    let mut rng = RngStream::new(59);
    for instance in 0..5 {
        let mut model = tiny_dual(1300 + instance, 6);
        let n = 2;
        let x_c = random_tensor(&mut rng, n, 4);
        let x_t = random_tensor(&mut rng, n, 4);
        let labels: Vec<f64> = (0..n).map(|_| (rng.next_u64() & 1) as f64).collect();
        let pole_high = random_tensor(&mut rng, 1, 4);
        let pole_low = random_tensor(&mut rng, 1, 4);
        let valid_a = random_hot(&mut rng, 2, 6, 2);
        let valid_c = random_hot(&mut rng, 2, 6, 1);
        let negatives = NegativeRuleBatch {
            antecedents: valid_a.clone(),
            consequents: random_hot(&mut rng, 2, 6, 1),
            provenance: NegativeProvenance::FlippedConsequent,
        };
        let weights = LossWeights::clinical(2.0, 5.0, 2.0);
        let build = move |tape: &mut Tape, m: &DualEncoderModel| {
            let binding = m.bind_trainable(tape);
            let l_jepa = loss_jepa_data(tape, m, &binding, &x_c, &x_t).unwrap();
            let l_ebc = loss_ebc(
                tape, m, &binding, &valid_a, &valid_c, &negatives, weights.margin, weights.lambda,
                EbcReduction::Mean,
            )
            .unwrap();
            let l_anchor =
                loss_anchor(tape, m, &binding, &x_c, &labels, &pole_high, &pole_low).unwrap();
            let total = loss_total(tape, l_jepa, Some(l_ebc), Some(l_anchor), &weights).unwrap();
            (total, binding)
        };
        check_model_grads(&format!("total[{instance}]"), &mut model, &build);
    }
}
