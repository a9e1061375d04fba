//! Report artifacts: the CSV and JSON files every run leaves behind.

use crate::error::{LabError, Result};
use rijepa_core::discover::DecodedProfile;
use rijepa_core::experiments::{
    ClinicalReport, DiscoveryBundle, GridSpec, LossCurvePoint, SyntheticReport,
};
use rijepa_core::tensor::Tensor;
use serde_json::json;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Round to six significant digits (the report-wide convention).
pub fn sig6_value(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let digits = 5 - x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits);
    (x * factor).round() / factor
}

/// Render with six significant digits.
pub fn sig6(x: f64) -> String {
    format!("{}", sig6_value(x))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| LabError::io(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_file(path, &format!("{}\n", serde_json::to_string_pretty(value)?))
}

/// `energy_table.csv`: model,id_energy,ood_energy.
pub fn write_energy_table(path: &Path, report: &SyntheticReport) -> Result<()> {
    let e = report.energy;
    let mut s = String::from("model,id_energy,ood_energy\n");
    let _ = writeln!(s, "classic,{},{}", sig6(e.classic_id), sig6(e.classic_ood));
    let _ = writeln!(s, "rijepa,{},{}", sig6(e.rijepa_id), sig6(e.rijepa_ood));
    write_file(path, &s)
}

/// `landscape_<model>.csv`: x,y,energy heightfield rows.
pub fn write_landscape(path: &Path, grid: &GridSpec, values: &Tensor) -> Result<()> {
    let res = grid.resolution;
    let step = (grid.max - grid.min) / (res - 1) as f64;
    let mut s = String::from("x,y,energy\n");
    for iy in 0..res {
        for ix in 0..res {
            let _ = writeln!(
                s,
                "{},{},{}",
                sig6(grid.min + ix as f64 * step),
                sig6(grid.min + iy as f64 * step),
                sig6(values.get(iy, ix)),
            );
        }
    }
    write_file(path, &s)
}

/// `pca_projection.csv`: model,kind,pc1,pc2.
pub fn write_pca_projection(path: &Path, report: &SyntheticReport) -> Result<()> {
    let mut s = String::from("model,kind,pc1,pc2\n");
    for (i, (model, kind)) in report.pca.labels.iter().enumerate() {
        let _ = writeln!(
            s,
            "{model},{kind},{},{}",
            sig6(report.pca.coordinates.get(i, 0)),
            sig6(report.pca.coordinates.get(i, 1)),
        );
    }
    write_file(path, &s)
}

/// `loss_curves.csv`: model,epoch,l_jepa,l_ebc,l_anchor,l_total.
pub fn write_loss_curves(path: &Path, curves: &[(&str, &[LossCurvePoint])]) -> Result<()> {
    let mut s = String::from("model,epoch,l_jepa,l_ebc,l_anchor,l_total\n");
    for (model, points) in curves {
        for p in *points {
            let _ = writeln!(
                s,
                "{model},{},{},{},{},{}",
                p.epoch,
                sig6(p.l_jepa),
                sig6(p.l_ebc),
                sig6(p.l_anchor),
                sig6(p.l_total),
            );
        }
    }
    write_file(path, &s)
}

/// `embeddings_<model>.csv`: split,index,label,z0..z{d-1} — the export feeds
/// external projection tools.
pub fn write_embeddings(
    path: &Path,
    train: (&Tensor, &[u8], &[usize]),
    test: (&Tensor, &[u8], &[usize]),
) -> Result<()> {
    let d = train.0.cols();
    let mut s = String::from("split,index,label");
    for k in 0..d {
        let _ = write!(s, ",z{k}");
    }
    s.push('\n');
    for (split, (emb, labels, indices)) in [("train", train), ("test", test)] {
        for r in 0..emb.rows() {
            let _ = write!(s, "{split},{},{}", indices[r], labels[r]);
            for k in 0..d {
                let _ = write!(s, ",{}", sig6(emb.get(r, k)));
            }
            s.push('\n');
        }
    }
    write_file(path, &s)
}

fn profile_json(profile: &DecodedProfile) -> serde_json::Value {
    let entries = |items: &[(String, f64)]| {
        items
            .iter()
            .map(|(t, d)| json!({"token": t, "distance": sig6_value(*d)}))
            .collect::<Vec<_>>()
    };
    json!({
        "raw": entries(&profile.raw),
        "profile": entries(&profile.profile),
    })
}

/// `discovery_<mode>.json`: config echo, energy trajectory, decoded tokens.
pub fn discovery_json(bundle: &DiscoveryBundle, config: &serde_json::Value) -> serde_json::Value {
    json!({
        "mode": format!("{:?}", bundle.mode).to_lowercase(),
        "query": bundle.query,
        "config": config,
        "energy_trajectory": bundle.energies.iter().map(|e| sig6_value(*e)).collect::<Vec<_>>(),
        "antecedent": bundle.antecedent.as_ref().map(profile_json),
        "consequent": bundle.consequent.as_ref().map(profile_json),
        "accepted": bundle.accepted,
    })
}

/// `<name>_trajectory.csv`: step,energy.
pub fn write_trajectory(path: &Path, energies: &[f64]) -> Result<()> {
    let mut s = String::from("step,energy\n");
    for (i, e) in energies.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", sig6(*e));
    }
    write_file(path, &s)
}

/// `metrics.json` for the clinical run. Zero-shot accuracy for the classic
/// model is structurally absent (`null`), mirroring its undefined status.
pub fn clinical_metrics_json(report: &ClinicalReport) -> serde_json::Value {
    json!({
        "probe": {
            "classic": sig6_value(report.probe_classic),
            "rijepa": sig6_value(report.probe_rijepa),
        },
        "zero_shot": {
            "classic": serde_json::Value::Null,
            "rijepa": sig6_value(report.zero_shot_accuracy),
        },
        "fallback_norm": sig6_value(report.fallback_norm),
        "rule_count": report.rules.len(),
        "train_size": report.train_indices.len(),
        "test_size": report.test_indices.len(),
    })
}

/// `metrics.json` for the synthetic run.
pub fn synthetic_metrics_json(report: &SyntheticReport) -> serde_json::Value {
    let e = report.energy;
    json!({
        "classic": {
            "id_energy": sig6_value(e.classic_id),
            "ood_energy": sig6_value(e.classic_ood),
        },
        "rijepa": {
            "id_energy": sig6_value(e.rijepa_id),
            "ood_energy": sig6_value(e.rijepa_ood),
        },
        "rijepa_ood_id_ratio": sig6_value(e.rijepa_ood / e.rijepa_id.max(1e-300)),
        "pca_explained_variance": report
            .pca
            .explained_variance_ratio
            .iter()
            .map(|v| sig6_value(*v))
            .collect::<Vec<_>>(),
    })
}
