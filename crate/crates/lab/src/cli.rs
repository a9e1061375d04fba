//! The `rijepa` command-line interface: reproducible synthetic and clinical
//! runs, standalone rule mining, and generative discovery over trained
//! checkpoints.

use crate::checkpoint::{
    load_manifest, load_model, manifest_path, save_manifest, save_model, ModelManifest,
};
use crate::config::{load_with_defaults, resolve_seed, write_resolved};
use crate::dataset::{load_cleveland, write_transactions};
use crate::error::{LabError, Result};
use crate::report;
use crate::rules_io;
use clap::{Parser, Subcommand, ValueEnum};
use rijepa_core::discover::{
    decode_latent, discover_marginal, langevin_abductive, langevin_forward, langevin_joint,
    DecodedPair, LangevinConfig, LangevinMode, RuleBaseValidator, Validator,
};
use rijepa_core::experiments::{
    run_clinical, run_clinical_classic_only, run_synthetic, ClinicalConfig, DiscoveryBundle,
    SyntheticConfig,
};
use rijepa_core::model::encode_tokens;
use rijepa_core::rng::RngStream;
use rijepa_core::rulemine::{
    discretize, fp_growth, generate_rules, BinningSpec, ConsequentFilter, RawRow,
};
use rijepa_core::tensor::Tensor;
use serde_json::json;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "rijepa", version, about = "Rule-informed joint-embedding predictive architectures: training, mining, and generative rule discovery")]
pub struct Cli {
    /// Master seed (falls back to RIJEPA_SEED, then the config default).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for run artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON config file overlaid onto the defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print per-stage progress.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run the synthetic energy-landscape study (both models).
    Synthetic {
        /// EBC weight β for the rule-informed model.
        #[arg(long)]
        beta: Option<f64>,
        /// Contrastive margin m.
        #[arg(long)]
        margin: Option<f64>,
    },
    /// Run the clinical study: mining, paired training, full evaluation.
    Clinical {
        /// Path to the processed heart-disease CSV.
        #[arg(long)]
        dataset: PathBuf,
        /// EBC weight α.
        #[arg(long)]
        alpha: Option<f64>,
        /// Anchor weight β.
        #[arg(long)]
        beta: Option<f64>,
        /// Contrastive margin m.
        #[arg(long)]
        margin: Option<f64>,
        /// Train the classic baseline only; skip mining and rule losses.
        #[arg(long)]
        skip_rules: bool,
        /// Emit embeddings_<model>.csv exports.
        #[arg(long)]
        export_embeddings: bool,
    },
    /// Mine association rules from a dataset and export them.
    Mine {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        min_support: Option<f64>,
        #[arg(long)]
        min_confidence: Option<f64>,
    },
    /// Generative discovery over a trained checkpoint.
    Discover {
        /// Checkpoint written by a clinical run (manifest sits next to it).
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum)]
        mode: DiscoverMode,
        /// Independent chains (joint mode) or proposals (marginal mode).
        #[arg(long, default_value_t = 1)]
        chains: usize,
        /// Comma-separated antecedent tokens fixing the condition.
        #[arg(long)]
        condition: Option<String>,
        /// Comma-separated consequent tokens fixing the outcome.
        #[arg(long)]
        outcome: Option<String>,
        /// Dataset used to build the latent bank (marginal mode).
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Mined rule base (rules.json) backing the MH validator.
        #[arg(long)]
        rules: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DiscoverMode {
    Joint,
    Forward,
    Abductive,
    Marginal,
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Synthetic { beta, margin } => cmd_synthetic(&cli, *beta, *margin),
        Command::Clinical { dataset, alpha, beta, margin, skip_rules, export_embeddings } => {
            cmd_clinical(&cli, dataset, *alpha, *beta, *margin, *skip_rules, *export_embeddings)
        }
        Command::Mine { dataset, min_support, min_confidence } => {
            cmd_mine(&cli, dataset, *min_support, *min_confidence)
        }
        Command::Discover { checkpoint, mode, chains, condition, outcome, dataset, rules } => {
            cmd_discover(
                &cli,
                checkpoint,
                *mode,
                *chains,
                condition.as_deref(),
                outcome.as_deref(),
                dataset.as_deref(),
                rules.as_deref(),
            )
        }
    }
}

fn ensure_out_dir(cli: &Cli, default: &str) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    fs::create_dir_all(&dir).map_err(|e| LabError::io(&dir, e))?;
    Ok(dir)
}

fn progress(cli: &Cli, message: &str) {
    if cli.verbose > 0 {
        eprintln!("[rijepa] {message}");
    }
}

// ── synthetic ───────────────────────────────────────────────────────────

fn cmd_synthetic(cli: &Cli, beta: Option<f64>, margin: Option<f64>) -> Result<()> {
    let mut cfg: SyntheticConfig =
        load_with_defaults(&SyntheticConfig::default(), cli.config.as_deref())?;
    cfg.seed = resolve_seed(cli.seed, cfg.seed);
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(m) = margin {
        cfg.margin = m;
    }
    let out = ensure_out_dir(cli, "runs/synthetic")?;
    write_resolved(&out, &cfg)?;

    progress(cli, "training classic and rule-informed models");
    let result = run_synthetic(&cfg)?;

    report::write_energy_table(&out.join("energy_table.csv"), &result)?;
    report::write_landscape(&out.join("landscape_classic.csv"), &cfg.grid, &result.landscape_classic)?;
    report::write_landscape(&out.join("landscape_rijepa.csv"), &cfg.grid, &result.landscape_rijepa)?;
    report::write_pca_projection(&out.join("pca_projection.csv"), &result)?;
    report::write_loss_curves(
        &out.join("loss_curves.csv"),
        &[("classic", &result.curves_classic), ("rijepa", &result.curves_rijepa)],
    )?;
    report::write_json(&out.join("metrics.json"), &report::synthetic_metrics_json(&result))?;

    let hp = serde_json::to_value(&cfg)?;
    for (name, model) in [("classic", &result.classic), ("rijepa", &result.rijepa)] {
        let ckpt = out.join(format!("checkpoint_{name}.rjpa"));
        save_model(&ckpt, model, cfg.seed, hp.clone())?;
        save_manifest(
            &ckpt,
            &ModelManifest {
                mode: model.mode,
                data_in_dim: model.data_in_dim(),
                latent_dim: model.latent_dim(),
                vocab_size: 0,
                vocabulary: Vec::new(),
                binning: None,
                pole_high: None,
                pole_low: None,
                preprocessor: None,
                seed: cfg.seed,
            },
        )?;
    }
    progress(cli, &format!("artifacts written to {}", out.display()));
    Ok(())
}

// ── clinical ────────────────────────────────────────────────────────────

#[allow(clippy::too_many_arguments)]
fn cmd_clinical(
    cli: &Cli,
    dataset: &Path,
    alpha: Option<f64>,
    beta: Option<f64>,
    margin: Option<f64>,
    skip_rules: bool,
    export_embeddings: bool,
) -> Result<()> {
    let mut cfg: ClinicalConfig =
        load_with_defaults(&ClinicalConfig::default(), cli.config.as_deref())?;
    cfg.seed = resolve_seed(cli.seed, cfg.seed);
    if let Some(a) = alpha {
        cfg.alpha = a;
    }
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(m) = margin {
        cfg.margin = m;
    }
    let out = ensure_out_dir(cli, "runs/clinical")?;
    write_resolved(&out, &cfg)?;

    let (records, stats) = load_cleveland(dataset)?;
    progress(
        cli,
        &format!(
            "loaded {} records ({} rows, {} dropped for missing values)",
            records.len(),
            stats.total_rows,
            stats.dropped_missing
        ),
    );
    let hp = serde_json::to_value(&cfg)?;

    if skip_rules {
        progress(cli, "training classic baseline only (--skip-rules)");
        let result = run_clinical_classic_only(&cfg, &records)?;
        report::write_json(
            &out.join("metrics.json"),
            &json!({
                "probe": { "classic": result.probe_accuracy },
                "zero_shot": { "classic": serde_json::Value::Null },
                "train_size": result.train_indices.len(),
                "test_size": result.test_indices.len(),
            }),
        )?;
        report::write_loss_curves(&out.join("loss_curves.csv"), &[("classic", &result.curves)])?;
        if export_embeddings {
            report::write_embeddings(
                &out.join("embeddings_classic.csv"),
                (&result.embeddings.0, &result.train_labels, &result.train_indices),
                (&result.embeddings.1, &result.test_labels, &result.test_indices),
            )?;
        }
        let ckpt = out.join("checkpoint_classic.rjpa");
        save_model(&ckpt, &result.model, cfg.seed, hp)?;
        save_manifest(
            &ckpt,
            &ModelManifest {
                mode: result.model.mode,
                data_in_dim: result.model.data_in_dim(),
                latent_dim: result.model.latent_dim(),
                vocab_size: 0,
                vocabulary: Vec::new(),
                binning: None,
                pole_high: None,
                pole_low: None,
                preprocessor: Some(result.preprocessor.clone()),
                seed: cfg.seed,
            },
        )?;
        progress(cli, &format!("artifacts written to {}", out.display()));
        return Ok(());
    }

    progress(cli, "mining rules and training both models");
    let result = run_clinical(&cfg, &records)?;
    progress(
        cli,
        &format!(
            "mined {} rules; probe classic {:.4} / rijepa {:.4}; zero-shot {:.4}",
            result.rules.len(),
            result.probe_classic,
            result.probe_rijepa,
            result.zero_shot_accuracy
        ),
    );

    report::write_json(&out.join("metrics.json"), &report::clinical_metrics_json(&result))?;
    report::write_loss_curves(
        &out.join("loss_curves.csv"),
        &[("classic", &result.curves_classic), ("rijepa", &result.curves_rijepa)],
    )?;
    rules_io::write_rules_text(&out.join("rules.txt"), &result.rules)?;
    rules_io::write_rules_json(&out.join("rules.json"), &result.rules)?;
    if export_embeddings {
        report::write_embeddings(
            &out.join("embeddings_classic.csv"),
            (&result.embeddings_classic.0, &result.train_labels, &result.train_indices),
            (&result.embeddings_classic.1, &result.test_labels, &result.test_indices),
        )?;
        report::write_embeddings(
            &out.join("embeddings_rijepa.csv"),
            (&result.embeddings_rijepa.0, &result.train_labels, &result.train_indices),
            (&result.embeddings_rijepa.1, &result.test_labels, &result.test_indices),
        )?;
    }

    // the four generative discovery reports
    let discover_cfg = json!({ "eta": 0.1, "temperature": 1e-4, "iterations": 100 });
    for bundle in [
        &result.discovery.joint,
        &result.discovery.forward,
        &result.discovery.abductive,
        &result.discovery.marginal,
    ] {
        let mode = format!("{:?}", bundle.mode).to_lowercase();
        report::write_json(
            &out.join(format!("discovery_{mode}.json")),
            &report::discovery_json(bundle, &discover_cfg),
        )?;
        if !bundle.energies.is_empty() {
            report::write_trajectory(
                &out.join(format!("discovery_{mode}_trajectory.csv")),
                &bundle.energies,
            )?;
        }
    }

    let poles = &result.poles;
    for (name, model) in [("classic", &result.classic), ("rijepa", &result.rijepa)] {
        let ckpt = out.join(format!("checkpoint_{name}.rjpa"));
        save_model(&ckpt, model, cfg.seed, hp.clone())?;
        let has_rules = model.has_rule_pathway();
        save_manifest(
            &ckpt,
            &ModelManifest {
                mode: model.mode,
                data_in_dim: model.data_in_dim(),
                latent_dim: model.latent_dim(),
                vocab_size: if has_rules { result.vocabulary.len() } else { 0 },
                vocabulary: if has_rules {
                    result.vocabulary.tokens().to_vec()
                } else {
                    Vec::new()
                },
                binning: has_rules.then(|| result.binning.clone()),
                pole_high: has_rules.then(|| poles.0.data().to_vec()),
                pole_low: has_rules.then(|| poles.1.data().to_vec()),
                preprocessor: Some(result.preprocessor.clone()),
                seed: cfg.seed,
            },
        )?;
    }
    progress(cli, &format!("artifacts written to {}", out.display()));
    Ok(())
}

// ── mine ────────────────────────────────────────────────────────────────

fn cmd_mine(
    cli: &Cli,
    dataset: &Path,
    min_support: Option<f64>,
    min_confidence: Option<f64>,
) -> Result<()> {
    let mut cfg: ClinicalConfig =
        load_with_defaults(&ClinicalConfig::default(), cli.config.as_deref())?;
    cfg.seed = resolve_seed(cli.seed, cfg.seed);
    if let Some(s) = min_support {
        cfg.min_support = s;
    }
    if let Some(c) = min_confidence {
        cfg.min_confidence = c;
    }
    let out = ensure_out_dir(cli, "runs/mine")?;
    write_resolved(&out, &cfg)?;

    let (records, _) = load_cleveland(dataset)?;
    let binning = BinningSpec::clinical_default();
    let rows: Vec<RawRow> = records.iter().map(|r| r.to_raw_row()).collect();
    let (transactions, vocab) = discretize(&rows, &binning)?;
    let itemsets = fp_growth(&transactions, cfg.min_support, Some(cfg.max_antecedent_len + 1))?;
    let filter = ConsequentFilter::for_feature(&vocab, "target_risk");
    let rules = generate_rules(&itemsets, cfg.min_confidence, &filter, &vocab)?;
    progress(
        cli,
        &format!("{} transactions, {} frequent itemsets, {} rules", transactions.len(), itemsets.len(), rules.len()),
    );

    rules_io::write_rules_text(&out.join("rules.txt"), &rules)?;
    rules_io::write_rules_json(&out.join("rules.json"), &rules)?;
    write_transactions(&out.join("transactions.csv"), &transactions, &vocab)?;
    report::write_json(
        &out.join("metrics.json"),
        &json!({
            "rule_count": rules.len(),
            "itemset_count": itemsets.len(),
            "transaction_count": transactions.len(),
            "vocabulary_size": vocab.len(),
        }),
    )?;
    Ok(())
}

// ── discover ────────────────────────────────────────────────────────────

fn parse_tokens(spec: Option<&str>) -> Vec<String> {
    spec.map(|s| {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::to_string)
            .collect()
    })
    .unwrap_or_default()
}

struct ConstantValidator;
impl Validator for ConstantValidator {
    fn score(&self, _: &DecodedPair) -> f64 {
        1.0
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_discover(
    cli: &Cli,
    checkpoint: &Path,
    mode: DiscoverMode,
    chains: usize,
    condition: Option<&str>,
    outcome: Option<&str>,
    dataset: Option<&Path>,
    rules_path: Option<&Path>,
) -> Result<()> {
    let (model, seed, _hp) = load_model(checkpoint)?;
    let manifest = load_manifest(checkpoint)?;
    if manifest.vocab_size == 0 {
        return Err(LabError::Config(format!(
            "checkpoint {} carries no rule vocabulary; discovery needs a rule-informed clinical model (manifest at {})",
            checkpoint.display(),
            manifest_path(checkpoint).display(),
        )));
    }
    let vocab = manifest.vocabulary();
    let (ante_dict, cons_dict) = rijepa_core::experiments::rule_dictionaries(&model, &vocab)?;
    let out = ensure_out_dir(cli, "runs/discover")?;
    let run_seed = resolve_seed(cli.seed, seed);
    let latent = model.latent_dim();
    let k = 8usize;
    let root = RngStream::new(run_seed);
    let cfg_json = json!({
        "mode": format!("{mode:?}").to_lowercase(),
        "checkpoint": checkpoint.display().to_string(),
        "eta": 0.1,
        "temperature": 1e-4,
        "iterations": 100,
        "seed": run_seed,
        "chains": chains,
        "condition": condition,
        "outcome": outcome,
        "decode_k": k,
    });
    report::write_json(&out.join("resolved_config.json"), &cfg_json)?;

    let gaussian_row = |rng: &mut RngStream| {
        let mut z = Tensor::zeros(1, latent);
        for v in z.data_mut() {
            *v = rng.normal();
        }
        z
    };

    let mut bundles: Vec<DiscoveryBundle> = Vec::new();
    match mode {
        DiscoverMode::Joint => {
            let lcfg = LangevinConfig::new(LangevinMode::Joint);
            for chain in 0..chains.max(1) {
                let mut rng = root.substream(&format!("discover/joint/{chain}"));
                let z0_c = gaussian_row(&mut rng);
                let z0_t = gaussian_row(&mut rng);
                let run = langevin_joint(&model, z0_c, z0_t, &lcfg, &mut rng)?;
                bundles.push(DiscoveryBundle {
                    mode: LangevinMode::Joint,
                    query: format!("unconditional chain {chain}"),
                    energies: run.energies.clone(),
                    antecedent: Some(decode_latent(&run.z_c, &ante_dict, k)?),
                    consequent: Some(decode_latent(&run.z_t, &cons_dict, k)?),
                    accepted: None,
                });
            }
        }
        DiscoverMode::Forward => {
            let tokens = parse_tokens(condition);
            if tokens.is_empty() {
                return Err(LabError::Config(
                    "forward mode needs --condition \"tok1,tok2,...\"".into(),
                ));
            }
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let multi_hot = encode_tokens(&refs, &vocab)?;
            let z_c = model
                .rules
                .as_ref()
                .expect("vocab_size > 0 implies rule encoders")
                .context
                .forward(&multi_hot)?;
            let lcfg = LangevinConfig::new(LangevinMode::Forward);
            let mut rng = root.substream("discover/forward");
            let z0_t = gaussian_row(&mut rng);
            let run = langevin_forward(&model, z_c, z0_t, &lcfg, &mut rng)?;
            bundles.push(DiscoveryBundle {
                mode: LangevinMode::Forward,
                query: format!("IF {} THEN ...", tokens.join(" AND ")),
                energies: run.energies.clone(),
                antecedent: None,
                consequent: Some(decode_latent(&run.z_t, &cons_dict, k)?),
                accepted: None,
            });
        }
        DiscoverMode::Abductive => {
            let tokens = parse_tokens(outcome);
            if tokens.is_empty() {
                return Err(LabError::Config(
                    "abductive mode needs --outcome \"token\"".into(),
                ));
            }
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let hot = encode_tokens(&refs, &vocab)?;
            let z_t = model.encode_rule_target(&hot)?;
            let lcfg = LangevinConfig::new(LangevinMode::Abductive);
            let mut rng = root.substream("discover/abductive");
            let z0_c = gaussian_row(&mut rng);
            let run = langevin_abductive(&model, z0_c, z_t, &lcfg, &mut rng)?;
            bundles.push(DiscoveryBundle {
                mode: LangevinMode::Abductive,
                query: format!("{} BECAUSE ...", tokens.join(" AND ")),
                energies: run.energies.clone(),
                antecedent: Some(decode_latent(&run.z_c, &ante_dict, k)?),
                consequent: None,
                accepted: None,
            });
        }
        DiscoverMode::Marginal => {
            let Some(dataset) = dataset else {
                return Err(LabError::Config(
                    "marginal mode needs --dataset to build the context latent bank".into(),
                ));
            };
            let Some(pre) = manifest.preprocessor.as_ref() else {
                return Err(LabError::Config(
                    "manifest carries no preprocessing statistics; re-train to regenerate it".into(),
                ));
            };
            let (records, _) = load_cleveland(dataset)?;
            let x = pre.transform(&records)?;
            let bank = model.f_c_data.forward(&x)?;
            let mined = match rules_path {
                Some(p) => Some(rules_io::read_rules_json(p)?),
                None => None,
            };
            let validator: Box<dyn Validator> = match &mined {
                Some(rules) => Box::new(RuleBaseValidator::new(rules)),
                None => Box::new(ConstantValidator),
            };
            let ante = ante_dict.clone();
            let cons = cons_dict.clone();
            let decode = move |z_c: &Tensor, z_t: &Tensor| {
                let a = decode_latent(z_c, &ante, k)?;
                let c = decode_latent(z_t, &cons, k)?;
                Ok(DecodedPair::Tokens {
                    antecedent: a.profile.into_iter().map(|(t, _)| t).collect(),
                    consequent: c.profile.into_iter().map(|(t, _)| t).collect(),
                })
            };
            let lcfg = LangevinConfig::new(LangevinMode::Marginal);
            let mut rng = root.substream("discover/marginal");
            let runs = discover_marginal(
                &model,
                &bank,
                &lcfg,
                0.5,
                validator.as_ref(),
                &decode,
                &mut rng,
                chains.max(1),
            )?;
            for (i, run) in runs.iter().enumerate() {
                bundles.push(DiscoveryBundle {
                    mode: LangevinMode::Marginal,
                    query: format!("proposal {i}"),
                    energies: run.energies.clone(),
                    antecedent: Some(decode_latent(&run.z_c, &ante_dict, k)?),
                    consequent: Some(decode_latent(&run.z_t, &cons_dict, k)?),
                    accepted: run.accepted,
                });
            }
        }
    }

    let mode_name = format!("{mode:?}").to_lowercase();
    let entries: Vec<serde_json::Value> =
        bundles.iter().map(|b| report::discovery_json(b, &cfg_json)).collect();
    report::write_json(
        &out.join(format!("discovery_{mode_name}.json")),
        &json!({ "mode": mode_name, "results": entries }),
    )?;
    for (i, bundle) in bundles.iter().enumerate() {
        if !bundle.energies.is_empty() {
            report::write_trajectory(
                &out.join(format!("discovery_{mode_name}_trajectory_{i}.csv")),
                &bundle.energies,
            )?;
        }
    }
    progress(cli, &format!("{} discovery entries written to {}", bundles.len(), out.display()));
    Ok(())
}
