//! Run configuration: JSON config files are partial overlays onto the full
//! defaults, unknown keys are rejected, and every run writes the resolved
//! (fully materialized) snapshot into its output directory.

use crate::error::{LabError, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use std::fs;
use std::path::Path;

fn merge_checked(base: &mut Value, overlay: Value, path: &str) -> Result<()> {
    match (base, overlay) {
        (Value::Object(base_map), Value::Object(overlay_map)) => {
            for (key, value) in overlay_map {
                let child_path =
                    if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                match base_map.get_mut(&key) {
                    Some(slot) => merge_checked(slot, value, &child_path)?,
                    None => {
                        return Err(LabError::Config(format!(
                            "unknown config key '{child_path}'"
                        )))
                    }
                }
            }
            Ok(())
        }
        (slot, value) => {
            *slot = value;
            Ok(())
        }
    }
}

/// Defaults overlaid with an optional JSON config file.
pub fn load_with_defaults<T: Serialize + DeserializeOwned>(
    defaults: &T,
    config_path: Option<&Path>,
) -> Result<T> {
    let mut base = serde_json::to_value(defaults)?;
    if let Some(path) = config_path {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let overlay: Value = serde_json::from_str(&text)
            .map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        merge_checked(&mut base, overlay, "")?;
    }
    Ok(serde_json::from_value(base)?)
}

/// The resolved-config snapshot every run leaves in its output directory.
pub fn write_resolved<T: Serialize>(out_dir: &Path, config: &T) -> Result<()> {
    let path = out_dir.join("resolved_config.json");
    let text = format!("{}\n", serde_json::to_string_pretty(config)?);
    fs::write(&path, text).map_err(|e| LabError::io(&path, e))
}

/// Seed precedence: CLI flag, then RIJEPA_SEED, then the config value.
pub fn resolve_seed(flag: Option<u64>, config_seed: u64) -> u64 {
    if let Some(seed) = flag {
        return seed;
    }
    if let Ok(env_seed) = std::env::var("RIJEPA_SEED") {
        if let Ok(parsed) = env_seed.parse::<u64>() {
            return parsed;
        }
    }
    config_seed
}
