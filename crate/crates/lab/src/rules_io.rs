//! Rule export and import: the canonical one-rule-per-line text form and a
//! JSON mirror of the full rule tuples.

use crate::error::{LabError, Result};
use crate::report::sig6;
use rijepa_core::rulemine::{Item, RuleStats, RuleTuple};
use std::fs;
use std::path::Path;

/// `IF a=v AND b=w THEN target_risk=r | sup=s conf=c lift=l`
pub fn rule_to_line(rule: &RuleTuple) -> String {
    let antecedent = if rule.features.is_empty() {
        "TRUE".to_string()
    } else {
        rule.antecedent_tokens().join(" AND ")
    };
    format!(
        "IF {antecedent} THEN {} | sup={} conf={} lift={}",
        rule.consequent_token(),
        sig6(rule.stats.support),
        sig6(rule.stats.confidence),
        sig6(rule.stats.lift),
    )
}

pub fn parse_rule_line(line: &str) -> Option<RuleTuple> {
    let rest = line.strip_prefix("IF ")?;
    let (antecedent, rest) = rest.split_once(" THEN ")?;
    let (consequent, stats) = rest.split_once(" | ")?;
    let mut support = 0.0;
    let mut confidence = 0.0;
    let mut lift = 0.0;
    for part in stats.split_whitespace() {
        if let Some(v) = part.strip_prefix("sup=") {
            support = v.parse().ok()?;
        } else if let Some(v) = part.strip_prefix("conf=") {
            confidence = v.parse().ok()?;
        } else if let Some(v) = part.strip_prefix("lift=") {
            lift = v.parse().ok()?;
        }
    }
    let items: Vec<Item> = if antecedent == "TRUE" {
        Vec::new()
    } else {
        antecedent.split(" AND ").map(Item::from_token).collect()
    };
    Some(RuleTuple::conjunction(
        &items,
        Item::from_token(consequent),
        RuleStats { support, confidence, lift },
    ))
}

/// Canonical text export, one rule per line (already ordered by the miner).
pub fn write_rules_text(path: &Path, rules: &[RuleTuple]) -> Result<()> {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&rule_to_line(rule));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| LabError::io(path, e))
}

/// JSON mirror of the full tuples.
pub fn write_rules_json(path: &Path, rules: &[RuleTuple]) -> Result<()> {
    let text = serde_json::to_string_pretty(rules)?;
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

pub fn read_rules_json(path: &Path) -> Result<Vec<RuleTuple>> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_rules_text(path: &Path) -> Result<Vec<RuleTuple>> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    let mut rules = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rule = parse_rule_line(line).ok_or_else(|| LabError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: "not a canonical rule line".into(),
        })?;
        rules.push(rule);
    }
    Ok(rules)
}
