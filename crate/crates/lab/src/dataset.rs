//! Heart-disease corpus loading: the 14-column comma-separated format with
//! `?` marking missing values, plus the transaction dump used for mining
//! debugging.

use crate::error::{LabError, Result};
use rijepa_core::experiments::PatientRecord;
use rijepa_core::rulemine::{Transaction, Vocabulary};
use std::fs;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadStats {
    pub total_rows: usize,
    pub dropped_missing: usize,
}

/// Parse the processed corpus: rows with any `?` are dropped, `num` is
/// binarized (num > 0 ↦ 1), every kept record is domain-validated.
pub fn load_cleveland(path: &Path) -> Result<(Vec<PatientRecord>, LoadStats)> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    parse_cleveland(&text, path)
}

pub fn parse_cleveland(text: &str, path: &Path) -> Result<(Vec<PatientRecord>, LoadStats)> {
    let mut records = Vec::new();
    let mut total_rows = 0usize;
    let mut dropped = 0usize;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        total_rows += 1;
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 14 {
            return Err(LabError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 14 comma-separated columns, found {}", fields.len()),
            });
        }
        if fields.iter().any(|f| *f == "?") {
            dropped += 1;
            continue;
        }
        let mut values = [0.0f64; 14];
        for (k, field) in fields.iter().enumerate() {
            values[k] = field.parse::<f64>().map_err(|_| LabError::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("column {} is not a number: '{field}'", k + 1),
            })?;
        }
        let record = PatientRecord {
            age: values[0],
            sex: values[1],
            cp: values[2],
            trestbps: values[3],
            chol: values[4],
            fbs: values[5],
            restecg: values[6],
            thalach: values[7],
            exang: values[8],
            oldpeak: values[9],
            slope: values[10],
            ca: values[11],
            thal: values[12],
            // angiographic status ≥ 50% narrowing ↦ 1
            target: u8::from(values[13] > 0.0),
        };
        record.validate().map_err(|e| LabError::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok((records, LoadStats { total_rows, dropped_missing: dropped }))
}

/// Debug dump: one transaction per line as comma-separated tokens.
pub fn write_transactions(
    path: &Path,
    transactions: &[Transaction],
    vocab: &Vocabulary,
) -> Result<()> {
    let mut out = fs::File::create(path).map_err(|e| LabError::io(path, e))?;
    for t in transactions {
        let tokens: Vec<&str> = t.items().iter().map(|&i| vocab.token(i)).collect();
        writeln!(out, "{}", tokens.join(",")).map_err(|e| LabError::io(path, e))?;
    }
    Ok(())
}
