//! File formats: numeric CSV matrices (17 significant digits, LF endings),
//! label files (one 1-based label per line), and trial-record tables.

use std::fs;
use std::path::Path;

use speclust::gmm::LabelVector;
use speclust::harness::{Algorithm, TrialRecord};
use speclust::linalg::{format_g17, Matrix};

use crate::CliError;

pub fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<(), CliError> {
    fs::write(path, m.to_csv_string()).map_err(|e| io_err(path, e))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Matrix::from_csv_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_labels(path: &Path, labels: &LabelVector) -> Result<(), CliError> {
    let mut out = String::new();
    for l in labels.iter() {
        out.push_str(&l.to_string());
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_labels(path: &Path) -> Result<LabelVector, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut labels = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let l: u32 = line
            .parse()
            .map_err(|e| CliError::Config(format!("{} line {}: {e}", path.display(), ln + 1)))?;
        labels.push(l);
    }
    Ok(LabelVector(labels))
}

pub const RECORDS_HEADER: &str = "delta,trial,algorithm,loss,objective,elapsed_ms,seed";

/// Serializes records with the canonical header. Timing is a measurement,
/// not part of the deterministic sweep output, so the elapsed_ms column is
/// written as zero; files are byte-identical across runs and thread counts.
pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            format_g17(r.delta),
            r.trial_index,
            r.algorithm.name(),
            format_g17(r.loss),
            format_g17(r.objective),
            format_g17(0.0),
            r.seed_used
        ));
    }
    out
}

pub fn records_from_csv(text: &str) -> Result<Vec<TrialRecord>, CliError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Config("empty records file".into()))?;
    if header.trim() != RECORDS_HEADER {
        return Err(CliError::Config(format!(
            "bad records header: expected '{RECORDS_HEADER}', got '{header}'"
        )));
    }
    let mut records = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(CliError::Config(format!(
                "records line {}: expected 7 fields, got {}",
                ln + 2,
                parts.len()
            )));
        }
        let parse_f = |s: &str, what: &str| -> Result<f64, CliError> {
            s.parse()
                .map_err(|e| CliError::Config(format!("records line {}: bad {what}: {e}", ln + 2)))
        };
        records.push(TrialRecord {
            delta: parse_f(parts[0], "delta")?,
            trial_index: parts[1]
                .parse()
                .map_err(|e| CliError::Config(format!("records line {}: bad trial: {e}", ln + 2)))?,
            algorithm: Algorithm::parse(parts[2])
                .map_err(|e| CliError::Config(format!("records line {}: {e}", ln + 2)))?,
            loss: parse_f(parts[3], "loss")?,
            objective: parse_f(parts[4], "objective")?,
            elapsed_ms: parse_f(parts[5], "elapsed_ms")?,
            seed_used: parts[6]
                .parse()
                .map_err(|e| CliError::Config(format!("records line {}: bad seed: {e}", ln + 2)))?,
        });
    }
    Ok(records)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("json encode: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Internal(format!("io-error: {}: {e}", path.display()))
}
