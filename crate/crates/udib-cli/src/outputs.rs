use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use udib::select::InformationProfile;
use udib::CooccurrenceMatrix;

use crate::error::CliError;

/// Writes via a temporary file plus rename so readers never observe a
/// partially written output.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp: PathBuf = path.with_extension("tmp");
    fs::write(&tmp, contents)
        .and_then(|()| fs::rename(&tmp, path))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

fn assert_finite_json(value: &Value, context: &str) -> Result<(), CliError> {
    match value {
        Value::Number(n) => {
            if n.as_f64().is_some_and(|f| !f.is_finite()) {
                return Err(CliError::Internal(format!("non-finite number in {context}")));
            }
            Ok(())
        }
        Value::Array(items) => items.iter().try_for_each(|v| assert_finite_json(v, context)),
        Value::Object(map) => map.values().try_for_each(|v| assert_finite_json(v, context)),
        _ => Ok(()),
    }
}

/// Serializes to pretty JSON after checking every number is finite.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let tree = serde_json::to_value(value)
        .map_err(|e| CliError::Internal(format!("cannot serialize {name}: {e}")))?;
    assert_finite_json(&tree, name)?;
    let mut text = serde_json::to_string_pretty(&tree)
        .map_err(|e| CliError::Internal(format!("cannot serialize {name}: {e}")))?;
    text.push('\n');
    write_atomic(&dir.join(name), &text)
}

fn push_float(line: &mut String, value: f64, name: &str) -> Result<(), CliError> {
    if !value.is_finite() {
        return Err(CliError::Internal(format!("non-finite number in {name}")));
    }
    line.push_str(&value.to_string());
    Ok(())
}

const PROFILE_HEADER: &str = "seed,tau,n_clusters,entropy_bits,normalized_info,distance_term,regularization_term\n";

/// One CSV across all seeds, one row per grid point, LF line endings.
pub fn write_profiles_csv(dir: &Path, name: &str, profiles: &[InformationProfile]) -> Result<(), CliError> {
    let mut out = String::from(PROFILE_HEADER);
    for profile in profiles {
        for p in &profile.points {
            out.push_str(&profile.seed.to_string());
            out.push(',');
            push_float(&mut out, p.tau, name)?;
            out.push(',');
            out.push_str(&p.n_clusters.to_string());
            out.push(',');
            push_float(&mut out, p.entropy_bits, name)?;
            out.push(',');
            push_float(&mut out, p.normalized_info, name)?;
            out.push(',');
            push_float(&mut out, p.distance_term, name)?;
            out.push(',');
            push_float(&mut out, p.regularization_term, name)?;
            out.push('\n');
        }
    }
    write_atomic(&dir.join(name), &out)
}

fn matrix_csv(rows: &[Vec<f64>], name: &str) -> Result<String, CliError> {
    let mut out = String::new();
    for row in rows {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(CliError::Internal(format!("non-finite number in {name}")));
            }
            if j > 0 {
                out.push(',');
            }
            out.push_str(&format!("{v:.6}"));
        }
        out.push('\n');
    }
    Ok(out)
}

/// The joint matrix at six decimal places, plus a row-normalized variant
/// for heatmap rendering.
pub fn write_cooccurrence(dir: &Path, matrix: &CooccurrenceMatrix) -> Result<(), CliError> {
    write_atomic(
        &dir.join("cooccurrence.csv"),
        &matrix_csv(&matrix.joint, "cooccurrence.csv")?,
    )?;
    let normalized: Vec<Vec<f64>> = matrix
        .joint
        .iter()
        .map(|row| {
            let sum: f64 = row.iter().sum();
            if sum > 0.0 {
                row.iter().map(|v| v / sum).collect()
            } else {
                vec![0.0; row.len()]
            }
        })
        .collect();
    write_atomic(
        &dir.join("cooccurrence_row_normalized.csv"),
        &matrix_csv(&normalized, "cooccurrence_row_normalized.csv")?,
    )
}
