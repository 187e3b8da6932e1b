//! Parsing of vector-valued flags and model files.

use std::fs;
use std::path::Path;

use spcrit::model::load_model;
use spcrit::{Field, Measure, Model};

use crate::error::CliError;

pub fn read_model(path: &Path) -> Result<Model, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(load_model(&text)?)
}

/// Inline comma-separated numbers, or a path to a one-column CSV file
/// (an optional non-numeric header row is skipped).
pub fn parse_vector(flag: &str, raw: &str, len: usize) -> Result<Vec<f64>, CliError> {
    let values = match parse_inline(raw) {
        Some(v) => v,
        None => read_column(flag, Path::new(raw))?,
    };
    if values.len() != len {
        return Err(CliError::Input(format!(
            "--{flag} has {} entries, model has {len} states",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(CliError::Input(format!("--{flag}[{i}] is not finite")));
    }
    Ok(values)
}

fn parse_inline(raw: &str) -> Option<Vec<f64>> {
    raw.split(',').map(|s| s.trim().parse::<f64>().ok()).collect()
}

fn read_column(flag: &str, path: &Path) -> Result<Vec<f64>, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!(
            "--{flag}: {raw:?} is neither a list of numbers nor a readable file",
            raw = path.display()
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("--{flag}: {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Input(format!("--{flag}: {}: {e}", path.display())))?;
        let Some(cell) = record.get(0).filter(|c| !c.is_empty()) else {
            continue;
        };
        match cell.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if line == 0 => {}
            Err(_) => {
                return Err(CliError::Input(format!(
                    "--{flag}: {} line {}: {cell:?} is not a number",
                    path.display(),
                    line + 1
                )))
            }
        }
    }
    Ok(out)
}

pub fn parse_measure(raw: &str, model: &Model) -> Result<Measure, CliError> {
    let v = parse_vector("mu", raw, model.len())?;
    Ok(Measure::from_slice(&v)?)
}

pub fn parse_field(raw: &str, model: &Model) -> Result<Field, CliError> {
    Ok(Field::from_slice(&parse_vector("f", raw, model.len())?))
}

/// `a:b:n`, `n` logarithmically spaced points in `[a, b]`.
pub fn parse_grid(raw: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Input(format!("--t-grid expects a:b:n, got {raw:?}"));
    let parts: Vec<&str> = raw.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if a.is_nan() || b.is_nan() || a <= 0.0 || b < a || !b.is_finite() || n == 0 || (n == 1 && a != b) {
        return Err(CliError::Input(format!(
            "--t-grid needs 0 < a <= b and n >= 1 (n >= 2 unless a = b), got {raw:?}"
        )));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok(spcrit::spectral::log_grid(a, b, n))
}
