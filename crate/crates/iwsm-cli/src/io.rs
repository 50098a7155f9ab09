//! Sample CSV and JSON file helpers.
//!
//! Sample CSV: header `dim_0,...,dim_{d-1}`, one row per sample, floats
//! written in shortest round-trip form so files are byte-stable across runs
//! and parse back exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use iwsm_core::sampler::SampleSet;

use crate::errors::{CliError, CliResult};

pub fn write_sample_csv(path: &Path, set: &SampleSet) -> CliResult<()> {
    let mut text = String::new();
    for k in 0..set.dim {
        if k > 0 {
            text.push(',');
        }
        let _ = write!(text, "dim_{k}");
    }
    text.push('\n');
    for row in set.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                text.push(',');
            }
            let _ = write!(text, "{v}");
        }
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn read_sample_csv(path: &Path) -> CliResult<SampleSet> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::config(format!("{}: empty file", path.display())))?;
    let dim = header.split(',').count();
    if dim == 0 {
        return Err(CliError::config(format!("{}: empty header", path.display())));
    }
    let mut set = SampleSet::new(dim, 0, String::from("file"), String::new());
    let mut row = vec![0.0; dim];
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(CliError::config(format!(
                "{}:{}: expected {dim} fields, got {}",
                path.display(),
                lineno + 2,
                fields.len()
            )));
        }
        for (k, field) in fields.iter().enumerate() {
            row[k] = field.parse().map_err(|e| {
                CliError::config(format!("{}:{}: bad number: {e}", path.display(), lineno + 2))
            })?;
        }
        set.push_row(&row);
    }
    if set.is_empty() {
        return Err(CliError::config(format!("{}: no sample rows", path.display())));
    }
    Ok(set)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::io(format!("serialize: {e}")))?;
    fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}
