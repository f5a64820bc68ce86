//! Plain-text datasets: a `label,f1,...,fd` header, then one row per line.

use std::path::Path;

use sxgb_core::Dataset;

use crate::error::{CliError, Result};

pub fn parse_csv(text: &str) -> Result<Vec<String>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| CliError::Usage("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"label") || cols.len() < 2 {
        return Err(CliError::Usage("line 1: header must be label,f1,...,fd".into()));
    }
    let d = cols.len() - 1;
    lines
        .map(|(i, l)| {
            let (y, x) = Dataset::parse_row(l).map_err(|e| CliError::Usage(format!("line {}: {e}", i + 1)))?;
            if x.len() != d {
                return Err(CliError::Usage(format!("line {}: {} features, header has {d}", i + 1, x.len())));
            }
            Ok(Dataset::format_row(y, &x))
        })
        .collect()
}

pub fn read_csv(path: &Path) -> Result<Vec<String>> {
    parse_csv(&std::fs::read_to_string(path)?)
}

pub fn to_csv(rows: &[String]) -> String {
    let d = rows.first().map_or(0, |r| r.split(',').count() - 1);
    let mut out = String::from("label");
    for j in 1..=d {
        out.push_str(&format!(",f{j}"));
    }
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    out
}

pub fn dataset_rows(data: &Dataset) -> Vec<String> {
    data.rows().zip(data.labels()).map(|(x, &y)| Dataset::format_row(y, x)).collect()
}
