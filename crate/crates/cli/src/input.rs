//! Series ingestion: one value per line, or two columns `label,value`.

use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// A parsed input series with optional labels (index or year column).
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeries {
    pub values: Vec<f64>,
    pub labels: Option<Vec<Value>>,
}

impl InputSeries {
    /// Label of the 1-based position `k`.
    pub fn label(&self, k: usize) -> Option<Value> {
        self.labels.as_ref().map(|l| l[k - 1].clone())
    }
}

fn tokens(line: &str) -> Vec<&str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .collect()
}

fn label_value(token: &str) -> Value {
    match token.parse::<i64>() {
        Ok(i) => Value::from(i),
        Err(_) => Value::from(token),
    }
}

/// Parses series text. Blank lines and `#` comments are skipped; a first
/// row that is not numeric is taken as a header.
pub fn parse_series(text: &str) -> Result<InputSeries, CliError> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let toks = tokens(line);
        let parsed: Vec<Option<f64>> = toks.iter().map(|t| t.parse::<f64>().ok()).collect();
        if first {
            first = false;
            if parsed.iter().any(Option::is_none) {
                if !(1..=2).contains(&toks.len()) {
                    return Err(CliError::Data(format!(
                        "line {lineno}: header has {} columns, expected 1 or 2",
                        toks.len()
                    )));
                }
                width = Some(toks.len());
                continue;
            }
        }
        let w = *width.get_or_insert(toks.len());
        if toks.len() != w || !(1..=2).contains(&w) {
            return Err(CliError::Data(format!(
                "line {lineno}: expected {} column(s), found {}",
                w.min(2),
                toks.len()
            )));
        }
        let v = match parsed[w - 1] {
            Some(v) if v.is_finite() => v,
            _ => {
                return Err(CliError::Data(format!(
                    "line {lineno}: '{}' is not a finite number",
                    toks[w - 1]
                )))
            }
        };
        if w == 2 {
            labels.push(label_value(toks[0]));
        }
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Data("input contains no observations".into()));
    }
    let labels = (width == Some(2)).then_some(labels);
    Ok(InputSeries { values, labels })
}

pub fn read_series(path: &Path) -> Result<InputSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_series(&text)
}
