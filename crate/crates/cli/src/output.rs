use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Flattens a JSON document into CSV: a `rows` array of objects becomes one line per
/// row (with top-level scalars repeated as leading columns); anything else is one line.
pub fn to_csv(doc: &Value) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(vec![]);
    let obj = match doc {
        Value::Object(o) => o.clone(),
        other => {
            let mut o = serde_json::Map::new();
            o.insert("value".into(), other.clone());
            o
        }
    };
    let scalars: Vec<(&String, &Value)> = obj.iter().filter(|(_, v)| !v.is_array() && !v.is_object()).collect();
    match obj.get("rows").and_then(Value::as_array) {
        Some(rows) if rows.iter().all(Value::is_object) && !rows.is_empty() => {
            let keys: Vec<String> = rows[0].as_object().unwrap().keys().cloned().collect();
            let header: Vec<&str> = scalars.iter().map(|(k, _)| k.as_str()).chain(keys.iter().map(String::as_str)).collect();
            w.write_record(&header).map_err(csv_err)?;
            for r in rows {
                let r = r.as_object().unwrap();
                let line: Vec<String> = scalars
                    .iter()
                    .map(|(_, v)| cell(v))
                    .chain(keys.iter().map(|k| r.get(k).map(cell).unwrap_or_default()))
                    .collect();
                w.write_record(&line).map_err(csv_err)?;
            }
        }
        _ => {
            w.write_record(obj.keys()).map_err(csv_err)?;
            w.write_record(obj.values().map(cell)).map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

pub fn render(doc: &Value, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(doc).expect("json value serialises") + "\n"),
        Format::Csv => to_csv(doc),
    }
}

pub fn emit(doc: &Value, format: Format, out: Option<&Path>) -> Result<(), CliError> {
    let text = render(doc, format)?;
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io { path: p.display().to_string(), message: e.to_string() }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string()))
        }
    }
}
