//! Byte-stable JSON and CSV output.
//!
//! Object keys are sorted and every float is written with 17 significant
//! digits, so the same report always serializes to the same bytes and
//! round-trips exactly.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::search::{ConvergenceStudy, STUDY_CSV_HEADER};

/// `x` in scientific notation with 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Canonical JSON text for any serializable report.
pub fn to_json<T: Serialize + ?Sized>(report: &T) -> Result<String> {
    let value = serde_json::to_value(report)?;
    let mut out = String::new();
    write_value(&value, 0, &mut out);
    out.push('\n');
    Ok(out)
}

pub fn write_json<T: Serialize + ?Sized, W: Write>(report: &T, mut out: W) -> Result<()> {
    out.write_all(to_json(report)?.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_value(value: &Value, indent: usize, out: &mut String) {
    match value {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&value.to_string()),
        Value::Number(n) => match (n.as_u64(), n.as_i64(), n.as_f64()) {
            (Some(u), _, _) => out.push_str(&u.to_string()),
            (_, Some(i), _) => out.push_str(&i.to_string()),
            (_, _, Some(f)) => out.push_str(&format_float(f)),
            _ => out.push_str(&n.to_string()),
        },
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                write_value(item, indent + 1, out);
            }
            newline(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                newline(indent + 1, out);
                out.push_str(&Value::String(key.clone()).to_string());
                out.push_str(": ");
                write_value(&map[key], indent + 1, out);
            }
            newline(indent, out);
            out.push('}');
        }
    }
}

fn newline(indent: usize, out: &mut String) {
    out.push('\n');
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// Writes a header and rows of preformatted cells.
pub fn write_csv<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// The depth table of a convergence study.
pub fn write_study_csv<W: Write>(out: W, study: &ConvergenceStudy) -> Result<()> {
    let rows: Vec<Vec<String>> = study
        .rows()
        .iter()
        .map(|row| {
            let mut cells = vec![(row[0] as u32).to_string()];
            cells.extend(row[1..].iter().map(|&x| format_float(x)));
            cells
        })
        .collect();
    write_csv(out, &STUDY_CSV_HEADER, &rows)
}
