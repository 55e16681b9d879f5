//! Deterministic JSON and CSV output: every float is written with 17
//! significant digits, and non-finite values become strings.

use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::ser::Formatter;
use serde_json::Value;

struct Digits17;

impl Formatter for Digits17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// 17 significant digits in scientific notation; "inf", "-inf" or "nan"
/// otherwise.
pub fn fmt_f64(value: f64) -> String {
    if value.is_finite() {
        format!("{value:.16e}")
    } else if value.is_nan() {
        "nan".into()
    } else if value > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// A JSON number; null for NaN and a string for infinities.
pub fn num(value: f64) -> Value {
    if value.is_finite() {
        Value::from(value)
    } else if value.is_nan() {
        Value::Null
    } else {
        Value::String(fmt_f64(value))
    }
}

pub fn nums(values: &[f64]) -> Value {
    Value::Array(values.iter().map(|&v| num(v)).collect())
}

pub fn to_json_string(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17);
    serde::Serialize::serialize(value, &mut ser).expect("serializing a JSON value");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(value: &Value, path: Option<&Path>) -> Result<()> {
    let text = to_json_string(value);
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn write_csv(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut text = String::from("W,density,cumulative\n");
    for (w, d, c) in rows {
        text.push_str(&format!("{},{},{}\n", fmt_f64(*w), fmt_f64(*d), fmt_f64(*c)));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits_round_trip() {
        let v = json!({"a": 0.1, "b": [1.0 / 3.0, 2], "c": num(f64::INFINITY)});
        let s = to_json_string(&v);
        assert_eq!(s, "{\"a\":1.0000000000000001e-1,\"b\":[3.3333333333333331e-1,2],\"c\":\"inf\"}\n");
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"][0].as_f64().unwrap(), 1.0 / 3.0);
    }
}
