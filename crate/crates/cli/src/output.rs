//! Deterministic JSON and CSV rendering with 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};
use serde_json::{Map, Value};

use crate::config::{Format, RunConfig};

/// A rectangular result; cells are numbers, strings or null.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_value(&self) -> Value {
        let mut m = Map::new();
        m.insert("columns".into(), self.columns.iter().map(|c| Value::from(*c)).collect());
        m.insert(
            "rows".into(),
            self.rows.iter().map(|r| Value::Array(r.clone())).collect(),
        );
        Value::Object(m)
    }
}

pub fn num(x: f64) -> Value {
    Value::from(x)
}

pub fn opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::from)
}

/// What a command produced: a summary object plus named tables.
#[derive(Debug, Clone, Default)]
pub struct Artifact {
    pub summary: Map<String, Value>,
    pub tables: Vec<(&'static str, Table)>,
    /// Table written in CSV mode.
    pub csv_table: usize,
}

impl Artifact {
    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).expect("result values serialize");
        self.summary.insert(key.to_string(), value);
    }

    pub fn table(&mut self, name: &'static str, table: Table) {
        self.tables.push((name, table));
    }
}

/// Prints every float as `d.dddddddddddddddde±x`.
struct Exact<F>(F);

macro_rules! delegate {
    ($($name:ident($($arg:ident: $t:ty),*);)*) => {$(
        fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $t)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        }
    )*};
}

impl<F: Formatter> Formatter for Exact<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    delegate! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

fn write_json<F: Formatter>(value: &Value, formatter: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Exact(formatter));
    value.serialize(&mut ser).expect("in-memory JSON write");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn compact(value: &Value) -> String {
    write_json(value, CompactFormatter)
}

pub fn pretty(value: &Value) -> String {
    write_json(value, PrettyFormatter::new())
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => format!("{f:.16e}"),
            _ => n.to_string(),
        },
        Value::String(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Value::String(s) => s.clone(),
        other => compact(other),
    }
}

pub fn render(config: &RunConfig, artifact: &Artifact) -> String {
    let config_value = serde_json::to_value(config).expect("config serializes");
    match config.format {
        Format::Json => {
            let mut result = artifact.summary.clone();
            for (name, table) in &artifact.tables {
                result.insert((*name).to_string(), table.to_value());
            }
            let mut doc = Map::new();
            doc.insert("config".into(), config_value);
            doc.insert("result".into(), Value::Object(result));
            let mut text = pretty(&Value::Object(doc));
            text.push('\n');
            text
        }
        Format::Csv => {
            let mut text = format!("# config: {}\n", compact(&config_value));
            if !artifact.summary.is_empty() {
                text.push_str(&format!("# summary: {}\n", compact(&Value::Object(artifact.summary.clone()))));
            }
            if let Some((_, table)) = artifact.tables.get(artifact.csv_table) {
                text.push_str(&table.columns.join(","));
                text.push('\n');
                for row in &table.rows {
                    let cells: Vec<String> = row.iter().map(csv_cell).collect();
                    text.push_str(&cells.join(","));
                    text.push('\n');
                }
            }
            text
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn floats_have_seventeen_digits() {
        assert_eq!(compact(&json!({"x": 0.1, "n": 3})), r#"{"x":1.0000000000000001e-1,"n":3}"#);
        assert_eq!(csv_cell(&json!(2.5)), "2.5000000000000000e0");
        assert_eq!(csv_cell(&json!(7)), "7");
        assert_eq!(csv_cell(&Value::Null), "");
    }

    #[test]
    fn exact_output_parses_back() {
        let x = std::f64::consts::PI / 7.0;
        let text = compact(&json!([x, -1e-300, 6.02e23]));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, vec![x, -1e-300, 6.02e23]);
    }
}
