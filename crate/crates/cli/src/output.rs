//! Rendering of reports as aligned text, CSV or JSON.

use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
    Json,
}

/// Formats `x` to `digits` significant digits, dropping trailing zeros.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let digits = digits.max(1);
    let mag = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&mag) {
        let s = format!("{:.*e}", digits - 1, x);
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        return format!("{}e{exp}", trim_zeros(mantissa));
    }
    let decimals = (digits as i32 - 1 - mag).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to `digits` significant digits, as a JSON number.
pub fn num(x: f64, digits: usize) -> Value {
    sig(x, digits)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

#[derive(Debug, Clone)]
pub enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
    Blank,
}

impl Cell {
    fn render(&self, digits: usize) -> String {
        match self {
            Self::Text(s) => s.clone(),
            Self::Num(x) => sig(*x, digits),
            Self::Int(n) => n.to_string(),
            Self::Blank => String::new(),
        }
    }

    fn json(&self, digits: usize) -> Value {
        match self {
            Self::Text(s) => Value::String(s.clone()),
            Self::Num(x) => num(*x, digits),
            Self::Int(n) => Value::from(*n),
            Self::Blank => Value::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Self::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Self::Int(n as u64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Self::Blank, Self::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Self::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Self::Text(s)
    }
}

/// A table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn csv(&self, digits: usize) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|c| csv_field(&c.render(digits))).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn text(&self, digits: usize) -> String {
        let rendered: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| c.render(digits)).collect())
            .collect();
        let widths: Vec<usize> = (0..self.header.len())
            .map(|j| {
                rendered
                    .iter()
                    .map(|r| r[j].chars().count())
                    .chain([self.header[j].len()])
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: Vec<&str>| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| {
                    if j == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            padded.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(self.header.clone());
        for r in &rendered {
            out.push_str(&line(r.iter().map(String::as_str).collect()));
        }
        out
    }

    pub fn json(&self, digits: usize) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    let obj: Map<String, Value> = self
                        .header
                        .iter()
                        .zip(r)
                        .map(|(h, c)| (h.to_string(), c.json(digits)))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Where a field appears.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shown {
    Everywhere,
    TextOnly,
    DataOnly,
}

/// Key-value report, rendered as aligned text, two-column CSV or a JSON object.
#[derive(Debug, Clone, Default)]
pub struct Fields {
    entries: Vec<(String, Cell, Shown)>,
}

impl Fields {
    pub fn add(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        self.entries
            .push((key.into(), value.into(), Shown::Everywhere));
        self
    }

    /// A field only shown in text output, typically a summary of data fields.
    pub fn add_text(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        self.entries
            .push((key.into(), value.into(), Shown::TextOnly));
        self
    }

    /// A field left out of text output.
    pub fn add_data(&mut self, key: impl Into<String>, value: impl Into<Cell>) -> &mut Self {
        self.entries
            .push((key.into(), value.into(), Shown::DataOnly));
        self
    }

    fn visible(&self, text: bool) -> impl Iterator<Item = &(String, Cell, Shown)> {
        let hidden = if text {
            Shown::DataOnly
        } else {
            Shown::TextOnly
        };
        self.entries.iter().filter(move |e| e.2 != hidden)
    }

    pub fn render(&self, format: Format, digits: usize) -> String {
        match format {
            Format::Text => {
                let width = self.visible(true).map(|e| e.0.len()).max().unwrap_or(0);
                self.visible(true)
                    .map(|(k, v, _)| {
                        format!("{k:<width$}  {}", v.render(digits))
                            .trim_end()
                            .to_string()
                            + "\n"
                    })
                    .collect()
            }
            Format::Csv => {
                let mut t = Table::new(vec!["field", "value"]);
                for (k, v, _) in self.visible(false) {
                    t.push(vec![Cell::from(k.as_str()), v.clone()]);
                }
                t.csv(digits)
            }
            Format::Json => pretty(&self.json(digits)),
        }
    }

    pub fn json(&self, digits: usize) -> Value {
        let obj: Map<String, Value> = self
            .visible(false)
            .map(|(k, v, _)| (k.clone(), v.json(digits)))
            .collect();
        Value::Object(obj)
    }
}

pub fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).unwrap_or_else(|_| "null".into());
    s.push('\n');
    s
}
