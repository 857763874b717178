//! Result reports: a flat list of documented key/value scalars plus an
//! optional table block, rendered either as structured text (`key = value`
//! lines) or as a delimiter-separated file ready for plotting.
//!
//! Numeric values are written in the shortest decimal form that parses back
//! to the identical `f64` (lossless round trip). Reports deliberately contain
//! no timestamps: re-running the embedded configuration must reproduce the
//! file byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Str(String),
    Date(NaiveDate),
    Bool(bool),
    /// Explicit "not available" marker (e.g. break date when nothing was found).
    None,
}

impl Value {
    fn render(&self) -> String {
        match self {
            Value::Num(x) => format!("{x}"),
            Value::Int(i) => format!("{i}"),
            Value::Str(s) => s.clone(),
            Value::Date(d) => format!("{d}"),
            Value::Bool(b) => format!("{b}"),
            Value::None => "none".to_owned(),
        }
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Num(x)
    }
}
impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}
impl From<usize> for Value {
    fn from(i: usize) -> Self {
        Value::Int(i as i64)
    }
}
impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_owned())
    }
}
impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}
impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}
impl From<NaiveDate> for Value {
    fn from(d: NaiveDate) -> Self {
        Value::Date(d)
    }
}

/// Tabular block of a report (dependence paths, Monte Carlo tables, ...).
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Output format of [`Report::render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `key = value` lines followed by an aligned table block.
    StructuredText,
    /// `# key = value` comment lines followed by a delimiter-separated table.
    Delimited,
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    scalars: Vec<(String, Value)>,
    table: Option<Table>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<Value>) {
        self.scalars.push((key.into(), value.into()));
    }

    pub fn set_table(&mut self, table: Table) {
        self.table = Some(table);
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.scalars.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn table(&self) -> Option<&Table> {
        self.table.as_ref()
    }

    pub fn render(&self, format: ReportFormat) -> String {
        let mut out = String::new();
        match format {
            ReportFormat::StructuredText => {
                for (k, v) in &self.scalars {
                    let _ = writeln!(out, "{k} = {}", v.render());
                }
                if let Some(t) = &self.table {
                    let _ = writeln!(out, "table = {}", t.columns.join(","));
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(Value::render).collect();
                        let _ = writeln!(out, "  {}", cells.join(","));
                    }
                }
            }
            ReportFormat::Delimited => {
                for (k, v) in &self.scalars {
                    let _ = writeln!(out, "# {k} = {}", v.render());
                }
                if let Some(t) = &self.table {
                    let head: Vec<String> =
                        t.columns.iter().map(|c| csv_escape(c)).collect();
                    let _ = writeln!(out, "{}", head.join(","));
                    for row in &t.rows {
                        let cells: Vec<String> =
                            row.iter().map(|v| csv_escape(&v.render())).collect();
                        let _ = writeln!(out, "{}", cells.join(","));
                    }
                }
            }
        }
        out
    }
}

/// Quote a delimited-output cell when it contains a comma, quote, or line
/// break, doubling embedded quotes.
fn csv_escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_owned()
    }
}

/// Write `content` to `path` atomically: the bytes land in a temporary file
/// in the destination directory which is then renamed over the target, so a
/// crash never leaves a half-written report behind.
pub fn write_atomically(path: &Path, content: &str) -> Result<()> {
    use std::io::Write as _;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(d) => tempfile::NamedTempFile::new_in(d)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(content.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| crate::error::Error::IoFailure { source: e.error })?;
    Ok(())
}

/// Write a rendered report with the write-then-rename discipline.
pub fn write_report(report: &Report, format: ReportFormat, path: &Path) -> Result<()> {
    write_atomically(path, &report.render(format))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn structured_text_renders_keys_in_insertion_order() {
        let mut r = Report::new();
        r.push("statistic", 0.5);
        r.push("alpha", 0.05);
        r.push("seed", 42usize);
        let text = r.render(ReportFormat::StructuredText);
        assert_eq!(text, "statistic = 0.5\nalpha = 0.05\nseed = 42\n");
    }

    #[test]
    fn numeric_values_round_trip_via_display() {
        let vals = [std::f64::consts::PI, 1.0 / 3.0, 1e-300, -0.1, 12345.678901234567];
        for v in vals {
            let s = Value::Num(v).render();
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "value {v} failed to round trip via {s}");
        }
    }

    #[test]
    fn delimited_format_prefixes_scalars_as_comments() {
        let mut r = Report::new();
        r.push("alpha", 0.05);
        r.set_table(Table {
            columns: vec!["t".into(), "rho".into()],
            rows: vec![
                vec![Value::Int(10), Value::Num(0.25)],
                vec![Value::Int(11), Value::Num(0.5)],
            ],
        });
        let text = r.render(ReportFormat::Delimited);
        assert_eq!(text, "# alpha = 0.05\nt,rho\n10,0.25\n11,0.5\n");
    }

    #[test]
    fn atomic_write_replaces_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomically(&path, "first").unwrap();
        write_atomically(&path, "second").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
    }
}
