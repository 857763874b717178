//! Panel ingestion and the core data-carrying types.
//!
//! A *panel* is a dated T×N matrix: one row per observation date, one column
//! per series. Files are delimiter-separated text with a header row; the
//! first column holds dates (ISO-8601 `YYYY-MM-DD` or `DD.MM.YYYY`), the
//! remaining columns hold finite numeric values. The delimiter (comma,
//! semicolon or tab) is sniffed from the header line unless overridden.

use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};

/// Dense row-major T×N matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for r in &rows {
            if r.len() != n_cols {
                return Err(Error::InvalidConfig(format!(
                    "ragged matrix: expected {n_cols} columns, found {}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, rows: n_rows, cols: n_cols })
    }

    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "matrix buffer of {} entries does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Copy of column `c` (row-major storage makes column access strided).
    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }
}

/// A dated panel of raw series values (prices or returns).
#[derive(Debug, Clone)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub values: Matrix,
}

impl ReturnPanel {
    /// Validating constructor: strictly increasing dates, matching shapes,
    /// at least 2 rows and 2 columns, all values finite.
    pub fn new(dates: Vec<NaiveDate>, names: Vec<String>, values: Matrix) -> Result<Self> {
        if values.cols() < 2 {
            return Err(Error::TooFewColumns { found: values.cols(), required: 2 });
        }
        if values.rows() < 2 {
            return Err(Error::TooFewRows { found: values.rows(), required: 2 });
        }
        if dates.len() != values.rows() || names.len() != values.cols() {
            return Err(Error::InvalidConfig(format!(
                "shape mismatch: {} dates, {} names for a {}x{} value matrix",
                dates.len(),
                names.len(),
                values.rows(),
                values.cols()
            )));
        }
        for (i, w) in dates.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::NonMonotoneDates { row: i + 2 });
            }
        }
        for r in 0..values.rows() {
            for c in 0..values.cols() {
                if !values.get(r, c).is_finite() {
                    return Err(Error::UnparseableCell {
                        row: r + 1,
                        col: c + 2,
                        content: format!("{}", values.get(r, c)),
                    });
                }
            }
        }
        Ok(Self { dates, names, values })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    /// Log-return transform: `out[t][i] = ln(price[t+1][i]) - ln(price[t][i])`,
    /// dated by the later observation of each pair. Requires strictly
    /// positive prices.
    pub fn to_log_returns(&self) -> Result<ReturnPanel> {
        let t = self.n_rows();
        let n = self.n_cols();
        for r in 0..t {
            for c in 0..n {
                let v = self.values.get(r, c);
                if v <= 0.0 {
                    return Err(Error::NonPositivePrice { row: r + 1, col: c + 2, value: v });
                }
            }
        }
        let mut data = Vec::with_capacity((t - 1) * n);
        for r in 0..t - 1 {
            for c in 0..n {
                data.push(self.values.get(r + 1, c).ln() - self.values.get(r, c).ln());
            }
        }
        ReturnPanel::new(
            self.dates[1..].to_vec(),
            self.names.clone(),
            Matrix::from_vec(data, t - 1, n)?,
        )
    }
}

/// A panel of (approximately) i.i.d.-margin residuals, ready for the
/// rank-based dependence machinery. Produced by the marginal filter or by a
/// simulator; `fits` is present only when a GARCH-type filter actually ran.
#[derive(Debug, Clone)]
pub struct ResidualPanel {
    pub dates: Vec<NaiveDate>,
    pub names: Vec<String>,
    pub values: Matrix,
    pub fits: Option<Vec<crate::marginal::MarginalFit>>,
}

impl ResidualPanel {
    #[inline]
    pub fn n_rows(&self) -> usize {
        self.values.rows()
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.values.cols()
    }

    /// Sanity band that holds after a successful marginal fit: residuals are
    /// roughly standardised (|mean| <= 0.1, variance in [0.5, 2.0]). Only
    /// meaningful when `fits` is present; simulated or pass-through panels
    /// carry arbitrary scales.
    pub fn validate_standardisation(&self) -> Result<()> {
        if self.fits.is_none() {
            return Ok(());
        }
        let t = self.n_rows() as f64;
        for c in 0..self.n_cols() {
            let col = self.values.column(c);
            let mean = col.iter().sum::<f64>() / t;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (t - 1.0);
            if mean.abs() > 0.1 || !(0.5..=2.0).contains(&var) {
                return Err(Error::DegenerateSeries { column: self.names[c].clone() });
            }
        }
        Ok(())
    }
}

/// Options for [`load_panel`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Field delimiter; sniffed from the header line when `None`.
    pub delimiter: Option<u8>,
}

fn sniff_delimiter(header: &str) -> u8 {
    let candidates = [b',', b';', b'\t'];
    let mut best = b',';
    let mut best_count = 0usize;
    for &d in &candidates {
        let count = header.bytes().filter(|&b| b == d).count();
        if count > best_count {
            best = d;
            best_count = count;
        }
    }
    best
}

fn parse_date(cell: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(cell, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(cell, "%d.%m.%Y"))
        .ok()
}

/// Load a dated panel from a delimiter-separated file.
///
/// The first row is a header, the first column holds dates; every other cell
/// must parse as a finite number. Errors carry the 1-based row/column of the
/// offending cell.
pub fn load_panel(path: &Path, options: &LoadOptions) -> Result<ReturnPanel> {
    let raw = std::fs::read_to_string(path)?;
    load_panel_str(&raw, options)
}

/// [`load_panel`] over an in-memory string (exposed for tests and pipes).
pub fn load_panel_str(raw: &str, options: &LoadOptions) -> Result<ReturnPanel> {
    let header_line = raw.lines().next().unwrap_or("");
    let delim = options.delimiter.unwrap_or_else(|| sniff_delimiter(header_line));

    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delim)
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(raw.as_bytes());

    let names: Vec<String> = {
        let headers = reader
            .headers()
            .map_err(|e| Error::InvalidConfig(format!("unreadable header: {e}")))?;
        headers.iter().skip(1).map(str::to_owned).collect()
    };
    if names.len() < 2 {
        return Err(Error::TooFewColumns { found: names.len(), required: 2 });
    }

    let mut dates = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record.map_err(|e| Error::UnparseableCell {
            row: row_no,
            col: 0,
            content: format!("malformed record: {e}"),
        })?;
        let date_cell = record.get(0).unwrap_or("");
        let date = parse_date(date_cell).ok_or_else(|| Error::UnparseableCell {
            row: row_no,
            col: 1,
            content: date_cell.to_owned(),
        })?;
        let mut row = Vec::with_capacity(names.len());
        for (j, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| Error::UnparseableCell {
                row: row_no,
                col: j + 1,
                content: cell.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::UnparseableCell {
                    row: row_no,
                    col: j + 1,
                    content: cell.to_owned(),
                });
            }
            row.push(v);
        }
        dates.push(date);
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(Error::TooFewRows { found: rows.len(), required: 2 });
    }
    ReturnPanel::new(dates, names, Matrix::from_rows(rows)?)
}

/// Render a panel as delimiter-separated text. Floats are written in the
/// shortest decimal form that parses back to the identical `f64`, so a
/// save/load round trip is lossless.
pub fn render_panel(dates: &[NaiveDate], names: &[String], values: &Matrix, delim: char) -> String {
    let mut out = String::new();
    out.push_str("date");
    for n in names {
        out.push(delim);
        out.push_str(n);
    }
    out.push('\n');
    for (r, date) in dates.iter().enumerate() {
        let _ = write!(out, "{date}");
        for c in 0..values.cols() {
            out.push(delim);
            let _ = write!(out, "{}", values.get(r, c));
        }
        out.push('\n');
    }
    out
}

/// Save a panel with [`render_panel`] using the write-then-rename discipline.
pub fn save_panel(panel: &ReturnPanel, path: &Path) -> Result<()> {
    let text = render_panel(&panel.dates, &panel.names, &panel.values, ',');
    crate::report::write_atomically(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    #[test]
    fn loads_comma_separated_panel_with_iso_dates() {
        let raw = "date,a,b\n2001-01-01,1.5,2.0\n2001-01-02,1.25,2.5\n";
        let p = load_panel_str(raw, &LoadOptions::default()).unwrap();
        assert_eq!(p.n_rows(), 2);
        assert_eq!(p.n_cols(), 2);
        assert_eq!(p.names, vec!["a", "b"]);
        assert_eq!(p.values.get(1, 0), 1.25);
    }

    #[test]
    fn sniffs_semicolon_and_dotted_dates() {
        let raw = "date;x;y\n01.02.2003;1;2\n02.02.2003;3;4\n";
        let p = load_panel_str(raw, &LoadOptions::default()).unwrap();
        assert_eq!(p.dates[0], date("2003-02-01"));
        assert_eq!(p.values.get(1, 1), 4.0);
    }

    #[test]
    fn reports_cell_location_on_parse_failure() {
        let raw = "date,a,b\n2001-01-01,1.5,oops\n2001-01-02,1.0,2.0\n";
        match load_panel_str(raw, &LoadOptions::default()) {
            Err(Error::UnparseableCell { row, col, content }) => {
                assert_eq!((row, col), (1, 3));
                assert_eq!(content, "oops");
            }
            other => panic!("expected UnparseableCell, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_monotone_dates() {
        let raw = "date,a,b\n2001-01-02,1,2\n2001-01-01,3,4\n";
        assert!(matches!(
            load_panel_str(raw, &LoadOptions::default()),
            Err(Error::NonMonotoneDates { row: 2 })
        ));
    }

    #[test]
    fn rejects_single_value_column() {
        let raw = "date,a\n2001-01-01,1\n2001-01-02,2\n";
        assert!(matches!(
            load_panel_str(raw, &LoadOptions::default()),
            Err(Error::TooFewColumns { found: 1, .. })
        ));
    }

    #[test]
    fn log_returns_match_hand_values_and_shift_dates() {
        let raw = "date,a,b\n2001-01-01,100,50\n2001-01-02,105,47.5\n2001-01-03,84,57\n";
        let p = load_panel_str(raw, &LoadOptions::default()).unwrap();
        let r = p.to_log_returns().unwrap();
        assert_eq!(r.n_rows(), 2);
        assert_eq!(r.dates[0], date("2001-01-02"));
        assert_eq!(r.dates[1], date("2001-01-03"));
        assert_eq!(r.values.get(0, 0), 105_f64.ln() - 100_f64.ln());
        assert_eq!(r.values.get(0, 1), 47.5_f64.ln() - 50_f64.ln());
        assert!((r.values.get(0, 0) - 1.05_f64.ln()).abs() < 1e-12);
        assert!((r.values.get(0, 1) - 0.95_f64.ln()).abs() < 1e-12);
        assert!((r.values.get(1, 0) - 0.8_f64.ln()).abs() < 1e-12);
        assert!((r.values.get(1, 1) - 1.2_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn log_returns_reject_non_positive_prices() {
        let raw = "date,a,b\n2001-01-01,100,-1\n2001-01-02,105,2\n";
        let p = load_panel_str(raw, &LoadOptions::default()).unwrap();
        assert!(matches!(
            p.to_log_returns(),
            Err(Error::NonPositivePrice { row: 1, col: 3, .. })
        ));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let dates = vec![date("2001-01-01"), date("2001-01-02"), date("2001-01-03")];
        let names = vec!["a".to_owned(), "b".to_owned()];
        let vals = Matrix::from_rows(vec![
            vec![0.1, std::f64::consts::PI],
            vec![-1.0 / 3.0, 1e-17],
            vec![123456.789012345678, -0.0007],
        ])
        .unwrap();
        let panel = ReturnPanel::new(dates, names, vals).unwrap();
        let text = render_panel(&panel.dates, &panel.names, &panel.values, ',');
        let back = load_panel_str(&text, &LoadOptions::default()).unwrap();
        for r in 0..panel.n_rows() {
            for c in 0..panel.n_cols() {
                assert_eq!(panel.values.get(r, c).to_bits(), back.values.get(r, c).to_bits());
            }
        }
        assert_eq!(panel.dates, back.dates);
    }
}
