//! Rectangular result tables and their CSV form.
//!
//! CSV layout: `#`-prefixed metadata lines (version, seed, optional
//! timestamp), the config echo on `#>`-prefixed lines, then a mandatory
//! header row and the records. Comma separated, LF line endings, reals with
//! 17 significant digits.

use std::fmt::Write as _;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnType {
    Real,
    Int,
    Bool,
    Text,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    /// Empty field; allowed in any column.
    Missing,
}

impl Cell {
    fn fits(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Cell::Real(_), ColumnType::Real)
                | (Cell::Int(_), ColumnType::Int)
                | (Cell::Bool(_), ColumnType::Bool)
                | (Cell::Text(_), ColumnType::Text)
                | (Cell::Missing, _)
        )
    }

    fn write_csv(&self, out: &mut String) {
        match self {
            Cell::Real(v) => out.push_str(&format_real(*v)),
            Cell::Int(n) => write!(out, "{n}").unwrap(),
            Cell::Bool(b) => write!(out, "{b}").unwrap(),
            Cell::Text(s) => out.push_str(&quote(s)),
            Cell::Missing => {}
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Real)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// 17 significant digits: enough to round-trip any f64.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Metadata {
    pub version: String,
    pub seed: u64,
    /// Unix seconds; `None` in deterministic mode.
    pub timestamp: Option<u64>,
    pub config_echo: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    columns: Vec<(String, ColumnType)>,
    rows: Vec<Vec<Cell>>,
    pub metadata: Metadata,
}

impl ResultTable {
    pub fn new(columns: &[(&str, ColumnType)], metadata: Metadata) -> Self {
        Self {
            columns: columns.iter().map(|(n, t)| (n.to_string(), *t)).collect(),
            rows: Vec::new(),
            metadata,
        }
    }

    /// Appends a record; panics on a width or type mismatch, which is a
    /// programming error in the caller.
    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        for (c, (name, ty)) in row.iter().zip(&self.columns) {
            assert!(c.fits(*ty), "column `{name}` expects {ty:?}, got {c:?}");
        }
        self.rows.push(row);
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|(n, _)| n.as_str()).collect()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let j = self.columns.iter().position(|(n, _)| n == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let m = &self.metadata;
        let mut s = String::new();
        writeln!(s, "# qet {}", m.version).unwrap();
        writeln!(s, "# seed = {}", m.seed).unwrap();
        if let Some(t) = m.timestamp {
            writeln!(s, "# timestamp = {t}").unwrap();
        }
        for line in m.config_echo.lines() {
            writeln!(s, "#> {line}").unwrap();
        }
        let header: Vec<String> = self.columns.iter().map(|(n, _)| quote(n)).collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for row in &self.rows {
            for (j, c) in row.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                c.write_csv(&mut s);
            }
            s.push('\n');
        }
        s
    }
}

/// Recovers the config echo from CSV text.
pub fn config_echo(csv: &str) -> String {
    csv.lines()
        .filter_map(|l| l.strip_prefix("#> "))
        .fold(String::new(), |mut acc, l| {
            acc.push_str(l);
            acc.push('\n');
            acc
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta(ts: Option<u64>) -> Metadata {
        Metadata {
            version: "0.1.0".into(),
            seed: 7,
            timestamp: ts,
            config_echo: "seed = 7\n[minimal]\nh = 1.0\n".into(),
        }
    }

    #[test]
    fn reals_round_trip() {
        for v in [0.1, -1.0 / 3.0, 1e-300, f64::MAX, -0.0180046816044282] {
            let s = format_real(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa: String = s.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    fn csv_layout() {
        let mut t = ResultTable::new(&[("name", ColumnType::Text), ("x", ColumnType::Real), ("ok", ColumnType::Bool)], meta(None));
        t.push(vec!["a,b".into(), 0.5.into(), true.into()]);
        t.push(vec!["c".into(), Cell::Missing, false.into()]);
        let csv = t.to_csv();
        assert!(!csv.contains('\r'));
        assert!(!csv.contains("timestamp"));
        let body: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["name,x,ok", "\"a,b\",5.0000000000000000e-1,true", "c,,false"]);
        assert_eq!(config_echo(&csv), meta(None).config_echo);
        assert!(ResultTable { metadata: meta(Some(1)), ..t }.to_csv().contains("# timestamp = 1\n"));
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_are_rejected() {
        let mut t = ResultTable::new(&[("x", ColumnType::Real)], meta(None));
        t.push(vec![1.0.into(), 2.0.into()]);
    }

    #[test]
    #[should_panic(expected = "expects Real")]
    fn mistyped_cells_are_rejected() {
        let mut t = ResultTable::new(&[("x", ColumnType::Real)], meta(None));
        t.push(vec![true.into()]);
    }
}
