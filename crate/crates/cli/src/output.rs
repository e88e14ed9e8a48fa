//! CSV tables with a `#` footer, metadata JSON, and gnuplot scripts.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        let x = if x == 0.0 { 0.0 } else { x };
        format!("{x:.16e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(x) => x.to_string(),
            Cell::Bool(x) => x.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub footer: Vec<(String, Cell)>,
    /// Per-point numerical failures.
    pub failures: Vec<String>,
    /// Extra payload for the metadata file.
    pub details: Value,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, details: Value::Null, ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn foot(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.footer.push((key.into(), value.into()));
    }

    pub fn fail(&mut self, what: String) {
        self.failures.push(what);
    }

    pub fn to_csv(&self) -> io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let mut out = w.into_inner().map_err(|e| e.into_error())?;
        for (k, v) in &self.footer {
            writeln!(out, "# {k}={}", v.render())?;
        }
        Ok(out)
    }
}

pub fn config_hash(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize)]
pub struct Metadata<'a, C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'a str,
    pub config_hash: String,
    pub config: &'a C,
    pub jobs: usize,
    pub csv: String,
    pub rows: usize,
    pub warnings: &'a [String],
    pub details: &'a Value,
}

/// `out.csv` → `out.meta.json`.
pub fn metadata_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta.json")
}

pub fn write_outputs<C: Serialize>(
    table: &Table,
    subcommand: &str,
    config: &C,
    jobs: usize,
    out: Option<&Path>,
    plot: Option<&Path>,
) -> io::Result<()> {
    let csv = table.to_csv()?;
    let Some(out) = out else {
        io::stdout().write_all(&csv)?;
        return Ok(());
    };
    fs::write(out, &csv)?;
    let meta = Metadata {
        tool: "memchan",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config_hash: config_hash(config),
        config,
        jobs,
        csv: out.display().to_string(),
        rows: table.rows.len(),
        warnings: &table.failures,
        details: &table.details,
    };
    let mut json = serde_json::to_vec_pretty(&meta).map_err(io::Error::other)?;
    json.push(b'\n');
    fs::write(metadata_path(out), json)?;
    if let Some(plot) = plot {
        fs::write(plot, gnuplot_script(table, out))?;
    }
    Ok(())
}

/// Plots every numeric column against the first one.
pub fn gnuplot_script(table: &Table, csv: &Path) -> String {
    let numeric: Vec<usize> = (1..table.header.len())
        .filter(|&c| table.rows.iter().any(|r| matches!(r[c], Cell::Float(_))))
        .collect();
    let mut s = String::new();
    s.push_str("set datafile separator ','\nset datafile commentschars '#'\nset key autotitle columnhead\n");
    s.push_str(&format!("set xlabel '{}'\n", table.header.first().copied().unwrap_or("x")));
    let plots: Vec<String> = numeric
        .iter()
        .map(|c| format!("'{}' using 1:{} with linespoints", csv.display(), c + 1))
        .collect();
    if !plots.is_empty() {
        s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(vec!["g", "capacity_bits", "status"]);
        t.push(vec![0.5.into(), 0.1.into(), "ok".into()]);
        t.push(vec![1.0.into(), Cell::Empty, "failed: a, b".into()]);
        t.foot("rate", -1.0986122886681098);
        t.foot("zero", -0.0);
        let text = String::from_utf8(t.to_csv().unwrap()).unwrap();
        assert_eq!(
            text,
            "g,capacity_bits,status\n\
             5.0000000000000000e-1,1.0000000000000001e-1,ok\n\
             1.0000000000000000e0,,\"failed: a, b\"\n\
             # rate=-1.0986122886681098e0\n\
             # zero=0.0000000000000000e0\n"
        );
    }

    #[test]
    fn hash_tracks_content() {
        let a = serde_json::json!({"g": [0.1, 0.2]});
        let b = serde_json::json!({"g": [0.1, 0.3]});
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_ne!(config_hash(&a), config_hash(&b));
        assert_eq!(config_hash(&a).len(), 64);
    }
}
