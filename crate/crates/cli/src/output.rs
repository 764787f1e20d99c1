//! Result bundles on disk.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Format};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// A CSV table. Floats are written with 17 significant digits so they
/// round-trip exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match cell {
                    Cell::Int(v) => write!(out, "{v}").unwrap(),
                    Cell::Float(v) => write!(out, "{v:.16e}").unwrap(),
                    Cell::Text(s) => out.push_str(s),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .header
                    .iter()
                    .zip(row)
                    .map(|(h, c)| {
                        let v = match c {
                            Cell::Int(v) => json!(v),
                            Cell::Float(v) => json!(v),
                            Cell::Text(s) => json!(s),
                        };
                        (h.to_string(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        Value::Array(rows)
    }
}

/// Everything one run produces.
#[derive(Clone, Debug)]
pub struct ResultBundle {
    pub histogram: Table,
    pub wigner: Option<Table>,
    /// Further named tables, e.g. photon-number populations.
    pub extra: Vec<(&'static str, Table)>,
    pub summary: Value,
}

impl ResultBundle {
    pub fn manifest(&self, cfg: &ExperimentConfig) -> Value {
        let mut files = vec!["manifest.json".to_string()];
        for f in &cfg.output.formats {
            match f {
                Format::Csv => {
                    files.push("histogram.csv".into());
                    if self.wigner.is_some() {
                        files.push("wigner.csv".into());
                    }
                    files.extend(self.extra.iter().map(|(n, _)| format!("{n}.csv")));
                }
                Format::Json => files.push("summary.json".into()),
            }
        }
        json!({
            "config": cfg,
            "code_version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.sampling.seed,
            "files": files,
        })
    }

    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<(), CliError> {
        fs::create_dir_all(dir)?;
        let pretty = |v: &Value| serde_json::to_string_pretty(v).expect("json values serialize") + "\n";
        fs::write(dir.join("manifest.json"), pretty(&self.manifest(cfg)))?;
        for f in &cfg.output.formats {
            match f {
                Format::Csv => {
                    fs::write(dir.join("histogram.csv"), self.histogram.to_csv())?;
                    if let Some(w) = &self.wigner {
                        fs::write(dir.join("wigner.csv"), w.to_csv())?;
                    }
                    for (name, t) in &self.extra {
                        fs::write(dir.join(format!("{name}.csv")), t.to_csv())?;
                    }
                }
                Format::Json => {
                    let mut summary = self.summary.clone();
                    if let Value::Object(m) = &mut summary {
                        m.insert("histogram".into(), self.histogram.to_json());
                    }
                    fs::write(dir.join("summary.json"), pretty(&summary))?;
                }
            }
        }
        Ok(())
    }
}
