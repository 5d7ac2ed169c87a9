//! Tables and the run summary. Floats are written as `{:.12e}`, missing
//! values as empty fields.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use tgsim_core::params::{DerivedParams, InteractionStrength, LatticeMapping, ValidityReport};
use tgsim_core::model::LatticeParams;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(usize),
    S(String),
    B(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.12e}"),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::I(i)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::F)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

pub struct Table {
    pub name: &'static str,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, header: &[&'static str]) -> Self {
        Self { name, header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Output directory plus a record of every file written into it.
pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write_table(&mut self, table: &Table) -> std::io::Result<()> {
        let file = format!("{}.csv", table.name);
        let mut w = csv::Writer::from_path(self.dir.join(&file))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        self.written.push(file);
        Ok(())
    }

    pub fn write_summary(&self, summary: &Summary) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
        fs::write(self.dir.join("summary.json"), text + "\n")
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derived: Option<DerivedParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionStrength>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closed_form_correction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity: Option<ValidityReport>,
    /// Derivative-loss horizon bound [s].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mapping: Option<LatticeMapping>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeParams>,
    pub headline: Map<String, Value>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn new(config: RunConfig) -> Self {
        Self {
            status: "ok",
            error: None,
            config,
            derived: None,
            interaction: None,
            closed_form_correction: None,
            validity: None,
            t_max: None,
            mapping: None,
            lattice: None,
            headline: Map::new(),
            warnings: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.headline.insert(key.to_string(), v);
    }
}
