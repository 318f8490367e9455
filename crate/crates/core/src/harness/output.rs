use std::fmt::Display;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use super::ExperimentConfig;
use crate::error::Result;

/// A CSV table with a `# schema=<name> version=1` first line.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        Self {
            schema: schema.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = format!("# schema={} version=1\n", self.schema);
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses text produced by [`Table::to_csv`].
    pub fn parse(text: &str) -> Option<Self> {
        let mut lines = text.lines();
        let first = lines.next()?;
        let schema = first.strip_prefix("# schema=")?.strip_suffix(" version=1")?;
        let columns: Vec<String> = lines.next()?.split(',').map(String::from).collect();
        let rows: Vec<Vec<String>> = lines
            .filter(|l| !l.is_empty())
            .map(|l| l.split(',').map(String::from).collect())
            .collect();
        if rows.iter().any(|r| r.len() != columns.len()) {
            return None;
        }
        Some(Self {
            schema: schema.into(),
            columns,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

pub(crate) fn cell(v: impl Display) -> String {
    v.to_string()
}

/// Files written by an experiment.
#[derive(Clone, Debug, Default, Serialize)]
pub struct OutputFiles {
    pub csv: Vec<PathBuf>,
    pub sidecar: PathBuf,
    pub svg: Vec<PathBuf>,
}

pub(crate) struct Bundle<'a> {
    pub config: &'a ExperimentConfig,
    pub kind: &'a str,
    pub tables: Vec<(&'a str, Table)>,
    pub metadata: Value,
    pub svgs: Vec<(&'a str, String)>,
    pub wall_time_s: f64,
}

impl Bundle<'_> {
    /// Writes `<stem><suffix>.csv` per table, `<stem>.json` and SVGs.
    pub fn write(self, dir: &Path) -> Result<OutputFiles> {
        std::fs::create_dir_all(dir)?;
        let stem = self.config.stem(self.kind);
        let mut files = OutputFiles::default();
        for (suffix, table) in &self.tables {
            let path = dir.join(format!("{stem}{suffix}.csv"));
            std::fs::write(&path, table.to_csv())?;
            files.csv.push(path);
        }
        for (suffix, svg) in &self.svgs {
            let path = dir.join(format!("{stem}{suffix}.svg"));
            std::fs::write(&path, svg)?;
            files.svg.push(path);
        }
        let sidecar = json!({
            "experiment": self.kind,
            "schemas": self.tables.iter().map(|(_, t)| t.schema.clone()).collect::<Vec<_>>(),
            "config": self.config,
            "seed": self.config.seed,
            "library_version": env!("CARGO_PKG_VERSION"),
            "workers": rayon::current_num_threads(),
            "wall_time_s": self.wall_time_s,
            "metadata": self.metadata,
        });
        files.sidecar = dir.join(format!("{stem}.json"));
        std::fs::write(&files.sidecar, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(files)
    }
}
