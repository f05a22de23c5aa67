//! Delimited-text ingest and canonical serialization of datasets.
//!
//! A dataset directory holds `cells.csv` (header row, one cell per row),
//! `panel.txt` (one protein per line, fixing panel order) and optionally
//! `schema.toml` mapping logical fields to column names.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::dataset::{CellRecord, Dataset, Point};
use super::panel::ProteinPanel;
use crate::checksum::Hasher;
use crate::error::{Error, Result};

pub const TABLE_FILE: &str = "cells.csv";
pub const PANEL_FILE: &str = "panel.txt";
pub const SCHEMA_FILE: &str = "schema.toml";

/// Column mapping for a cell table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Schema {
    pub cell_id: String,
    pub sample_id: String,
    pub x: String,
    pub y: String,
    /// Optional label columns; an absent column leaves the label missing.
    pub cell_type: String,
    pub status: String,
    /// Protein column names in panel order. Defaults to the panel names.
    pub proteins: Option<Vec<String>>,
    /// Single-character delimiter; inferred from the file extension when unset.
    pub delimiter: Option<String>,
    pub type_vocabulary: Option<Vec<String>>,
    pub status_vocabulary: Option<Vec<String>>,
}

impl Default for Schema {
    fn default() -> Self {
        Self {
            cell_id: "cell_id".into(),
            sample_id: "sample_id".into(),
            x: "x".into(),
            y: "y".into(),
            cell_type: "cell_type".into(),
            status: "status".into(),
            proteins: None,
            delimiter: None,
            type_vocabulary: None,
            status_vocabulary: None,
        }
    }
}

impl Schema {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    fn delimiter_for(&self, path: &Path) -> Result<u8> {
        if let Some(d) = &self.delimiter {
            let d = if d == "\\t" { "\t" } else { d.as_str() };
            return match d.as_bytes() {
                [b] => Ok(*b),
                _ => Err(Error::Schema(format!("delimiter `{d}` must be one byte"))),
            };
        }
        Ok(match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") | Some("txt") => b'\t',
            _ => b',',
        })
    }
}

/// Reads a cell table against `panel` and `schema`. Row order becomes cell
/// index order.
pub fn read_table(path: impl AsRef<Path>, panel: ProteinPanel, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let delimiter = schema.delimiter_for(path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_table_from(file, delimiter, panel, schema)
}

pub fn read_table_from<R: Read>(
    reader: R,
    delimiter: u8,
    panel: ProteinPanel,
    schema: &Schema,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let require = |name: &str| {
        columns
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_string(),
            })
    };

    let id_col = require(&schema.cell_id)?;
    let sample_col = require(&schema.sample_id)?;
    let x_col = require(&schema.x)?;
    let y_col = require(&schema.y)?;
    let type_col = columns.get(schema.cell_type.as_str()).copied();
    let status_col = columns.get(schema.status.as_str()).copied();

    let protein_names: Vec<&str> = match &schema.proteins {
        Some(cols) => {
            if cols.len() != panel.len() {
                return Err(Error::Schema(format!(
                    "schema lists {} protein columns, panel has {}",
                    cols.len(),
                    panel.len()
                )));
            }
            cols.iter().map(String::as_str).collect()
        }
        None => panel.names().iter().map(String::as_str).collect(),
    };
    let protein_cols = protein_names
        .iter()
        .map(|n| require(n))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let row = r + 1;
        let record = record?;
        let field = |c: usize| record.get(c).unwrap_or("");
        let number = |c: usize| -> Result<f64> {
            let raw = field(c);
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("`{raw}` is not finite"),
                })
            }
        };
        let mut expression = Vec::with_capacity(protein_cols.len());
        for &c in &protein_cols {
            let v = number(c)?;
            if v < 0.0 {
                return Err(Error::Parse {
                    row,
                    column: headers[c].to_string(),
                    message: format!("negative intensity {v}"),
                });
            }
            expression.push(v);
        }
        let label =
            |col: Option<usize>| col.map(field).filter(|s| !s.is_empty()).map(str::to_string);
        cells.push(CellRecord {
            cell_id: field(id_col).to_string(),
            sample_id: field(sample_col).to_string(),
            expression,
            position: Point::new(number(x_col)?, number(y_col)?),
            cell_type: label(type_col),
            status: label(status_col),
        });
    }

    Dataset::with_vocabularies(
        panel,
        cells,
        schema.type_vocabulary.clone(),
        schema.status_vocabulary.clone(),
    )
}

/// Canonical comma-separated serialization with the default schema.
pub fn write_table<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    let mut header = vec!["cell_id", "sample_id", "x", "y", "cell_type", "status"];
    header.extend(dataset.panel().names().iter().map(String::as_str));
    w.write_record(&header)?;
    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for c in dataset.cells() {
        row.clear();
        row.push(c.cell_id.clone());
        row.push(c.sample_id.clone());
        row.push(c.position.x.to_string());
        row.push(c.position.y.to_string());
        row.push(c.cell_type.clone().unwrap_or_default());
        row.push(c.status.clone().unwrap_or_default());
        row.extend(c.expression.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

/// Digest over the canonical panel and table bytes.
pub fn dataset_checksum(dataset: &Dataset) -> String {
    let mut h = Hasher::new();
    h.update(dataset.panel().to_text());
    write_table(dataset, &mut h).expect("hashing never fails");
    h.finish()
}

/// Paths making up a dataset directory.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub table: PathBuf,
    pub panel: PathBuf,
    pub schema: Option<PathBuf>,
}

impl DatasetPaths {
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let schema = dir.join(SCHEMA_FILE);
        Self {
            table: dir.join(TABLE_FILE),
            panel: dir.join(PANEL_FILE),
            schema: schema.exists().then_some(schema),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        let panel = ProteinPanel::read(&self.panel)?;
        let schema = match &self.schema {
            Some(p) => Schema::read(p)?,
            None => Schema::default(),
        };
        read_table(&self.table, panel, &schema)
    }
}

/// Loads a dataset directory.
pub fn read_dir(dir: impl AsRef<Path>) -> Result<Dataset> {
    DatasetPaths::in_dir(dir).load()
}

/// Writes `cells.csv`, `panel.txt` and a `schema.toml` pinning the label
/// vocabularies into `dir`, creating it if needed.
pub fn write_dir(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let panel_path = dir.join(PANEL_FILE);
    std::fs::write(&panel_path, dataset.panel().to_text())
        .map_err(|e| Error::io(&panel_path, e))?;
    let schema = Schema {
        type_vocabulary: Some(dataset.type_vocabulary().to_vec()),
        status_vocabulary: Some(dataset.status_vocabulary().to_vec()),
        ..Schema::default()
    };
    let schema_path = dir.join(SCHEMA_FILE);
    let text = toml::to_string(&schema).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(&schema_path, text).map_err(|e| Error::io(&schema_path, e))?;
    let table_path = dir.join(TABLE_FILE);
    let file = File::create(&table_path).map_err(|e| Error::io(&table_path, e))?;
    write_table(dataset, BufWriter::new(file))
}
