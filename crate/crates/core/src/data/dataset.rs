use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::panel::ProteinPanel;
use crate::error::{Error, Result};

/// Cell centroid in image pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// One segmented cell: expression row, centroid and optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell_id: String,
    pub sample_id: String,
    pub expression: Vec<f64>,
    pub position: Point,
    pub cell_type: Option<String>,
    /// Clinical outcome of the cell's sample.
    pub status: Option<String>,
}

/// Which label a task reads from a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    CellType,
    Status,
}

impl LabelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelKind::CellType => "cell_type",
            LabelKind::Status => "status",
        }
    }
}

impl std::fmt::Display for LabelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for LabelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell_type" | "cell-type" | "type" => Ok(LabelKind::CellType),
            "status" => Ok(LabelKind::Status),
            other => Err(Error::InvalidArgument(format!(
                "unknown label target `{other}`"
            ))),
        }
    }
}

impl CellRecord {
    pub fn label(&self, kind: LabelKind) -> Option<&str> {
        match kind {
            LabelKind::CellType => self.cell_type.as_deref(),
            LabelKind::Status => self.status.as_deref(),
        }
    }
}

/// Validated, immutable collection of cells over a fixed panel.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    panel: ProteinPanel,
    cells: Vec<CellRecord>,
    type_vocabulary: Vec<String>,
    status_vocabulary: Vec<String>,
    samples: BTreeMap<String, Vec<usize>>,
    sample_status: BTreeMap<String, Option<String>>,
}

impl Dataset {
    /// Builds a dataset with vocabularies taken from the labels present.
    pub fn new(panel: ProteinPanel, cells: Vec<CellRecord>) -> Result<Self> {
        Self::with_vocabularies(panel, cells, None, None)
    }

    /// Builds a dataset against explicit label vocabularies. Labels outside
    /// a given vocabulary are rejected.
    pub fn with_vocabularies(
        panel: ProteinPanel,
        mut cells: Vec<CellRecord>,
        type_vocabulary: Option<Vec<String>>,
        status_vocabulary: Option<Vec<String>>,
    ) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Empty("dataset has no cells".into()));
        }
        for cell in &mut cells {
            normalize_label(&mut cell.cell_type);
            normalize_label(&mut cell.status);
        }

        let m = panel.len();
        let mut ids = HashSet::with_capacity(cells.len());
        let mut samples: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut sample_status: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (i, cell) in cells.iter().enumerate() {
            if cell.cell_id.is_empty() {
                return Err(Error::Integrity(format!(
                    "cell at index {i} has an empty cell_id"
                )));
            }
            if !ids.insert(cell.cell_id.as_str()) {
                return Err(Error::Integrity(format!(
                    "duplicate cell_id `{}`",
                    cell.cell_id
                )));
            }
            if cell.expression.len() != m {
                return Err(Error::Integrity(format!(
                    "cell `{}` has {} expression values, panel has {m}",
                    cell.cell_id,
                    cell.expression.len()
                )));
            }
            if let Some(j) = cell
                .expression
                .iter()
                .position(|v| !v.is_finite() || *v < 0.0)
            {
                return Err(Error::Integrity(format!(
                    "cell `{}` has invalid expression {} for `{}`",
                    cell.cell_id,
                    cell.expression[j],
                    panel.name(j)
                )));
            }
            if !cell.position.x.is_finite() || !cell.position.y.is_finite() {
                return Err(Error::Integrity(format!(
                    "cell `{}` has non-finite coordinates",
                    cell.cell_id
                )));
            }
            samples.entry(cell.sample_id.clone()).or_default().push(i);
            match sample_status.get(&cell.sample_id) {
                None => {
                    sample_status.insert(cell.sample_id.clone(), cell.status.clone());
                }
                Some(prev) if *prev != cell.status => {
                    return Err(Error::Integrity(format!(
                        "sample `{}` has inconsistent status: `{}` vs `{}` (cell `{}`)",
                        cell.sample_id,
                        prev.as_deref().unwrap_or(""),
                        cell.status.as_deref().unwrap_or(""),
                        cell.cell_id
                    )));
                }
                Some(_) => {}
            }
        }

        let type_vocabulary = resolve_vocabulary(
            "cell_type",
            type_vocabulary,
            cells.iter().filter_map(|c| c.cell_type.as_deref()),
        )?;
        let status_vocabulary = resolve_vocabulary(
            "status",
            status_vocabulary,
            cells.iter().filter_map(|c| c.status.as_deref()),
        )?;

        Ok(Self {
            panel,
            cells,
            type_vocabulary,
            status_vocabulary,
            samples,
            sample_status,
        })
    }

    pub fn panel(&self) -> &ProteinPanel {
        &self.panel
    }

    pub fn cells(&self) -> &[CellRecord] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &CellRecord {
        &self.cells[i]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn check_index(&self, i: usize) -> Result<()> {
        if i < self.cells.len() {
            Ok(())
        } else {
            Err(Error::CellIndex {
                index: i,
                len: self.cells.len(),
            })
        }
    }

    pub fn type_vocabulary(&self) -> &[String] {
        &self.type_vocabulary
    }

    pub fn status_vocabulary(&self) -> &[String] {
        &self.status_vocabulary
    }

    pub fn vocabulary(&self, kind: LabelKind) -> &[String] {
        match kind {
            LabelKind::CellType => &self.type_vocabulary,
            LabelKind::Status => &self.status_vocabulary,
        }
    }

    /// Cell indices per sample, in ascending index order.
    pub fn samples(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.samples
    }

    pub fn sample_cells(&self, sample_id: &str) -> Option<&[usize]> {
        self.samples.get(sample_id).map(Vec::as_slice)
    }

    pub fn sample_status(&self, sample_id: &str) -> Option<&str> {
        self.sample_status.get(sample_id).and_then(|s| s.as_deref())
    }

    pub fn position_of(&self, cell_id: &str) -> Option<usize> {
        self.cells.iter().position(|c| c.cell_id == cell_id)
    }
}

fn normalize_label(label: &mut Option<String>) {
    if let Some(s) = label {
        let t = s.trim();
        if t.is_empty() {
            *label = None;
        } else if t.len() != s.len() {
            *label = Some(t.to_string());
        }
    }
}

fn resolve_vocabulary<'a>(
    what: &str,
    given: Option<Vec<String>>,
    present: impl Iterator<Item = &'a str>,
) -> Result<Vec<String>> {
    match given {
        Some(vocab) => {
            let mut seen = BTreeSet::new();
            for v in &vocab {
                if v.trim().is_empty() || !seen.insert(v.trim()) {
                    return Err(Error::Integrity(format!(
                        "{what} vocabulary has an empty or repeated entry `{v}`"
                    )));
                }
            }
            for label in present {
                if !seen.contains(label) {
                    return Err(Error::Integrity(format!(
                        "{what} label `{label}` is not in the vocabulary"
                    )));
                }
            }
            Ok(vocab.into_iter().map(|v| v.trim().to_string()).collect())
        }
        None => Ok(present
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(str::to_string)
            .collect()),
    }
}
