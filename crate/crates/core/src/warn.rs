use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Conditions that are recovered from with a defined result but still
/// reported once per run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// Cell with an all-zero expression vector under cosine similarity.
    ZeroNormExpression,
    /// Cell with constant expression under Pearson correlation.
    ZeroVarianceExpression,
    /// Cell positioned at the origin under cosine spatial distance.
    ZeroPosition,
    /// Cell alone in its neighbor scope.
    SingletonScope,
    /// Requested more neighbors than the scope provides.
    ClippedNeighbors,
    /// Cell lacking the label a task needs.
    MissingLabel,
    /// Grouping with no entries.
    EmptyGroup,
}

impl fmt::Display for WarningKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            WarningKind::ZeroNormExpression => "zero_norm_expression",
            WarningKind::ZeroVarianceExpression => "zero_variance_expression",
            WarningKind::ZeroPosition => "zero_position",
            WarningKind::SingletonScope => "singleton_scope",
            WarningKind::ClippedNeighbors => "clipped_neighbors",
            WarningKind::MissingLabel => "missing_label",
            WarningKind::EmptyGroup => "empty_group",
        };
        f.write_str(s)
    }
}

/// Per-run warning counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Warnings(BTreeMap<WarningKind, u64>);

impl Warnings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, kind: WarningKind, n: u64) {
        if n > 0 {
            *self.0.entry(kind).or_default() += n;
        }
    }

    pub fn bump(&mut self, kind: WarningKind) {
        self.add(kind, 1);
    }

    pub fn count(&self, kind: WarningKind) -> u64 {
        self.0.get(&kind).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn merge(&mut self, other: &Warnings) {
        for (&k, &v) in &other.0 {
            self.add(k, v);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (WarningKind, u64)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }
}
