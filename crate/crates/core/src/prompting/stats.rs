use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::corpus::CorpusCounts;
use super::prompt::PromptRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthSummary {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
    pub median: f64,
}

impl LengthSummary {
    fn of(mut values: Vec<usize>) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        values.sort_unstable();
        let n = values.len();
        let median = if n % 2 == 1 {
            values[n / 2] as f64
        } else {
            (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
        };
        Self {
            min: values[0],
            max: values[n - 1],
            mean: values.iter().sum::<usize>() as f64 / n as f64,
            median,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub counts: CorpusCounts,
    /// Whitespace-separated tokens per prompt_text.
    pub prompt_tokens: LengthSummary,
    pub distinct_anchors: u64,
    /// Counted once per distinct anchor cell.
    pub cell_type_labels: BTreeMap<String, u64>,
    pub status_labels: BTreeMap<String, u64>,
}

pub fn corpus_stats(path: impl AsRef<Path>) -> Result<CorpusStats> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    corpus_stats_from(BufReader::new(file))
}

pub fn corpus_stats_from<R: BufRead>(reader: R) -> Result<CorpusStats> {
    let mut stats = CorpusStats::default();
    let mut lengths = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<corpus>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PromptRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
                line: n + 1,
                message: e.to_string(),
            })?;
        stats.counts.add(&record);
        lengths.push(record.prompt_text.split_whitespace().count());
        if seen.insert(record.anchor_cell_id.clone()) {
            if let Some(t) = record.labels.cell_type {
                *stats.cell_type_labels.entry(t).or_default() += 1;
            }
            if let Some(s) = record.labels.status {
                *stats.status_labels.entry(s).or_default() += 1;
            }
        }
    }
    stats.distinct_anchors = seen.len() as u64;
    stats.prompt_tokens = LengthSummary::of(lengths);
    Ok(stats)
}
