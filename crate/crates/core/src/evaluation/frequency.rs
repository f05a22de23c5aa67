use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::metrics::shares;
use crate::warn::{WarningKind, Warnings};

/// Labels of one evaluated unit, tagged with its cohort.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyEntry {
    pub group: String,
    pub truth: Option<String>,
    pub predicted: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupShares {
    pub n_truth: u64,
    pub n_predicted: u64,
    pub truth: BTreeMap<String, f64>,
    /// Absent when no predictions were supplied for the group.
    pub predicted: Option<BTreeMap<String, f64>>,
}

impl GroupShares {
    /// Largest absolute predicted-minus-truth share difference, in points.
    pub fn max_gap(&self) -> Option<f64> {
        let p = self.predicted.as_ref()?;
        Some(
            self.truth
                .iter()
                .map(|(l, t)| (p.get(l).copied().unwrap_or(0.0) - t).abs())
                .chain(
                    p.iter()
                        .filter(|(l, _)| !self.truth.contains_key(*l))
                        .map(|(_, v)| *v),
                )
                .fold(0.0, f64::max),
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub groups: BTreeMap<String, GroupShares>,
    pub warnings: Warnings,
}

/// Plot-ready share row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRecord {
    pub label: String,
    pub group: String,
    pub source: String,
    pub share: f64,
}

impl FrequencySummary {
    pub fn max_gap(&self) -> Option<f64> {
        self.groups
            .values()
            .filter_map(GroupShares::max_gap)
            .reduce(f64::max)
    }

    pub fn records(&self) -> Vec<ShareRecord> {
        let mut out = Vec::new();
        for (group, g) in &self.groups {
            let sources = [
                ("truth", Some(&g.truth)),
                ("predicted", g.predicted.as_ref()),
            ];
            for (source, map) in sources {
                for (label, &share) in map.into_iter().flatten() {
                    out.push(ShareRecord {
                        label: label.clone(),
                        group: group.clone(),
                        source: source.to_string(),
                        share,
                    });
                }
            }
        }
        out
    }
}

/// Percentage shares per cohort. `groups` lists the expected cohorts; those
/// without any labeled entry are dropped with a warning.
pub fn frequency_summary(
    entries: &[FrequencyEntry],
    vocabulary: &[String],
    groups: &[String],
) -> FrequencySummary {
    let mut by_group: BTreeMap<&str, Vec<&FrequencyEntry>> =
        groups.iter().map(|g| (g.as_str(), Vec::new())).collect();
    for e in entries {
        by_group.entry(e.group.as_str()).or_default().push(e);
    }
    let mut summary = FrequencySummary::default();
    for (group, members) in by_group {
        let truth: Vec<&str> = members.iter().filter_map(|e| e.truth.as_deref()).collect();
        let predicted: Vec<&str> = members
            .iter()
            .filter_map(|e| e.predicted.as_deref())
            .collect();
        let Some(truth_shares) = shares(truth.iter().copied(), vocabulary) else {
            summary.warnings.bump(WarningKind::EmptyGroup);
            continue;
        };
        summary.groups.insert(
            group.to_string(),
            GroupShares {
                n_truth: truth.len() as u64,
                n_predicted: predicted.len() as u64,
                truth: truth_shares,
                predicted: shares(predicted.iter().copied(), vocabulary),
            },
        );
    }
    summary
}

/// Ground-truth cell-type shares per status cohort of a dataset.
pub fn dataset_frequencies(dataset: &crate::data::Dataset) -> FrequencySummary {
    let entries: Vec<FrequencyEntry> = dataset
        .cells()
        .iter()
        .filter_map(|c| {
            Some(FrequencyEntry {
                group: c.status.clone()?,
                truth: c.cell_type.clone(),
                predicted: None,
            })
        })
        .collect();
    frequency_summary(
        &entries,
        dataset.type_vocabulary(),
        dataset.status_vocabulary(),
    )
}
