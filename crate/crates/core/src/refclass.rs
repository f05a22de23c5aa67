//! Nearest-neighbor reference classifier over the ranking index.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, LabelKind, SplitAssignment};
use crate::error::{Error, Result};
use crate::ranking::{ExpressionMetric, RankingIndex, Relation};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    Uniform,
    SimilarityWeighted,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    ExpressionOnly,
    SpatialOnly,
    #[default]
    Both,
}

impl FromStr for Weighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Self::Uniform),
            "similarity_weighted" | "similarity-weighted" | "weighted" => {
                Ok(Self::SimilarityWeighted)
            }
            _ => Err(Error::InvalidArgument(format!("unknown weighting `{s}`"))),
        }
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expression_only" | "expression-only" | "expression" => Ok(Self::ExpressionOnly),
            "spatial_only" | "spatial-only" | "spatial" => Ok(Self::SpatialOnly),
            "both" => Ok(Self::Both),
            _ => Err(Error::InvalidArgument(format!(
                "unknown combine mode `{s}`"
            ))),
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ExpressionOnly => "expression_only",
            Self::SpatialOnly => "spatial_only",
            Self::Both => "both",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub k: usize,
    pub weighting: Weighting,
    pub combine: Combine,
    pub label_target: LabelKind,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            k: 3,
            weighting: Weighting::Uniform,
            combine: Combine::Both,
            label_target: LabelKind::CellType,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument(
                "neighbor classifier needs k >= 1; use the centroid baseline for k = 0".into(),
            ));
        }
        Ok(())
    }
}

/// Labels visible to the classifier, indexed by cell.
#[derive(Debug, Clone)]
pub struct TrainLabels {
    kind: LabelKind,
    vocabulary: Vec<String>,
    labels: Vec<Option<u32>>,
}

impl TrainLabels {
    /// Labels of cells for which `keep` holds; everything else is hidden.
    pub fn from_mask(dataset: &Dataset, kind: LabelKind, keep: impl Fn(usize) -> bool) -> Self {
        let vocabulary = dataset.vocabulary(kind).to_vec();
        let labels = dataset
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let l = c.label(kind).filter(|_| keep(i))?;
                vocabulary.iter().position(|v| v == l).map(|p| p as u32)
            })
            .collect();
        Self {
            kind,
            vocabulary,
            labels,
        }
    }

    /// Training-split labels only.
    pub fn from_split(dataset: &Dataset, split: &SplitAssignment, kind: LabelKind) -> Self {
        Self::from_mask(dataset, kind, |i| split.of(i) == crate::data::Split::Train)
    }

    pub fn kind(&self) -> LabelKind {
        self.kind
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn get(&self, i: usize) -> Option<u32> {
        self.labels.get(i).copied().flatten()
    }

    pub fn is_labeled(&self, i: usize) -> bool {
        self.get(i).is_some()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// A label with its vote fractions, or an explicit abstention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Option<String>,
    /// Vote fraction per label; sums to 1 unless abstained.
    pub scores: BTreeMap<String, f64>,
}

impl Prediction {
    pub fn abstain() -> Self {
        Self {
            label: None,
            scores: BTreeMap::new(),
        }
    }

    pub fn is_abstention(&self) -> bool {
        self.label.is_none()
    }

    pub fn score(&self) -> f64 {
        self.label
            .as_ref()
            .and_then(|l| self.scores.get(l))
            .copied()
            .unwrap_or(0.0)
    }

    /// Plurality over `votes` (indexed like `vocabulary`), first in vocabulary order on ties.
    fn from_votes(votes: &[f64], vocabulary: &[String]) -> Self {
        let total: f64 = votes.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return Self::abstain();
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        let scores = votes
            .iter()
            .zip(vocabulary)
            .filter(|(&v, _)| v > 0.0)
            .map(|(&v, l)| (l.clone(), v / total))
            .collect();
        Self {
            label: Some(vocabulary[best].clone()),
            scores,
        }
    }
}

fn vote_weight(index: &RankingIndex<'_>, relation: Relation, i: usize, j: usize) -> f64 {
    let s = index.score(relation, i, j);
    match relation {
        Relation::Similar => match index.config().expression_metric {
            ExpressionMetric::NegativeEuclidean => 1.0 / (1.0 - s),
            _ => ((1.0 + s) / 2.0).max(0.0),
        },
        _ => 1.0 / (1.0 + s),
    }
}

/// Raw (unnormalized) votes of `i`'s labeled neighbors.
fn neighbor_votes(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    i: usize,
    config: &ClassifierConfig,
) -> Result<Vec<f64>> {
    let relations: &[Relation] = match config.combine {
        Combine::ExpressionOnly => &[Relation::Similar],
        Combine::SpatialOnly => &[Relation::Nearest],
        Combine::Both => &[Relation::Nearest, Relation::Similar],
    };
    let mut votes = vec![0.0; train.vocabulary.len()];
    for &rel in relations {
        let hits = index.top_k_matching(i, rel, config.k, |j| j != i && train.is_labeled(j))?;
        let weights: Vec<f64> = match config.weighting {
            Weighting::Uniform => vec![1.0; hits.len()],
            Weighting::SimilarityWeighted => {
                let w: Vec<f64> = hits
                    .iter()
                    .map(|&j| vote_weight(index, rel, i, j))
                    .collect();
                if w.iter().sum::<f64>() > 0.0 {
                    w
                } else {
                    vec![1.0; hits.len()]
                }
            }
        };
        // each relation contributes equally regardless of its hit count
        let total: f64 = weights.iter().sum();
        for (&j, w) in hits.iter().zip(&weights) {
            let c = train.get(j).expect("filtered to labeled") as usize;
            votes[c] += w / total;
        }
    }
    Ok(votes)
}

fn check(index: &RankingIndex<'_>, train: &TrainLabels, config: &ClassifierConfig) -> Result<()> {
    config.validate()?;
    if train.labels.len() != index.len() {
        return Err(Error::InvalidArgument(
            "training labels do not match the dataset".into(),
        ));
    }
    if train.kind != config.label_target {
        return Err(Error::InvalidArgument(
            "training labels are for a different target".into(),
        ));
    }
    Ok(())
}

/// Plurality label among the `k` most similar and/or nearest labeled training
/// cells; the anchor itself never votes.
pub fn predict_cell(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    i: usize,
    config: &ClassifierConfig,
) -> Result<Prediction> {
    check(index, train, config)?;
    let votes = neighbor_votes(index, train, i, config)?;
    Ok(Prediction::from_votes(&votes, &train.vocabulary))
}

pub fn predict_cell_type(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    i: usize,
    config: &ClassifierConfig,
) -> Result<Prediction> {
    let config = ClassifierConfig {
        label_target: LabelKind::CellType,
        ..*config
    };
    predict_cell(index, train, i, &config)
}

/// Predicts every cell in `cells` in parallel, preserving order.
pub fn predict_cells(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    cells: &[usize],
    config: &ClassifierConfig,
) -> Result<Vec<Prediction>> {
    check(index, train, config)?;
    cells
        .par_iter()
        .map(|&i| {
            let votes = neighbor_votes(index, train, i, config)?;
            Ok(Prediction::from_votes(&votes, &train.vocabulary))
        })
        .collect()
}

/// Sample-level status: per-cell vote fractions averaged over the sample.
pub fn predict_status(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    sample_id: &str,
    config: &ClassifierConfig,
) -> Result<Prediction> {
    let config = ClassifierConfig {
        label_target: LabelKind::Status,
        ..*config
    };
    let cells = index
        .dataset()
        .sample_cells(sample_id)
        .ok_or_else(|| Error::UnknownLabel(format!("sample `{sample_id}`")))?;
    let per_cell = predict_cells(index, train, cells, &config)?;
    Ok(aggregate(&per_cell, &train.vocabulary))
}

/// Mean of per-cell vote fractions; abstaining cells are skipped.
pub fn aggregate(per_cell: &[Prediction], vocabulary: &[String]) -> Prediction {
    let mut sums = vec![0.0; vocabulary.len()];
    let mut n = 0usize;
    for p in per_cell.iter().filter(|p| !p.is_abstention()) {
        n += 1;
        for (c, l) in vocabulary.iter().enumerate() {
            sums[c] += p.scores.get(l).copied().unwrap_or(0.0);
        }
    }
    if n == 0 {
        return Prediction::abstain();
    }
    let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    Prediction::from_votes(&means, vocabulary)
}

/// Per-label mean expression of labeled training cells.
#[derive(Debug, Clone)]
pub struct CentroidModel {
    vocabulary: Vec<String>,
    /// Unit-normalized centroids; `None` for labels with no training cell.
    centroids: Vec<Option<Vec<f64>>>,
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    (n > 0.0).then(|| v.iter().map(|x| x / n).collect())
}

impl CentroidModel {
    pub fn fit(dataset: &Dataset, train: &TrainLabels) -> Result<Self> {
        let m = dataset.panel().len();
        let k = train.vocabulary.len();
        let mut sums = vec![vec![0.0; m]; k];
        let mut counts = vec![0usize; k];
        for (i, cell) in dataset.cells().iter().enumerate() {
            if let Some(c) = train.get(i) {
                let c = c as usize;
                counts[c] += 1;
                sums[c]
                    .iter_mut()
                    .zip(&cell.expression)
                    .for_each(|(s, x)| *s += x);
            }
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::Empty("no labeled training cells".into()));
        }
        let centroids = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &c)| {
                (c > 0)
                    .then(|| s.iter().map(|x| x / c as f64).collect::<Vec<_>>())
                    .and_then(|v| normalized(&v).or(Some(vec![0.0; m])))
            })
            .collect();
        Ok(Self {
            vocabulary: train.vocabulary.clone(),
            centroids,
        })
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Labels without a training cell; the baseline cannot predict them.
    pub fn missing_labels(&self) -> Vec<&str> {
        self.vocabulary
            .iter()
            .zip(&self.centroids)
            .filter(|(_, c)| c.is_none())
            .map(|(l, _)| l.as_str())
            .collect()
    }

    /// Label of the centroid with the highest cosine similarity.
    pub fn predict(&self, expression: &[f64]) -> &str {
        let x = normalized(expression).unwrap_or_else(|| vec![0.0; expression.len()]);
        let mut best: Option<(usize, f64)> = None;
        for (c, centroid) in self.centroids.iter().enumerate() {
            let Some(centroid) = centroid else { continue };
            let s: f64 = centroid.iter().zip(&x).map(|(a, b)| a * b).sum();
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((c, s));
            }
        }
        &self.vocabulary[best.expect("fit guarantees a centroid").0]
    }
}

/// Centroid label of cell `i` under a model fitted on `train`.
pub fn nearest_centroid_baseline(
    dataset: &Dataset,
    train: &TrainLabels,
    i: usize,
) -> Result<String> {
    dataset.check_index(i)?;
    let model = CentroidModel::fit(dataset, train)?;
    Ok(model.predict(&dataset.cell(i).expression).to_string())
}

/// One row of an exported prediction table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub id: String,
    pub predicted: Option<String>,
    pub truth: Option<String>,
    pub score: f64,
}

pub fn write_predictions<W: std::io::Write>(rows: &[PredictionRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "predicted", "true", "score"])?;
    for r in rows {
        w.write_record([
            r.id.as_str(),
            r.predicted.as_deref().unwrap_or(""),
            r.truth.as_deref().unwrap_or(""),
            &r.score.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<predictions>", e))?;
    Ok(())
}
