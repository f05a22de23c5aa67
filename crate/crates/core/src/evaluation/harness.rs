use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frequency::{frequency_summary, FrequencyEntry, FrequencySummary};
use super::metrics::{mean_std, ClassMetrics, Confusion};
use crate::checksum::Hasher;
use crate::data::{split, Dataset, LabelKind, Split, SplitAssignment, SplitFractions, Stratify};
use crate::error::{Error, Result};
use crate::prompting::RankWindow;
use crate::ranking::{
    build_index, ExpressionMetric, MetricConfig, RankingIndex, Relation, SpatialMetric,
};
use crate::refclass::{
    aggregate, predict_cells, CentroidModel, ClassifierConfig, Prediction, PredictionRow,
    TrainLabels,
};

pub const DEFAULT_SEEDS: [u64; 3] = [0, 1, 2];
pub const DEFAULT_K_SWEEP: [usize; 6] = [0, 1, 2, 3, 5, 8];

/// Settings for one evaluation run. `classifier.k == 0` selects the
/// nearest-centroid baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metric: MetricConfig,
    pub classifier: ClassifierConfig,
    pub fractions: SplitFractions,
    pub stratify: Stratify,
    pub seeds: Vec<u64>,
    pub negative_window: RankWindow,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            metric: MetricConfig::default(),
            classifier: ClassifierConfig::default(),
            fractions: SplitFractions::default(),
            stratify: Stratify::CellType,
            seeds: DEFAULT_SEEDS.to_vec(),
            negative_window: RankWindow::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.fractions.validate()?;
        RankWindow::new(self.negative_window.lo, self.negative_window.hi)?;
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one seed is required".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// `None` when every unit abstained.
    pub accuracy: Option<f64>,
    pub n_evaluated: u64,
    pub n_abstained: u64,
    pub split_checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: LabelKind,
    /// Pooled over seeds: trace / n_evaluated of `confusion`.
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: Confusion,
    pub n_evaluated: u64,
    pub n_abstained: u64,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedResult>,
    /// Mean and sample sd of per-seed accuracies.
    pub mean: f64,
    pub std: f64,
    /// Digest of the per-seed split checksums.
    pub split_checksum: String,
    /// Share of negative-window neighbors carrying the anchor's label.
    pub negative_agreement: Option<f64>,
}

/// Predictions for one seed, in evaluation order.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub split: SplitAssignment,
    pub rows: Vec<PredictionRow>,
    pub groups: Vec<Option<String>>,
}

impl SeedRun {
    fn tally(&self, vocabulary: &[String]) -> Result<(Confusion, u64)> {
        let mut c = Confusion::empty(vocabulary);
        let mut abstained = 0;
        for r in &self.rows {
            match (&r.truth, &r.predicted) {
                (Some(t), Some(p)) => c.add(t, p)?,
                (Some(_), None) => abstained += 1,
                _ => {}
            }
        }
        Ok((c, abstained))
    }

    pub fn frequency_entries(&self) -> Vec<FrequencyEntry> {
        self.rows
            .iter()
            .zip(&self.groups)
            .filter_map(|(r, g)| {
                Some(FrequencyEntry {
                    group: g.clone()?,
                    truth: r.truth.clone(),
                    predicted: r.predicted.clone(),
                })
            })
            .collect()
    }
}

fn one_hot(label: &str, vocabulary: &[String]) -> Prediction {
    Prediction {
        label: Some(label.to_string()),
        scores: vocabulary
            .iter()
            .filter(|v| *v == label)
            .map(|v| (v.clone(), 1.0))
            .collect(),
    }
}

fn predict(
    index: &RankingIndex<'_>,
    train: &TrainLabels,
    cells: &[usize],
    config: &ClassifierConfig,
) -> Result<Vec<Prediction>> {
    if config.k > 0 {
        return predict_cells(index, train, cells, config);
    }
    let dataset = index.dataset();
    if train.labeled_count() == 0 {
        return Ok(vec![Prediction::abstain(); cells.len()]);
    }
    let model = CentroidModel::fit(dataset, train)?;
    Ok(cells
        .iter()
        .map(|&i| {
            one_hot(
                model.predict(&dataset.cell(i).expression),
                train.vocabulary(),
            )
        })
        .collect())
}

/// Predicts held-out units for one seed: test cells for cell types, samples
/// with test cells (voting through those cells only) for status.
pub fn run_seed(index: &RankingIndex<'_>, config: &EvalConfig, seed: u64) -> Result<SeedRun> {
    let dataset = index.dataset();
    let assignment = split(dataset, config.fractions, config.stratify, seed)?;
    let kind = config.classifier.label_target;
    let train = TrainLabels::from_split(dataset, &assignment, kind);
    let cfg = config.classifier;
    let test = assignment.test();
    let (rows, groups) = match kind {
        LabelKind::CellType => {
            let preds = predict(index, &train, &test, &cfg)?;
            let rows = test
                .iter()
                .zip(preds)
                .map(|(&i, p)| PredictionRow {
                    id: dataset.cell(i).cell_id.clone(),
                    score: p.score(),
                    predicted: p.label,
                    truth: dataset.cell(i).cell_type.clone(),
                })
                .collect();
            let groups = test
                .iter()
                .map(|&i| dataset.cell(i).status.clone())
                .collect();
            (rows, groups)
        }
        LabelKind::Status => {
            let mut rows = Vec::new();
            let mut groups = Vec::new();
            for (sample, cells) in dataset.samples() {
                let held: Vec<usize> = cells
                    .iter()
                    .copied()
                    .filter(|&i| assignment.of(i) == Split::Test)
                    .collect();
                if held.is_empty() {
                    continue;
                }
                let per_cell = predict(index, &train, &held, &cfg)?;
                let p = aggregate(&per_cell, train.vocabulary());
                let truth = dataset.sample_status(sample).map(String::from);
                rows.push(PredictionRow {
                    id: sample.clone(),
                    score: p.score(),
                    predicted: p.label,
                    truth: truth.clone(),
                });
                groups.push(truth);
            }
            (rows, groups)
        }
    };
    Ok(SeedRun {
        seed,
        split: assignment,
        rows,
        groups,
    })
}

fn negative_agreement(
    index: &RankingIndex<'_>,
    run: &SeedRun,
    window: RankWindow,
    kind: LabelKind,
) -> Result<Option<f64>> {
    let dataset = index.dataset();
    let (mut same, mut total) = (0u64, 0u64);
    for i in run.split.test() {
        let Some(own) = dataset.cell(i).label(kind) else {
            continue;
        };
        for rel in [Relation::Farthest, Relation::Dissimilar] {
            for j in index.rank_window(i, rel, window.lo, window.hi)? {
                total += 1;
                same += (dataset.cell(j).label(kind) == Some(own)) as u64;
            }
        }
    }
    Ok((total > 0).then(|| same as f64 / total as f64))
}

/// Seed-averaged report over `config.seeds` against a prebuilt index.
pub fn evaluate_with(index: &RankingIndex<'_>, config: &EvalConfig) -> Result<EvalReport> {
    config.validate()?;
    if config.classifier.k > 0 {
        config.classifier.validate()?;
    }
    let kind = config.classifier.label_target;
    let vocabulary = index.dataset().vocabulary(kind);
    let runs: Vec<SeedRun> = config
        .seeds
        .iter()
        .map(|&s| run_seed(index, config, s))
        .collect::<Result<_>>()?;
    let mut pooled = Confusion::empty(vocabulary);
    let mut per_seed = Vec::new();
    let mut digest = Hasher::new();
    let mut abstained = 0;
    let mut agreements = Vec::new();
    for run in &runs {
        let (c, a) = run.tally(vocabulary)?;
        let checksum = run.split.checksum(index.dataset());
        digest.update(format!("{}\t{checksum}\n", run.seed));
        if let Some(g) = negative_agreement(index, run, config.negative_window, kind)? {
            agreements.push(g);
        }
        pooled.merge(&c);
        abstained += a;
        per_seed.push(SeedResult {
            seed: run.seed,
            accuracy: c.accuracy(),
            n_evaluated: c.total(),
            n_abstained: a,
            split_checksum: checksum,
        });
    }
    let accs: Vec<f64> = per_seed.iter().filter_map(|s| s.accuracy).collect();
    let (mean, std) = mean_std(&accs);
    Ok(EvalReport {
        task: kind,
        accuracy: pooled.accuracy().unwrap_or(f64::NAN),
        per_class: pooled.per_class(),
        n_evaluated: pooled.total(),
        confusion: pooled,
        n_abstained: abstained,
        seeds: config.seeds.clone(),
        per_seed,
        mean,
        std,
        split_checksum: digest.finish(),
        negative_agreement: (!agreements.is_empty()).then(|| mean_std(&agreements).0),
    })
}

pub fn evaluate(dataset: &Dataset, config: &EvalConfig) -> Result<EvalReport> {
    let index = build_index(dataset, config.metric)?;
    evaluate_with(&index, config)
}

/// Predicted-vs-truth shares per status cohort for the first seed.
pub fn predicted_frequencies(
    index: &RankingIndex<'_>,
    config: &EvalConfig,
) -> Result<FrequencySummary> {
    let config = EvalConfig {
        classifier: ClassifierConfig {
            label_target: LabelKind::CellType,
            ..config.classifier
        },
        ..config.clone()
    };
    config.validate()?;
    let run = run_seed(index, &config, config.seeds[0])?;
    let d = index.dataset();
    Ok(frequency_summary(
        &run.frequency_entries(),
        d.type_vocabulary(),
        d.status_vocabulary(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    K,
    NegativeWindow,
    ExpressionMetric,
    SpatialMetric,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::K => "k",
            SweepAxis::NegativeWindow => "negative_window",
            SweepAxis::ExpressionMetric => "expression_metric",
            SweepAxis::SpatialMetric => "spatial_metric",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "k" => Ok(SweepAxis::K),
            "negative_window" | "negative-window" => Ok(SweepAxis::NegativeWindow),
            "expression_metric" | "expression-metric" => Ok(SweepAxis::ExpressionMetric),
            "spatial_metric" | "spatial-metric" => Ok(SweepAxis::SpatialMetric),
            other => Err(Error::InvalidArgument(format!(
                "unknown sweep axis `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum AxisValue {
    K(usize),
    Window(RankWindow),
    Expression(ExpressionMetric),
    Spatial(SpatialMetric),
}

impl AxisValue {
    fn parse(axis: SweepAxis, s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match axis {
            SweepAxis::K => AxisValue::K(
                s.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad K value `{s}`")))?,
            ),
            SweepAxis::NegativeWindow => AxisValue::Window(s.parse()?),
            SweepAxis::ExpressionMetric => AxisValue::Expression(s.parse()?),
            SweepAxis::SpatialMetric => AxisValue::Spatial(s.parse()?),
        })
    }

    fn label(&self) -> String {
        match self {
            AxisValue::K(k) => k.to_string(),
            AxisValue::Window(w) => w.to_string(),
            AxisValue::Expression(m) => m.to_string(),
            AxisValue::Spatial(m) => m.to_string(),
        }
    }

    fn apply(&self, base: &EvalConfig) -> EvalConfig {
        let mut c = base.clone();
        match *self {
            AxisValue::K(k) => c.classifier.k = k,
            AxisValue::Window(w) => c.negative_window = w,
            AxisValue::Expression(m) => c.metric.expression_metric = m,
            AxisValue::Spatial(m) => c.metric.spatial_metric = m,
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub config: EvalConfig,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub split_checksum: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Flat tab-separated summary, one line per axis value.
    pub fn to_tsv(&self) -> String {
        let mut out = format!(
            "{}\taccuracy\tmean\tstd\tn_evaluated\tn_abstained\tnegative_agreement\tsplit_checksum\n",
            self.axis
        );
        for r in &self.rows {
            let neg = r
                .report
                .negative_agreement
                .map(|v| v.to_string())
                .unwrap_or_default();
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.value,
                r.report.accuracy,
                r.report.mean,
                r.report.std,
                r.report.n_evaluated,
                r.report.n_abstained,
                neg,
                r.report.split_checksum
            ));
        }
        out
    }
}

/// One report per axis value with every other setting held fixed. All values
/// are parsed before anything runs.
pub fn sweep(
    dataset: &Dataset,
    axis: SweepAxis,
    values: &[String],
    base: &EvalConfig,
) -> Result<SweepTable> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep needs at least one value".into(),
        ));
    }
    base.validate()?;
    let parsed: Vec<AxisValue> = values
        .iter()
        .map(|v| AxisValue::parse(axis, v))
        .collect::<Result<_>>()?;
    let configs: Vec<EvalConfig> = parsed.iter().map(|v| v.apply(base)).collect();
    for c in &configs {
        c.validate()?;
    }
    let rebuild = matches!(axis, SweepAxis::ExpressionMetric | SweepAxis::SpatialMetric);
    let shared = if rebuild {
        None
    } else {
        Some(build_index(dataset, base.metric)?)
    };
    let reports: Vec<EvalReport> = configs
        .par_iter()
        .map(|c| match &shared {
            Some(index) => evaluate_with(index, c),
            None => evaluate(dataset, c),
        })
        .collect::<Result<_>>()?;
    let split_checksum = reports[0].split_checksum.clone();
    debug_assert!(reports.iter().all(|r| r.split_checksum == split_checksum));
    Ok(SweepTable {
        axis,
        split_checksum,
        rows: parsed
            .iter()
            .zip(configs)
            .zip(reports)
            .map(|((v, config), report)| SweepRow {
                value: v.label(),
                config,
                report,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthConfig};

    fn data() -> Dataset {
        generate(&SynthConfig {
            n_samples: 2,
            cells_per_sample: 120,
            n_types: 3,
            n_proteins: 9,
            separation: 3.0,
            ..SynthConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn report_invariants() {
        let d = data();
        let r = evaluate(&d, &EvalConfig::default()).unwrap();
        assert_eq!(r.confusion.total(), r.n_evaluated);
        assert!((r.accuracy - r.confusion.trace() as f64 / r.n_evaluated as f64).abs() < 1e-12);
        let accs: Vec<f64> = r.per_seed.iter().filter_map(|s| s.accuracy).collect();
        let lo = accs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo <= r.mean && r.mean <= hi);
        assert_eq!(r, evaluate(&d, &EvalConfig::default()).unwrap());
    }

    #[test]
    fn k_sweep_shares_split() {
        let d = data();
        let values: Vec<String> = ["0", "1", "3", "5"].map(String::from).to_vec();
        let t = sweep(&d, SweepAxis::K, &values, &EvalConfig::default()).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t
            .rows
            .iter()
            .all(|r| r.report.split_checksum == t.split_checksum));
        assert_eq!(t.to_tsv().lines().count(), 5);
        assert!(sweep(
            &d,
            SweepAxis::K,
            &["1".into(), "x".into()],
            &EvalConfig::default()
        )
        .is_err());
    }

    #[test]
    fn status_by_sample() {
        let d = generate(&SynthConfig {
            n_samples: 6,
            cells_per_sample: 40,
            n_types: 3,
            n_proteins: 9,
            separation: 5.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let cfg = EvalConfig {
            classifier: ClassifierConfig {
                label_target: LabelKind::Status,
                ..Default::default()
            },
            stratify: Stratify::Sample,
            fractions: SplitFractions::new(0.5, 0.0, 0.5).unwrap(),
            metric: MetricConfig {
                neighbor_scope: crate::ranking::NeighborScope::Global,
                ..Default::default()
            },
            seeds: vec![0],
            ..Default::default()
        };
        let r = evaluate(&d, &cfg).unwrap();
        assert_eq!(r.n_evaluated + r.n_abstained, 3);
    }
}
