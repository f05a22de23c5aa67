use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::template::Template;
use crate::data::{CellRecord, Split};
use crate::error::{Error, Result};
use crate::ranking::{RankingIndex, Relation};
use crate::sentence::CellSentence;
use crate::warn::{WarningKind, Warnings};

pub const FORMAT_VERSION: u32 = 1;

/// Separator between cell type and status in multi-task targets.
pub const MULTI_TASK_SEPARATOR: &str = "; ";

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    #[default]
    CellType,
    Status,
    MultiTask,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::CellType => "cell_type",
            Task::Status => "status",
            Task::MultiTask => "multi_task",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cell_type" | "cell-type" | "type" => Ok(Task::CellType),
            "status" => Ok(Task::Status),
            "multi_task" | "multi-task" | "multi" => Ok(Task::MultiTask),
            other => Err(Error::InvalidArgument(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
        }
    }
}

/// Inclusive 1-based rank window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RankWindow {
    pub lo: usize,
    pub hi: usize,
}

impl RankWindow {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "rank window needs 1 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> usize {
        self.hi - self.lo + 1
    }
}

impl Default for RankWindow {
    fn default() -> Self {
        Self { lo: 1, hi: 3 }
    }
}

impl fmt::Display for RankWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for RankWindow {
    type Err = Error;

    /// Accepts `lo-hi`, `lo:hi`, or a single rank.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("bad rank window `{s}`"));
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        match s.split_once(['-', ':']) {
            Some((a, b)) => Self::new(parse(a)?, parse(b)?),
            None => {
                let v = parse(s)?;
                Self::new(v, v)
            }
        }
    }
}

/// Fine-tuning settings recorded alongside a corpus for downstream trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingMetadata {
    pub base_model: String,
    pub per_device_batch_size: u32,
    pub learning_rate: f64,
    pub lr_scheduler: String,
    pub epochs: u32,
    pub warmup_ratio: f64,
}

impl Default for TrainingMetadata {
    fn default() -> Self {
        Self {
            base_model: "Llama-3.2-1B".into(),
            per_device_batch_size: 8,
            learning_rate: 2e-4,
            lr_scheduler: "cosine".into(),
            epochs: 5,
            warmup_ratio: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    /// Neighbors per list in positive prompts.
    pub k: usize,
    pub negative_window: RankWindow,
    pub task: Task,
    pub template_version: String,
    pub include_negative: bool,
    /// Seed of the split the corpus is labeled with; neighbor choice ignores it.
    pub seed: u64,
    /// Keep only the first `max_tokens` proteins of each rendered sentence.
    pub max_tokens: Option<usize>,
    pub training: TrainingMetadata,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            k: 3,
            negative_window: RankWindow::default(),
            task: Task::CellType,
            template_version: super::template::DEFAULT_TEMPLATE_VERSION.into(),
            include_negative: true,
            seed: 0,
            max_tokens: None,
            training: TrainingMetadata::default(),
        }
    }
}

impl PromptConfig {
    pub fn validate(&self) -> Result<()> {
        RankWindow::new(self.negative_window.lo, self.negative_window.hi)?;
        if self.max_tokens == Some(0) {
            return Err(Error::InvalidArgument(
                "max_tokens must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborIds {
    pub spatial: Vec<String>,
    pub expression: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Labels {
    pub cell_type: Option<String>,
    pub status: Option<String>,
}

impl Labels {
    pub fn of(cell: &CellRecord) -> Self {
        Self {
            cell_type: cell.cell_type.clone(),
            status: cell.status.clone(),
        }
    }
}

/// One corpus line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptRecord {
    pub format_version: u32,
    pub anchor_cell_id: String,
    pub polarity: Polarity,
    pub task: Task,
    pub prompt_text: String,
    pub neighbor_ids: NeighborIds,
    pub target_text: String,
    pub labels: Labels,
    pub split: Split,
    pub template_version: String,
}

/// Task instruction and expected answer; `None` when a needed label is missing.
pub fn render_task(template: &Template, task: Task, labels: &Labels) -> Option<(String, String)> {
    let (section, target) = match task {
        Task::CellType => ("task_cell_type", labels.cell_type.clone()?),
        Task::Status => ("task_status", labels.status.clone()?),
        Task::MultiTask => (
            "task_multi",
            format!(
                "{}{MULTI_TASK_SEPARATOR}{}",
                labels.cell_type.as_deref()?,
                labels.status.as_deref()?
            ),
        ),
    };
    Some((template.section(section).to_string(), target))
}

/// Renders prompts for single anchors against a fixed index and sentence set.
pub struct PromptBuilder<'i, 'd> {
    index: &'i RankingIndex<'d>,
    sentences: &'i [CellSentence],
    config: &'i PromptConfig,
    template: Template,
}

impl<'i, 'd> PromptBuilder<'i, 'd> {
    pub fn new(
        index: &'i RankingIndex<'d>,
        sentences: &'i [CellSentence],
        config: &'i PromptConfig,
    ) -> Result<Self> {
        config.validate()?;
        if sentences.len() != index.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sentences for {} cells",
                sentences.len(),
                index.len()
            )));
        }
        let template = Template::builtin(&config.template_version)?;
        Ok(Self {
            index,
            sentences,
            config,
            template,
        })
    }

    pub fn with_template(mut self, template: Template) -> Self {
        self.template = template;
        self
    }

    pub fn template(&self) -> &Template {
        &self.template
    }

    pub fn config(&self) -> &PromptConfig {
        self.config
    }

    /// Neighbor lists (spatial, expression) for `polarity`.
    pub fn neighbors(&self, i: usize, polarity: Polarity) -> Result<(Vec<usize>, Vec<usize>)> {
        match polarity {
            Polarity::Positive => Ok((
                self.index.top_k_nearest(i, self.config.k)?,
                self.index.top_k_similar(i, self.config.k)?,
            )),
            Polarity::Negative => {
                let w = self.config.negative_window;
                Ok((
                    self.index.rank_window(i, Relation::Farthest, w.lo, w.hi)?,
                    self.index
                        .rank_window(i, Relation::Dissimilar, w.lo, w.hi)?,
                ))
            }
        }
    }

    /// Full record for anchor `i`, or `None` when the task label is missing.
    pub fn build(
        &self,
        i: usize,
        polarity: Polarity,
        split: Split,
        warnings: &mut Warnings,
    ) -> Result<Option<PromptRecord>> {
        self.index.dataset().check_index(i)?;
        let cell = self.index.dataset().cell(i);
        let labels = Labels::of(cell);
        let Some((instruction, target_text)) =
            render_task(&self.template, self.config.task, &labels)
        else {
            warnings.bump(WarningKind::MissingLabel);
            return Ok(None);
        };
        let (spatial, expression) = self.neighbors(i, polarity)?;
        let wanted = match polarity {
            Polarity::Positive => self.config.k,
            Polarity::Negative => self.config.negative_window.width(),
        };
        if spatial.len() < wanted || expression.len() < wanted {
            warnings.bump(WarningKind::ClippedNeighbors);
        }
        let prompt_text = self.render(i, polarity, &spatial, &expression, &instruction);
        let ids = |v: &[usize]| {
            v.iter()
                .map(|&j| self.index.dataset().cell(j).cell_id.clone())
                .collect()
        };
        Ok(Some(PromptRecord {
            format_version: FORMAT_VERSION,
            anchor_cell_id: cell.cell_id.clone(),
            polarity,
            task: self.config.task,
            prompt_text,
            neighbor_ids: NeighborIds {
                spatial: ids(&spatial),
                expression: ids(&expression),
            },
            target_text,
            labels,
            split,
            template_version: self.template.version().to_string(),
        }))
    }

    fn render(
        &self,
        anchor: usize,
        polarity: Polarity,
        spatial: &[usize],
        expression: &[usize],
        instruction: &str,
    ) -> String {
        let t = &self.template;
        let sentence = |j: usize| t.sentence(&self.sentences[j].render(self.config.max_tokens));
        let (near, similar) = match polarity {
            Polarity::Positive => ("relation_near", "relation_similar"),
            Polarity::Negative => ("relation_far", "relation_dissimilar"),
        };
        let mut parts = vec![
            t.section("preamble").to_string(),
            t.section("anchor_header").to_string(),
            sentence(anchor),
        ];
        if !spatial.is_empty() {
            parts.push(t.header("spatial_header", near));
            parts.extend(spatial.iter().map(|&j| sentence(j)));
        }
        if !expression.is_empty() {
            parts.push(t.header("expression_header", similar));
            parts.extend(expression.iter().map(|&j| sentence(j)));
        }
        parts.push(instruction.to_string());
        parts.join("\n")
    }
}

/// Positive record: nearest-K spatial and most-similar-K expression neighbors.
pub fn build_positive_prompt(
    index: &RankingIndex<'_>,
    sentences: &[CellSentence],
    i: usize,
    config: &PromptConfig,
    split: Split,
    warnings: &mut Warnings,
) -> Result<Option<PromptRecord>> {
    PromptBuilder::new(index, sentences, config)?.build(i, Polarity::Positive, split, warnings)
}

/// Negative record: farthest and most-dissimilar cells in the configured window.
pub fn build_negative_prompt(
    index: &RankingIndex<'_>,
    sentences: &[CellSentence],
    i: usize,
    config: &PromptConfig,
    split: Split,
    warnings: &mut Warnings,
) -> Result<Option<PromptRecord>> {
    PromptBuilder::new(index, sentences, config)?.build(i, Polarity::Negative, split, warnings)
}

/// Checks the fixed section order via the embedded markers and returns the
/// number of cell sentences in the prompt.
pub fn check_sections(prompt_text: &str) -> Result<usize> {
    use super::template::{
        ANCHOR_MARKER, CELL_MARKER, EXPRESSION_MARKER, SPATIAL_MARKER, TASK_MARKER,
    };
    let anchor = prompt_text.find(ANCHOR_MARKER);
    let task = prompt_text.find(TASK_MARKER);
    let (Some(anchor), Some(task)) = (anchor, task) else {
        return Err(Error::Template("prompt lacks anchor or task marker".into()));
    };
    let mut last = anchor;
    for marker in [SPATIAL_MARKER, EXPRESSION_MARKER] {
        if let Some(p) = prompt_text.find(marker) {
            if p < last {
                return Err(Error::Template(format!("`{marker}` out of order")));
            }
            last = p;
        }
    }
    if task < last {
        return Err(Error::Template("task section is not last".into()));
    }
    Ok(prompt_text.matches(CELL_MARKER).count())
}
