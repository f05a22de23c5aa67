use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prompt::{Polarity, PromptBuilder, PromptConfig, PromptRecord, Task, FORMAT_VERSION};
use crate::checksum::Hasher;
use crate::data::{dataset_checksum, Split, SplitAssignment};
use crate::error::{Error, Result};
use crate::ranking::{MetricConfig, RankingIndex};
use crate::sentence::CellSentence;
use crate::warn::Warnings;

const CHUNK: usize = 1024;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub records: u64,
    pub by_split: BTreeMap<Split, u64>,
    pub by_polarity: BTreeMap<Polarity, u64>,
    pub by_task: BTreeMap<Task, u64>,
}

impl CorpusCounts {
    pub fn add(&mut self, record: &PromptRecord) {
        self.records += 1;
        *self.by_split.entry(record.split).or_default() += 1;
        *self.by_polarity.entry(record.polarity).or_default() += 1;
        *self.by_task.entry(record.task).or_default() += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub template_version: String,
    pub prompt_config: PromptConfig,
    pub metric_config: MetricConfig,
    pub split_seed: u64,
    pub dataset_checksum: String,
    pub split_checksum: String,
    pub corpus_checksum: String,
    pub counts: CorpusCounts,
    pub warnings: Warnings,
    pub training: super::prompt::TrainingMetadata,
}

/// Manifest path for a corpus file: `<corpus>.manifest.json`.
pub fn manifest_path(corpus: &Path) -> PathBuf {
    let mut name = corpus.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    corpus.with_file_name(name)
}

fn check_inputs(index: &RankingIndex<'_>, split: &SplitAssignment) -> Result<()> {
    if split.len() != index.len() {
        return Err(Error::InvalidArgument(format!(
            "split covers {} cells, dataset has {}",
            split.len(),
            index.len()
        )));
    }
    Ok(())
}

fn polarities(config: &PromptConfig) -> &'static [Polarity] {
    if config.include_negative {
        &[Polarity::Positive, Polarity::Negative]
    } else {
        &[Polarity::Positive]
    }
}

fn records_for(
    builder: &PromptBuilder<'_, '_>,
    i: usize,
    split: Split,
    warnings: &mut Warnings,
) -> Result<Vec<PromptRecord>> {
    let mut out = Vec::with_capacity(2);
    for &p in polarities(builder.config()) {
        if let Some(r) = builder.build(i, p, split, warnings)? {
            out.push(r);
        }
    }
    Ok(out)
}

/// Serialized lines, the records behind them, and their warnings.
type Rendered = (Vec<u8>, Vec<PromptRecord>, Warnings);

/// Writes the corpus as JSON lines to `writer`; the manifest is returned, not written.
pub fn write_corpus<W: Write>(
    index: &RankingIndex<'_>,
    sentences: &[CellSentence],
    split: &SplitAssignment,
    config: &PromptConfig,
    mut writer: W,
) -> Result<CorpusManifest> {
    check_inputs(index, split)?;
    let builder = PromptBuilder::new(index, sentences, config)?;
    let mut hasher = Hasher::new();
    let mut counts = CorpusCounts::default();
    let mut warnings = Warnings::new();
    let n = index.len();
    for start in (0..n).step_by(CHUNK) {
        let end = (start + CHUNK).min(n);
        let chunk: Vec<Result<Rendered>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut w = Warnings::new();
                let recs = records_for(&builder, i, split.of(i), &mut w)?;
                let mut bytes = Vec::new();
                for r in &recs {
                    serde_json::to_writer(&mut bytes, r)?;
                    bytes.push(b'\n');
                }
                Ok((bytes, recs, w))
            })
            .collect();
        for item in chunk {
            let (bytes, recs, w) = item?;
            writer
                .write_all(&bytes)
                .map_err(|e| Error::io("<corpus>", e))?;
            hasher.update(&bytes);
            recs.iter().for_each(|r| counts.add(r));
            warnings.merge(&w);
        }
    }
    writer.flush().map_err(|e| Error::io("<corpus>", e))?;
    Ok(CorpusManifest {
        format_version: FORMAT_VERSION,
        template_version: builder.template().version().to_string(),
        prompt_config: config.clone(),
        metric_config: *index.config(),
        split_seed: split.seed,
        dataset_checksum: dataset_checksum(index.dataset()),
        split_checksum: split.checksum(index.dataset()),
        corpus_checksum: hasher.finish(),
        counts,
        warnings,
        training: config.training.clone(),
    })
}

/// Writes `out_path` and its manifest next to it.
pub fn export_corpus(
    index: &RankingIndex<'_>,
    sentences: &[CellSentence],
    split: &SplitAssignment,
    config: &PromptConfig,
    out_path: impl AsRef<Path>,
) -> Result<CorpusManifest> {
    let out_path = out_path.as_ref();
    let file = File::create(out_path).map_err(|e| Error::io(out_path, e))?;
    let manifest = write_corpus(index, sentences, split, config, BufWriter::new(file))?;
    write_manifest(&manifest, &manifest_path(out_path))?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Sequential record iterator in corpus order.
pub struct PromptStream<'b, 'i, 'd> {
    builder: PromptBuilder<'i, 'd>,
    split: &'b SplitAssignment,
    cell: usize,
    pending: std::vec::IntoIter<PromptRecord>,
    warnings: Warnings,
}

impl<'b, 'i, 'd> PromptStream<'b, 'i, 'd> {
    pub fn new(
        index: &'i RankingIndex<'d>,
        sentences: &'i [CellSentence],
        split: &'b SplitAssignment,
        config: &'i PromptConfig,
    ) -> Result<Self> {
        check_inputs(index, split)?;
        Ok(Self {
            builder: PromptBuilder::new(index, sentences, config)?,
            split,
            cell: 0,
            pending: Vec::new().into_iter(),
            warnings: Warnings::new(),
        })
    }

    pub fn warnings(&self) -> &Warnings {
        &self.warnings
    }
}

impl Iterator for PromptStream<'_, '_, '_> {
    type Item = Result<PromptRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if let Some(r) = self.pending.next() {
                return Some(Ok(r));
            }
            if self.cell >= self.split.len() {
                return None;
            }
            let i = self.cell;
            self.cell += 1;
            match records_for(&self.builder, i, self.split.of(i), &mut self.warnings) {
                Ok(v) => self.pending = v.into_iter(),
                Err(e) => {
                    self.cell = self.split.len();
                    return Some(Err(e));
                }
            }
        }
    }
}
