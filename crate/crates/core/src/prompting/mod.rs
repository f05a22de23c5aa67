//! Prompt construction and corpus export.

mod corpus;
mod prompt;
mod stats;
mod template;

pub use corpus::{
    export_corpus, manifest_path, read_manifest, write_corpus, write_manifest, CorpusCounts,
    CorpusManifest, PromptStream,
};
pub use prompt::{
    build_negative_prompt, build_positive_prompt, check_sections, render_task, Labels, NeighborIds,
    Polarity, PromptBuilder, PromptConfig, PromptRecord, RankWindow, Task, TrainingMetadata,
    FORMAT_VERSION, MULTI_TASK_SEPARATOR,
};
pub use stats::{corpus_stats, corpus_stats_from, CorpusStats, LengthSummary};
pub use template::{
    Template, ANCHOR_MARKER, CELL_MARKER, DEFAULT_TEMPLATE_VERSION, EXPRESSION_MARKER,
    SPATIAL_MARKER, TASK_MARKER,
};
