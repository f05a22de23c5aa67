//! Domain types, ingest and splitting.

mod dataset;
pub mod io;
mod panel;
mod split;

pub use dataset::{CellRecord, Dataset, LabelKind, Point};
pub use io::{
    dataset_checksum, read_dir, read_table, write_dir, write_table, DatasetPaths, Schema,
};
pub use panel::ProteinPanel;
pub use split::{split, Split, SplitAssignment, SplitFractions, Stratify};
