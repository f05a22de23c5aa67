//! Expression-similarity and spatial-proximity rankings.

mod export;
mod index;
mod kdtree;
mod metric;

pub use export::{
    write_dense_matrix, write_neighbors, MatrixKind, NeighborRecord, DEFAULT_MATRIX_CAP,
};
pub use index::{build_index, RankingIndex, Relation};
pub use metric::{
    expression_similarity, spatial_distance, Backend, ExpressionMetric, Measure, MetricConfig,
    NeighborScope, SpatialMetric,
};
