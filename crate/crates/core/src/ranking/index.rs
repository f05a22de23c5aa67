use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use super::metric::{
    spatial_value, Backend, MetricConfig, NeighborScope, PreparedRows, SpatialMetric,
};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::warn::{WarningKind, Warnings};

/// Which ordering a query walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// Decreasing expression similarity.
    Similar,
    /// Reverse of `Similar`.
    Dissimilar,
    /// Increasing spatial distance.
    Nearest,
    /// Reverse of `Nearest`.
    Farthest,
}

impl Relation {
    pub const ALL: [Relation; 4] = [
        Relation::Similar,
        Relation::Dissimilar,
        Relation::Nearest,
        Relation::Farthest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::Similar => "similar",
            Relation::Dissimilar => "dissimilar",
            Relation::Nearest => "nearest",
            Relation::Farthest => "farthest",
        }
    }

    pub fn is_spatial(self) -> bool {
        matches!(self, Relation::Nearest | Relation::Farthest)
    }

    fn reversed(self) -> bool {
        matches!(self, Relation::Dissimilar | Relation::Farthest)
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "similar" => Ok(Relation::Similar),
            "dissimilar" => Ok(Relation::Dissimilar),
            "nearest" => Ok(Relation::Nearest),
            "farthest" => Ok(Relation::Farthest),
            other => Err(Error::InvalidArgument(format!(
                "unknown relation `{other}`"
            ))),
        }
    }
}

enum SpatialRank {
    Materialized(Vec<Vec<u32>>),
    /// One tree per scope group.
    Tree(Vec<KdTree>),
}

/// Per-cell expression-similarity and spatial-proximity orderings.
///
/// Every ordering excludes the cell itself and breaks ties by ascending
/// cell index; the reversed relations walk the same orderings backwards.
pub struct RankingIndex<'a> {
    dataset: &'a Dataset,
    config: MetricConfig,
    group_of: Vec<u32>,
    group_sizes: Vec<usize>,
    rows: PreparedRows,
    expression: Vec<Vec<u32>>,
    spatial: SpatialRank,
    warnings: Warnings,
}

/// Builds orderings for every cell.
pub fn build_index(dataset: &Dataset, config: MetricConfig) -> Result<RankingIndex<'_>> {
    config.validate()?;
    let n = dataset.len();
    if n > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many cells".into()));
    }

    let groups: Vec<Vec<u32>> = match config.neighbor_scope {
        NeighborScope::Global => vec![(0..n as u32).collect()],
        NeighborScope::WithinSample => dataset
            .samples()
            .values()
            .map(|v| v.iter().map(|&i| i as u32).collect())
            .collect(),
    };
    let mut group_of = vec![0u32; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            group_of[i as usize] = g as u32;
        }
    }

    let mut warnings = Warnings::new();
    for members in &groups {
        if members.len() == 1 {
            warnings.bump(WarningKind::SingletonScope);
        }
    }

    let rows = PreparedRows::new(
        dataset.cells().iter().map(|c| c.expression.as_slice()),
        dataset.panel().len(),
        config.expression_metric,
        config.arcsinh_cofactor,
    );
    let degenerate_kind = match config.expression_metric {
        super::ExpressionMetric::Cosine => Some(WarningKind::ZeroNormExpression),
        super::ExpressionMetric::Pearson => Some(WarningKind::ZeroVarianceExpression),
        super::ExpressionMetric::NegativeEuclidean => None,
    };
    if let Some(kind) = degenerate_kind {
        warnings.add(kind, rows.degenerate.iter().filter(|d| **d).count() as u64);
    }
    if config.spatial_metric == SpatialMetric::CosineDistance {
        let at_origin = dataset
            .cells()
            .iter()
            .filter(|c| c.position.x == 0.0 && c.position.y == 0.0)
            .count();
        warnings.add(WarningKind::ZeroPosition, at_origin as u64);
    }

    let expression: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let members = &groups[group_of[i] as usize];
            let mut keyed: Vec<(f64, u32)> = members
                .iter()
                .filter(|&&j| j as usize != i)
                .map(|&j| (rows.similarity(i, j as usize), j))
                .collect();
            keyed.sort_unstable_by(|a, b| crate::cmp_f64(b.0, a.0).then(a.1.cmp(&b.1)));
            keyed.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let positions: Vec<_> = dataset.cells().iter().map(|c| c.position).collect();
    let use_tree = config.backend == Backend::SpatialAccelerated
        && config.spatial_metric != SpatialMetric::CosineDistance;
    let spatial = if use_tree {
        SpatialRank::Tree(
            groups
                .par_iter()
                .map(|members| {
                    let items: Vec<_> = members
                        .iter()
                        .map(|&j| (j, positions[j as usize]))
                        .collect();
                    KdTree::build(config.spatial_metric, &items)
                })
                .collect(),
        )
    } else {
        let metric = config.spatial_metric;
        SpatialRank::Materialized(
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let members = &groups[group_of[i] as usize];
                    let mut keyed: Vec<(f64, u32)> = members
                        .iter()
                        .filter(|&&j| j as usize != i)
                        .map(|&j| {
                            (
                                spatial_value(metric, positions[i], positions[j as usize]),
                                j,
                            )
                        })
                        .collect();
                    keyed.sort_unstable_by(|a, b| crate::cmp_f64(a.0, b.0).then(a.1.cmp(&b.1)));
                    keyed.into_iter().map(|(_, j)| j).collect()
                })
                .collect(),
        )
    };

    Ok(RankingIndex {
        dataset,
        config,
        group_sizes: groups.iter().map(Vec::len).collect(),
        group_of,
        rows,
        expression,
        spatial,
        warnings,
    })
}

impl<'a> RankingIndex<'a> {
    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn config(&self) -> &MetricConfig {
        &self.config
    }

    /// Backend actually serving spatial queries.
    pub fn backend(&self) -> Backend {
        match self.spatial {
            SpatialRank::Materialized(_) => Backend::Exhaustive,
            SpatialRank::Tree(_) => Backend::SpatialAccelerated,
        }
    }

    pub fn warnings(&self) -> &Warnings {
        &self.warnings
    }

    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    /// Number of other cells in `i`'s scope.
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.group_sizes[self.group_of[i] as usize] - 1
    }

    /// Whether `j` is inside `i`'s neighbor scope.
    pub fn in_scope(&self, i: usize, j: usize) -> bool {
        self.group_of[i] == self.group_of[j]
    }

    /// Expression similarity as used for ranking (after any transform).
    pub fn similarity(&self, i: usize, j: usize) -> f64 {
        self.rows.similarity(i, j)
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let c = self.dataset.cells();
        spatial_value(self.config.spatial_metric, c[i].position, c[j].position)
    }

    /// Similarity for expression relations, distance for spatial ones.
    pub fn score(&self, relation: Relation, i: usize, j: usize) -> f64 {
        if relation.is_spatial() {
            self.distance(i, j)
        } else {
            self.similarity(i, j)
        }
    }

    fn tree_for(&self, i: usize) -> Option<&KdTree> {
        match &self.spatial {
            SpatialRank::Tree(trees) => Some(&trees[self.group_of[i] as usize]),
            SpatialRank::Materialized(_) => None,
        }
    }

    /// The base (non-reversed) ordering for `relation`, materialized.
    fn base_ordering(&self, i: usize, relation: Relation) -> Cow<'_, [u32]> {
        if !relation.is_spatial() {
            return Cow::Borrowed(&self.expression[i]);
        }
        match &self.spatial {
            SpatialRank::Materialized(orders) => Cow::Borrowed(&orders[i]),
            SpatialRank::Tree(_) => {
                let k = self.neighbor_count(i);
                Cow::Owned(self.tree_query(i, Relation::Nearest, k, |_| true))
            }
        }
    }

    fn tree_query(
        &self,
        i: usize,
        relation: Relation,
        k: usize,
        accept: impl Fn(u32) -> bool,
    ) -> Vec<u32> {
        let tree = self.tree_for(i).expect("tree backend");
        let q = self.dataset.cell(i).position;
        let me = i as u32;
        let keep = |j: u32| j != me && accept(j);
        let hits = match relation {
            Relation::Nearest => tree.nearest(q, k, keep),
            Relation::Farthest => tree.farthest(q, k, keep),
            _ => unreachable!("tree answers spatial relations only"),
        };
        hits.into_iter().map(|(_, j)| j).collect()
    }

    /// Full ordering of `i`'s scope for `relation`.
    pub fn ordering(&self, i: usize, relation: Relation) -> Result<Vec<usize>> {
        self.dataset.check_index(i)?;
        let base = self.base_ordering(i, relation);
        let it = base.iter().map(|&j| j as usize);
        Ok(if relation.reversed() {
            it.rev().collect()
        } else {
            it.collect()
        })
    }

    /// First `k` cells of the `relation` ordering (clipped to the scope).
    pub fn top_k(&self, i: usize, relation: Relation, k: usize) -> Result<Vec<usize>> {
        self.dataset.check_index(i)?;
        let k = k.min(self.neighbor_count(i));
        if k == 0 {
            return Ok(Vec::new());
        }
        if relation.is_spatial() && self.tree_for(i).is_some() {
            return Ok(self
                .tree_query(i, relation, k, |_| true)
                .into_iter()
                .map(|j| j as usize)
                .collect());
        }
        let base = self.base_ordering(i, relation);
        Ok(if relation.reversed() {
            base.iter().rev().take(k).map(|&j| j as usize).collect()
        } else {
            base[..k].iter().map(|&j| j as usize).collect()
        })
    }

    pub fn top_k_similar(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.top_k(i, Relation::Similar, k)
    }

    pub fn top_k_dissimilar(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.top_k(i, Relation::Dissimilar, k)
    }

    pub fn top_k_nearest(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.top_k(i, Relation::Nearest, k)
    }

    pub fn top_k_farthest(&self, i: usize, k: usize) -> Result<Vec<usize>> {
        self.top_k(i, Relation::Farthest, k)
    }

    /// Ordering positions `lo..=hi` (1-based), clipped to what exists.
    pub fn rank_window(
        &self,
        i: usize,
        relation: Relation,
        lo: usize,
        hi: usize,
    ) -> Result<Vec<usize>> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidArgument(format!(
                "rank window needs 1 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        let head = self.top_k(i, relation, hi)?;
        Ok(head.into_iter().skip(lo - 1).collect())
    }

    /// First `k` cells of the `relation` ordering that satisfy `accept`.
    pub fn top_k_matching(
        &self,
        i: usize,
        relation: Relation,
        k: usize,
        accept: impl Fn(usize) -> bool,
    ) -> Result<Vec<usize>> {
        self.dataset.check_index(i)?;
        if k == 0 {
            return Ok(Vec::new());
        }
        if relation.is_spatial() && self.tree_for(i).is_some() {
            return Ok(self
                .tree_query(i, relation, k, |j| accept(j as usize))
                .into_iter()
                .map(|j| j as usize)
                .collect());
        }
        let base = self.base_ordering(i, relation);
        let pick = |it: &mut dyn Iterator<Item = &u32>| -> Vec<usize> {
            it.map(|&j| j as usize)
                .filter(|&j| accept(j))
                .take(k)
                .collect()
        };
        Ok(if relation.reversed() {
            pick(&mut base.iter().rev())
        } else {
            pick(&mut base.iter())
        })
    }
}
