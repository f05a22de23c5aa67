use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Point;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpressionMetric {
    #[default]
    Cosine,
    Pearson,
    NegativeEuclidean,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialMetric {
    #[default]
    Euclidean,
    L1,
    CosineDistance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborScope {
    #[default]
    WithinSample,
    Global,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Exhaustive,
    /// k-d tree answers spatial queries; expression orderings stay exhaustive.
    SpatialAccelerated,
}

macro_rules! enum_names {
    ($ty:ty { $($variant:ident => $name:literal $(| $alias:literal)*),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name $(| $alias)* => Ok(Self::$variant),)+
                    other => Err(Error::InvalidArgument(format!(
                        concat!("unknown ", stringify!($ty), " `{}`"), other
                    ))),
                }
            }
        }
    };
}

enum_names!(ExpressionMetric {
    Cosine => "cosine",
    Pearson => "pearson",
    NegativeEuclidean => "negative_euclidean" | "euclidean" | "neg-euclidean",
});

enum_names!(SpatialMetric {
    Euclidean => "euclidean",
    L1 => "l1",
    CosineDistance => "cosine_distance" | "cosine",
});

enum_names!(NeighborScope {
    WithinSample => "within_sample" | "sample",
    Global => "global",
});

enum_names!(Backend {
    Exhaustive => "exhaustive",
    SpatialAccelerated => "spatial_accelerated" | "accelerated" | "kdtree",
});

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub expression_metric: ExpressionMetric,
    pub spatial_metric: SpatialMetric,
    pub neighbor_scope: NeighborScope,
    pub backend: Backend,
    /// When set, expression is mapped through `asinh(x / cofactor)` before
    /// similarities are computed.
    pub arcsinh_cofactor: Option<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            expression_metric: ExpressionMetric::Cosine,
            spatial_metric: SpatialMetric::Euclidean,
            neighbor_scope: NeighborScope::WithinSample,
            backend: Backend::Exhaustive,
            arcsinh_cofactor: None,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        match self.arcsinh_cofactor {
            Some(c) if !(c.is_finite() && c > 0.0) => Err(Error::InvalidArgument(format!(
                "arcsinh cofactor must be positive, got {c}"
            ))),
            _ => Ok(()),
        }
    }
}

/// A metric value plus whether a degenerate-input convention was applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measure {
    pub value: f64,
    pub degenerate: bool,
}

impl Measure {
    fn ok(value: f64) -> Self {
        Self {
            value,
            degenerate: false,
        }
    }

    fn degenerate(value: f64) -> Self {
        Self {
            value,
            degenerate: true,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Similarity of two expression rows; larger is more similar.
///
/// Zero-norm rows under cosine and constant rows under Pearson yield 0.
pub fn expression_similarity(a: &[f64], b: &[f64], metric: ExpressionMetric) -> Result<Measure> {
    if a.len() != b.len() {
        return Err(Error::InvalidArgument(format!(
            "expression lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite expression value".into()));
    }
    Ok(match metric {
        ExpressionMetric::Cosine => {
            let (na, nb) = (dot(a, a).sqrt(), dot(b, b).sqrt());
            if na == 0.0 || nb == 0.0 {
                Measure::degenerate(0.0)
            } else {
                Measure::ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
            }
        }
        ExpressionMetric::Pearson => {
            let n = a.len() as f64;
            let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
            let ca: Vec<f64> = a.iter().map(|v| v - ma).collect();
            let cb: Vec<f64> = b.iter().map(|v| v - mb).collect();
            let (na, nb) = (dot(&ca, &ca).sqrt(), dot(&cb, &cb).sqrt());
            if na == 0.0 || nb == 0.0 {
                Measure::degenerate(0.0)
            } else {
                Measure::ok((dot(&ca, &cb) / (na * nb)).clamp(-1.0, 1.0))
            }
        }
        ExpressionMetric::NegativeEuclidean => {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            Measure::ok(-d2.sqrt())
        }
    })
}

/// Distance between two centroids; smaller is closer.
///
/// Under cosine distance a position at the origin yields 1.
pub fn spatial_distance(p: Point, q: Point, metric: SpatialMetric) -> Measure {
    match metric {
        SpatialMetric::Euclidean | SpatialMetric::L1 => Measure::ok(spatial_value(metric, p, q)),
        SpatialMetric::CosineDistance => {
            let degenerate = (p.x == 0.0 && p.y == 0.0) || (q.x == 0.0 && q.y == 0.0);
            Measure {
                value: spatial_value(metric, p, q),
                degenerate,
            }
        }
    }
}

/// Raw distance value shared by every spatial code path, so that exhaustive
/// and tree-backed orderings see bit-identical keys.
#[inline]
pub(crate) fn spatial_value(metric: SpatialMetric, p: Point, q: Point) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    match metric {
        SpatialMetric::Euclidean => (dx * dx + dy * dy).sqrt(),
        SpatialMetric::L1 => dx.abs() + dy.abs(),
        SpatialMetric::CosineDistance => {
            let np = (p.x * p.x + p.y * p.y).sqrt();
            let nq = (q.x * q.x + q.y * q.y).sqrt();
            if np == 0.0 || nq == 0.0 {
                1.0
            } else {
                let c = (p.x * q.x + p.y * q.y) / (np * nq);
                (1.0 - c).max(0.0)
            }
        }
    }
}

/// Expression rows pre-transformed so that similarity is one pass.
pub(crate) struct PreparedRows {
    metric: ExpressionMetric,
    m: usize,
    data: Vec<f64>,
    pub(crate) degenerate: Vec<bool>,
}

impl PreparedRows {
    pub(crate) fn new<'a>(
        rows: impl Iterator<Item = &'a [f64]>,
        m: usize,
        metric: ExpressionMetric,
        arcsinh_cofactor: Option<f64>,
    ) -> Self {
        let mut data = Vec::new();
        let mut degenerate = Vec::new();
        let mut buf = vec![0.0; m];
        for row in rows {
            for (dst, &v) in buf.iter_mut().zip(row) {
                *dst = match arcsinh_cofactor {
                    Some(c) => (v / c).asinh(),
                    None => v,
                };
            }
            let mut bad = false;
            match metric {
                ExpressionMetric::Cosine => {
                    let n = dot(&buf, &buf).sqrt();
                    if n == 0.0 {
                        bad = true;
                    } else {
                        buf.iter_mut().for_each(|v| *v /= n);
                    }
                }
                ExpressionMetric::Pearson => {
                    let mean = buf.iter().sum::<f64>() / m as f64;
                    buf.iter_mut().for_each(|v| *v -= mean);
                    let n = dot(&buf, &buf).sqrt();
                    if n == 0.0 {
                        bad = true;
                        buf.iter_mut().for_each(|v| *v = 0.0);
                    } else {
                        buf.iter_mut().for_each(|v| *v /= n);
                    }
                }
                ExpressionMetric::NegativeEuclidean => {}
            }
            data.extend_from_slice(&buf);
            degenerate.push(bad);
        }
        Self {
            metric,
            m,
            data,
            degenerate,
        }
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    #[inline]
    pub(crate) fn similarity(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        match self.metric {
            ExpressionMetric::Cosine | ExpressionMetric::Pearson => dot(a, b),
            ExpressionMetric::NegativeEuclidean => -a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sim(a: &[f64], b: &[f64], m: ExpressionMetric) -> Measure {
        expression_similarity(a, b, m).unwrap()
    }

    #[test]
    fn cosine_examples() {
        let c = ExpressionMetric::Cosine;
        assert_abs_diff_eq!(
            sim(&[2.0, 5.0, 1.0], &[2.0, 5.0, 1.0], c).value,
            1.0,
            epsilon = 1e-15
        );
        assert_eq!(sim(&[1.0, 0.0], &[0.0, 1.0], c).value, 0.0);
        // 32 / sqrt(14 * 77)
        assert_abs_diff_eq!(
            sim(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], c).value,
            0.974_631_846_197_076_2,
            epsilon = 1e-12
        );
        let z = sim(&[0.0, 0.0], &[1.0, 1.0], c);
        assert_eq!(z.value, 0.0);
        assert!(z.degenerate);
    }

    #[test]
    fn pearson_and_negative_euclidean() {
        assert_abs_diff_eq!(
            sim(
                &[1.0, 2.0, 3.0],
                &[2.0, 4.0, 6.5],
                ExpressionMetric::Pearson
            )
            .value,
            0.997_948_715_788_673_3,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            sim(
                &[1.0, 2.0, 3.0],
                &[3.0, 2.0, 1.0],
                ExpressionMetric::Pearson
            )
            .value,
            -1.0,
            epsilon = 1e-15
        );
        let flat = sim(&[2.0, 2.0], &[1.0, 3.0], ExpressionMetric::Pearson);
        assert!(flat.degenerate && flat.value == 0.0);
        assert_eq!(
            sim(
                &[0.0, 0.0],
                &[3.0, 4.0],
                ExpressionMetric::NegativeEuclidean
            )
            .value,
            -5.0
        );
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(expression_similarity(&[1.0], &[1.0, 2.0], ExpressionMetric::Cosine).is_err());
    }

    #[test]
    fn spatial_examples() {
        let (o, p) = (Point::new(0.0, 0.0), Point::new(3.0, 4.0));
        assert_eq!(spatial_distance(o, p, SpatialMetric::Euclidean).value, 5.0);
        assert_eq!(spatial_distance(o, p, SpatialMetric::L1).value, 7.0);
        assert_eq!(spatial_distance(p, p, SpatialMetric::Euclidean).value, 0.0);
        let c = spatial_distance(o, p, SpatialMetric::CosineDistance);
        assert!(c.degenerate && c.value == 1.0);
        let q = Point::new(-3.0, -4.0);
        assert_abs_diff_eq!(
            spatial_distance(p, q, SpatialMetric::CosineDistance).value,
            2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn prepared_rows_match_direct_formula() {
        let rows = [
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![0.0, 0.0, 0.0],
        ];
        for metric in [
            ExpressionMetric::Cosine,
            ExpressionMetric::Pearson,
            ExpressionMetric::NegativeEuclidean,
        ] {
            let p = PreparedRows::new(rows.iter().map(Vec::as_slice), 3, metric, None);
            for i in 0..3 {
                for j in 0..3 {
                    let want = sim(&rows[i], &rows[j], metric).value;
                    if i == j && p.degenerate[i] {
                        continue;
                    }
                    assert_abs_diff_eq!(p.similarity(i, j), want, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!("l1".parse::<SpatialMetric>().unwrap(), SpatialMetric::L1);
        assert_eq!(
            "pearson".parse::<ExpressionMetric>().unwrap(),
            ExpressionMetric::Pearson
        );
        assert!("manhattan".parse::<SpatialMetric>().is_err());
    }
}
