mod common;

use common::{cosine, euclid, random_dataset, rng, scope};
use imcprompt::data::Dataset;
use imcprompt::ranking::{
    build_index, expression_similarity, spatial_distance, Backend, ExpressionMetric, MetricConfig,
    NeighborScope, Relation, SpatialMetric,
};
use proptest::prelude::*;

fn config(scope: NeighborScope, backend: Backend, spatial: SpatialMetric) -> MetricConfig {
    MetricConfig {
        neighbor_scope: scope,
        backend,
        spatial_metric: spatial,
        ..MetricConfig::default()
    }
}

fn spatial_oracle(d: &Dataset, i: usize, global: bool, metric: SpatialMetric) -> Vec<usize> {
    let p = d.cell(i).position;
    let dist = |j: usize| {
        let q = d.cell(j).position;
        match metric {
            SpatialMetric::Euclidean => euclid(p, q),
            SpatialMetric::L1 => (p.x - q.x).abs() + (p.y - q.y).abs(),
            SpatialMetric::CosineDistance => spatial_distance(p, q, metric).value,
        }
    };
    let mut v = scope(d, i, global);
    v.sort_by(|&a, &b| dist(a).partial_cmp(&dist(b)).unwrap().then(a.cmp(&b)));
    v
}

#[test]
fn exhaustive_spatial_matches_oracle() {
    let mut r = rng(1);
    for case in 0..20 {
        let d = random_dataset(&mut r, 60, 5, 1 + case % 3);
        for metric in [SpatialMetric::Euclidean, SpatialMetric::L1] {
            for global in [false, true] {
                let s = if global {
                    NeighborScope::Global
                } else {
                    NeighborScope::WithinSample
                };
                let idx = build_index(&d, config(s, Backend::Exhaustive, metric)).unwrap();
                for i in 0..d.len() {
                    let oracle = spatial_oracle(&d, i, global, metric);
                    assert_eq!(idx.ordering(i, Relation::Nearest).unwrap(), oracle);
                    let mut rev = oracle.clone();
                    rev.reverse();
                    assert_eq!(idx.ordering(i, Relation::Farthest).unwrap(), rev);
                    assert_eq!(
                        idx.top_k_nearest(i, 3).unwrap(),
                        oracle[..3.min(oracle.len())]
                    );
                    assert_eq!(
                        idx.rank_window(i, Relation::Farthest, 7, 9).unwrap(),
                        rev.iter().skip(6).take(3).copied().collect::<Vec<_>>()
                    );
                }
            }
        }
    }
}

#[test]
fn expression_ordering_matches_oracle() {
    let mut r = rng(2);
    for _ in 0..20 {
        let d = random_dataset(&mut r, 50, 6, 2);
        let idx = build_index(&d, MetricConfig::default()).unwrap();
        for i in 0..d.len() {
            let order = idx.ordering(i, Relation::Similar).unwrap();
            let mut expect = scope(&d, i, false);
            expect.sort_unstable();
            let mut got = order.clone();
            got.sort_unstable();
            assert_eq!(got, expect, "ordering is a permutation of the scope");
            assert!(!order.contains(&i));
            let e = |j: usize| cosine(&d.cell(i).expression, &d.cell(j).expression);
            for w in order.windows(2) {
                assert!(e(w[0]) >= e(w[1]) - 1e-12);
                if d.cell(w[0]).expression == d.cell(w[1]).expression {
                    assert!(w[0] < w[1], "identical rows tie by index");
                }
            }
            let k = order.len();
            let mut rev = order.clone();
            rev.reverse();
            assert_eq!(idx.top_k_dissimilar(i, k).unwrap(), rev);
            assert_eq!(idx.top_k_similar(i, 0).unwrap(), Vec::<usize>::new());
            assert_eq!(
                idx.rank_window(i, Relation::Similar, 1, 3).unwrap(),
                idx.top_k_similar(i, 3).unwrap()
            );
        }
    }
}

#[test]
fn accelerated_matches_exhaustive() {
    let mut r = rng(3);
    for case in 0..12 {
        let n = [40, 300, 1000][case % 3];
        let d = random_dataset(&mut r, n, 3, 1 + case % 2);
        for metric in [SpatialMetric::Euclidean, SpatialMetric::L1] {
            let ex = build_index(
                &d,
                config(NeighborScope::WithinSample, Backend::Exhaustive, metric),
            )
            .unwrap();
            let kd = build_index(
                &d,
                config(
                    NeighborScope::WithinSample,
                    Backend::SpatialAccelerated,
                    metric,
                ),
            )
            .unwrap();
            for i in (0..n).step_by(7) {
                for rel in [Relation::Nearest, Relation::Farthest] {
                    for k in [0, 1, 3, 10] {
                        assert_eq!(ex.top_k(i, rel, k).unwrap(), kd.top_k(i, rel, k).unwrap());
                    }
                    assert_eq!(
                        ex.rank_window(i, rel, 4, 6).unwrap(),
                        kd.rank_window(i, rel, 4, 6).unwrap()
                    );
                    assert_eq!(ex.ordering(i, rel).unwrap(), kd.ordering(i, rel).unwrap());
                }
            }
        }
    }
}

#[test]
fn documented_examples() {
    use imcprompt::data::{CellRecord, Point, ProteinPanel};
    let cells = [0.0, 1.0, 10.0]
        .iter()
        .enumerate()
        .map(|(i, &x)| CellRecord {
            cell_id: format!("c{i}"),
            sample_id: "s".into(),
            expression: vec![1.0, if i == 2 { 5.0 } else { 2.0 }],
            position: Point::new(x, 0.0),
            cell_type: None,
            status: None,
        })
        .collect();
    let d = Dataset::new(ProteinPanel::new(["A", "B"]).unwrap(), cells).unwrap();
    for backend in [Backend::Exhaustive, Backend::SpatialAccelerated] {
        let idx = build_index(
            &d,
            MetricConfig {
                backend,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(idx.ordering(0, Relation::Nearest).unwrap(), [1, 2]);
        // cells 0 and 1 share expression, so each is the other's top match
        assert_eq!(idx.top_k_similar(0, 1).unwrap(), [1]);
        assert_eq!(idx.top_k_similar(1, 1).unwrap(), [0]);
        assert!(idx.top_k_nearest(5, 1).is_err());
        assert!(idx.rank_window(0, Relation::Nearest, 3, 2).is_err());
        assert_eq!(idx.rank_window(0, Relation::Nearest, 2, 9).unwrap(), [2]);
    }
    let c = expression_similarity(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], ExpressionMetric::Cosine)
        .unwrap();
    assert!((c.value - 32.0 / 1078f64.sqrt()).abs() < 1e-12);
    let z = expression_similarity(&[0.0, 0.0], &[1.0, 2.0], ExpressionMetric::Cosine).unwrap();
    assert!(z.degenerate && z.value == 0.0);
    let o = spatial_distance(
        Point::new(0.0, 0.0),
        Point::new(1.0, 1.0),
        SpatialMetric::CosineDistance,
    );
    assert!(o.degenerate && o.value == 1.0);
}

#[test]
fn singleton_sample_is_empty_with_warning() {
    use imcprompt::data::{CellRecord, Point, ProteinPanel};
    use imcprompt::WarningKind;
    let cells = (0..3)
        .map(|i| CellRecord {
            cell_id: format!("c{i}"),
            sample_id: if i == 2 { "lonely".into() } else { "s".into() },
            expression: vec![1.0, i as f64],
            position: Point::new(i as f64, 0.0),
            cell_type: None,
            status: None,
        })
        .collect();
    let d = Dataset::new(ProteinPanel::new(["A", "B"]).unwrap(), cells).unwrap();
    let idx = build_index(&d, MetricConfig::default()).unwrap();
    assert!(idx.ordering(2, Relation::Similar).unwrap().is_empty());
    assert_eq!(idx.warnings().count(WarningKind::SingletonScope), 1);
}

fn small_dataset() -> impl Strategy<Value = (u64, usize, usize)> {
    (any::<u64>(), 2usize..40, 1usize..12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_symmetry_and_diagonal((seed, n, m) in small_dataset()) {
        let d = random_dataset(&mut rng(seed), n, m, 1);
        let idx = build_index(&d, config(NeighborScope::Global, Backend::Exhaustive, SpatialMetric::Euclidean)).unwrap();
        for i in 0..n {
            let zero = d.cell(i).expression.iter().all(|&x| x == 0.0);
            if !zero {
                prop_assert!((idx.similarity(i, i) - 1.0).abs() < 1e-12);
            }
            prop_assert_eq!(idx.distance(i, i), 0.0);
            for j in 0..n {
                prop_assert!((idx.similarity(i, j) - idx.similarity(j, i)).abs() < 1e-12);
                prop_assert!((idx.distance(i, j) - idx.distance(j, i)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cosine_ordering_is_scale_invariant((seed, n, m) in small_dataset(), c in 0.01f64..100.0) {
        let d = random_dataset(&mut rng(seed), n, m, 1);
        let mut cells = d.cells().to_vec();
        cells[0].expression.iter_mut().for_each(|x| *x *= c);
        let scaled = Dataset::new(d.panel().clone(), cells).unwrap();
        let a = build_index(&d, MetricConfig::default()).unwrap();
        let b = build_index(&scaled, MetricConfig::default()).unwrap();
        for j in 0..n {
            prop_assert!((a.similarity(0, j) - b.similarity(0, j)).abs() < 1e-12);
        }
        // argmax level: the best match keeps the same similarity value
        let top_a = a.top_k_similar(0, 1).unwrap();
        let top_b = b.top_k_similar(0, 1).unwrap();
        if let (Some(&x), Some(&y)) = (top_a.first(), top_b.first()) {
            prop_assert!((a.similarity(0, x) - a.similarity(0, y)).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn triangle_inequality((seed, n, m) in small_dataset()) {
        let d = random_dataset(&mut rng(seed), n.max(3), m, 1);
        for metric in [SpatialMetric::Euclidean, SpatialMetric::L1] {
            let idx = build_index(&d, config(NeighborScope::Global, Backend::Exhaustive, metric)).unwrap();
            let n = d.len();
            for i in 0..n {
                for j in 0..n {
                    for k in (0..n).step_by(3) {
                        prop_assert!(idx.distance(i, k) <= idx.distance(i, j) + idx.distance(j, k) + 1e-12);
                    }
                }
            }
        }
    }
}
