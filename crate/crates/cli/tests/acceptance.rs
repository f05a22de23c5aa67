//! Acceptance suite. One line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p imcprompt-cli --test acceptance` (add `--release`
//! for timings that reflect an optimized build).

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use imcprompt::data::LabelKind;
use imcprompt::data::{split, CellRecord, Dataset, Point, ProteinPanel, SplitFractions, Stratify};
use imcprompt::evaluation::{
    dataset_frequencies, evaluate, evaluate_with, predicted_frequencies, EvalConfig,
};
use imcprompt::ranking::{
    build_index, Backend, ExpressionMetric, MetricConfig, NeighborScope, Relation, SpatialMetric,
};
use imcprompt::refclass::Combine;
use imcprompt::sentence::to_sentence;
use imcprompt::synth::{generate, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SYMMETRY_TOL: f64 = 1e-12;
const DIAGONAL_TOL: f64 = 1e-12;
const TRIANGLE_TOL: f64 = 1e-9;
const SHARE_SUM_TOL: f64 = 1e-9;
const MAX_SHARE_GAP: f64 = 5.0;
const MIN_TYPE_ACCURACY: f64 = 0.95;
const MIN_STATUS_ACCURACY: f64 = 0.9;

type Outcome = Result<String, String>;
/// Name, optional time budget in seconds, check.
type Check = (&'static str, Option<u64>, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let held: bool = $cond;
        if !held {
            return Err(format!($($msg)+));
        }
    }};
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, samples: usize) -> Dataset {
    let grid = ((n as f64).sqrt() as i64).max(2);
    let panel = ProteinPanel::new((0..m).map(|j| format!("P{j}"))).unwrap();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let row = if i > 0 && rng.random_bool(0.1) {
            rows[rng.random_range(0..i)].clone()
        } else if rng.random_bool(0.03) {
            vec![0.0; m]
        } else {
            (0..m)
                .map(|_| f64::from(rng.random_range(0..6u8)) * rng.random_range(0.5..2.0))
                .collect()
        };
        rows.push(row);
    }
    let cells = rows
        .into_iter()
        .enumerate()
        .map(|(i, expression)| CellRecord {
            cell_id: format!("c{i}"),
            sample_id: format!("s{}", i % samples),
            expression,
            position: Point::new(
                rng.random_range(0..grid) as f64,
                rng.random_range(0..grid) as f64,
            ),
            cell_type: None,
            status: None,
        })
        .collect();
    Dataset::new(panel, cells).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn matrix_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pairs = 0u64;
    for d in 0..100 {
        let n = rng.random_range(2..=200);
        let m = rng.random_range(1..=40);
        let ds = random_dataset(&mut rng, n, m, 1);
        for (e, s) in [
            (ExpressionMetric::Cosine, SpatialMetric::Euclidean),
            (ExpressionMetric::Pearson, SpatialMetric::L1),
            (
                ExpressionMetric::NegativeEuclidean,
                SpatialMetric::CosineDistance,
            ),
        ] {
            let cfg = MetricConfig {
                expression_metric: e,
                spatial_metric: s,
                neighbor_scope: NeighborScope::Global,
                ..Default::default()
            };
            let idx = build_index(&ds, cfg).map_err(|e| e.to_string())?;
            for i in 0..n {
                let xi = &ds.cell(i).expression;
                let self_sim = idx.similarity(i, i);
                match e {
                    ExpressionMetric::Cosine if norm(xi) > 0.0 => {
                        ensure!(
                            (self_sim - 1.0).abs() <= DIAGONAL_TOL,
                            "dataset {d}: cosine diagonal {self_sim} at {i}"
                        )
                    }
                    ExpressionMetric::NegativeEuclidean => {
                        ensure!(
                            self_sim.abs() <= DIAGONAL_TOL,
                            "dataset {d}: distance diagonal {self_sim} at {i}"
                        )
                    }
                    _ => {}
                }
                let p = ds.cell(i).position;
                if s != SpatialMetric::CosineDistance || (p.x, p.y) != (0.0, 0.0) {
                    ensure!(
                        idx.distance(i, i).abs() <= DIAGONAL_TOL,
                        "dataset {d}: spatial diagonal at {i}"
                    );
                }
                for j in 0..n {
                    pairs += 1;
                    let (a, b) = (idx.similarity(i, j), idx.similarity(j, i));
                    ensure!(
                        (a - b).abs() <= SYMMETRY_TOL,
                        "dataset {d}: {e} asymmetric at ({i},{j})"
                    );
                    let (a, b) = (idx.distance(i, j), idx.distance(j, i));
                    ensure!(
                        (a - b).abs() <= SYMMETRY_TOL,
                        "dataset {d}: {s} asymmetric at ({i},{j})"
                    );
                    if e == ExpressionMetric::Cosine && norm(xi) > 0.0 {
                        let xj = &ds.cell(j).expression;
                        if norm(xj) > 0.0 {
                            let dot: f64 = xi.iter().zip(xj).map(|(a, b)| a * b).sum();
                            let oracle = dot / (norm(xi) * norm(xj));
                            ensure!(
                                (idx.similarity(i, j) - oracle).abs() <= SYMMETRY_TOL,
                                "dataset {d}: cosine off oracle"
                            );
                        }
                    }
                }
            }
            let triples = 2000;
            for _ in 0..triples {
                let (i, j, k) = (
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                    rng.random_range(0..n),
                );
                if s != SpatialMetric::CosineDistance {
                    let (ij, jk, ik) = (idx.distance(i, j), idx.distance(j, k), idx.distance(i, k));
                    ensure!(
                        ik <= ij + jk + TRIANGLE_TOL,
                        "dataset {d}: {s} triangle fails at ({i},{j},{k})"
                    );
                }
                if e == ExpressionMetric::NegativeEuclidean {
                    let (ij, jk, ik) = (
                        -idx.similarity(i, j),
                        -idx.similarity(j, k),
                        -idx.similarity(i, k),
                    );
                    ensure!(
                        ik <= ij + jk + TRIANGLE_TOL,
                        "dataset {d}: expression triangle fails at ({i},{j},{k})"
                    );
                }
            }
        }
    }
    Ok(format!("100 datasets, {pairs} pairs"))
}

fn brute_nearest(ds: &Dataset, i: usize, global: bool, metric: SpatialMetric) -> Vec<usize> {
    let p = ds.cell(i).position;
    let dist = |q: Point| match metric {
        SpatialMetric::Euclidean => ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt(),
        SpatialMetric::L1 => (p.x - q.x).abs() + (p.y - q.y).abs(),
        SpatialMetric::CosineDistance => unreachable!(),
    };
    let mut v: Vec<(f64, usize)> = (0..ds.len())
        .filter(|&j| j != i && (global || ds.cell(j).sample_id == ds.cell(i).sample_id))
        .map(|j| (dist(ds.cell(j).position), j))
        .collect();
    v.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    v.into_iter().map(|(_, j)| j).collect()
}

fn backend_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let windows = [(1, 1), (1, 3), (4, 6), (7, 9)];
    let mut queries = 0u64;
    for d in 0..50 {
        let n = 40 * (d + 1);
        let samples = if d % 2 == 0 { 1 } else { 1 + d % 4 };
        let ds = random_dataset(&mut rng, n, 4, samples);
        let global = d % 3 != 1;
        let metric = if d % 2 == 0 {
            SpatialMetric::Euclidean
        } else {
            SpatialMetric::L1
        };
        let scope = if global {
            NeighborScope::Global
        } else {
            NeighborScope::WithinSample
        };
        let base = MetricConfig {
            spatial_metric: metric,
            neighbor_scope: scope,
            ..Default::default()
        };
        let ex = build_index(&ds, base).map_err(|e| e.to_string())?;
        let acc = build_index(
            &ds,
            MetricConfig {
                backend: Backend::SpatialAccelerated,
                ..base
            },
        )
        .map_err(|e| e.to_string())?;
        ensure!(
            acc.backend() == Backend::SpatialAccelerated,
            "accelerated backend not in use"
        );
        for i in 0..n {
            for rel in [Relation::Nearest, Relation::Farthest] {
                for k in [1, 3, 10] {
                    let (a, b) = (acc.top_k(i, rel, k), ex.top_k(i, rel, k));
                    ensure!(
                        a.as_ref().ok() == b.as_ref().ok(),
                        "dataset {d} cell {i}: {} top {k} differs",
                        rel.as_str()
                    );
                    queries += 1;
                }
                for (lo, hi) in windows {
                    let (a, b) = (
                        acc.rank_window(i, rel, lo, hi),
                        ex.rank_window(i, rel, lo, hi),
                    );
                    ensure!(
                        a.as_ref().ok() == b.as_ref().ok(),
                        "dataset {d} cell {i}: {} window {lo}-{hi} differs",
                        rel.as_str()
                    );
                    queries += 1;
                }
            }
            if i % 25 == 0 {
                let oracle = brute_nearest(&ds, i, global, metric);
                let got = acc
                    .ordering(i, Relation::Nearest)
                    .map_err(|e| e.to_string())?;
                ensure!(
                    got == oracle,
                    "dataset {d} cell {i}: ordering differs from enumeration"
                );
                let mut rev = oracle;
                rev.reverse();
                ensure!(
                    acc.ordering(i, Relation::Farthest)
                        .map_err(|e| e.to_string())?
                        == rev,
                    "dataset {d} cell {i}: farthest ordering"
                );
                let k = rev.len().min(5);
                ensure!(
                    acc.top_k(i, Relation::Farthest, k)
                        .map_err(|e| e.to_string())?
                        == rev[..k],
                    "dataset {d} cell {i}: farthest top-k"
                );
            }
        }
    }
    Ok(format!("50 datasets up to N=2000, {queries} queries"))
}

fn sentence_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let transforms: [fn(f64) -> f64; 4] = [
        |x| 2.0 * x + 1.0,
        |x| x * x * x,
        |x| x.ln_1p(),
        |x| (x / 5.0).asinh(),
    ];
    for c in 0..1000 {
        let m = rng.random_range(1..=40);
        let panel = ProteinPanel::new((0..m).map(|j| format!("P{j}"))).unwrap();
        let levels = rng.random_range(1..=8u8);
        let expression: Vec<f64> = (0..m)
            .map(|_| f64::from(rng.random_range(0..levels)) * 0.75)
            .collect();
        let cell = |expression: Vec<f64>| CellRecord {
            cell_id: format!("c{c}"),
            sample_id: "s".into(),
            expression,
            position: Point::new(0.0, 0.0),
            cell_type: None,
            status: None,
        };
        let s = to_sentence(&cell(expression.clone()), &panel).map_err(|e| e.to_string())?;
        let order: Vec<usize> = s
            .tokens
            .iter()
            .map(|t| panel.position(t).unwrap())
            .collect();
        let mut sorted = order.clone();
        sorted.sort_unstable();
        ensure!(
            sorted == (0..m).collect::<Vec<_>>(),
            "cell {c}: not a permutation"
        );
        for w in order.windows(2) {
            let (a, b) = (expression[w[0]], expression[w[1]]);
            ensure!(
                a > b || (a == b && w[0] < w[1]),
                "cell {c}: order or tie rule broken"
            );
        }
        ensure!(
            to_sentence(&cell(expression.clone()), &panel).unwrap() == s,
            "cell {c}: nondeterministic"
        );
        for (t, f) in transforms.iter().enumerate() {
            let moved =
                to_sentence(&cell(expression.iter().map(|&x| f(x)).collect()), &panel).unwrap();
            ensure!(
                moved.tokens == s.tokens,
                "cell {c}: transform {t} changed the sentence"
            );
        }
    }
    Ok("1000 cells".into())
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_imcprompt"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(())
}

fn corpus_determinism() -> Outcome {
    let runs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for t in &runs {
        let d = t.path();
        cli(
            d,
            &[
                "synth",
                "--n-samples",
                "4",
                "--cells-per-sample",
                "150",
                "--seed",
                "7",
                "--out",
                "data",
            ],
        )?;
        cli(
            d,
            &[
                "split",
                "--dataset",
                "data",
                "--seed",
                "3",
                "--out",
                "split.csv",
            ],
        )?;
        cli(
            d,
            &[
                "prompts",
                "--dataset",
                "data",
                "--split",
                "split.csv",
                "--k",
                "3",
                "--task",
                "multi",
                "--out",
                "corpus.jsonl",
            ],
        )?;
    }
    let mut n = 0;
    for f in [
        "data/cells.csv",
        "data/manifest.json",
        "split.csv",
        "split.csv.manifest.json",
        "corpus.jsonl",
        "corpus.jsonl.manifest.json",
    ] {
        let a = std::fs::read(runs[0].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(runs[1].path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure!(a == b, "{f} differs between runs");
        n += 1;
    }
    let m: serde_json::Value = serde_json::from_slice(
        &std::fs::read(runs[0].path().join("corpus.jsonl.manifest.json")).unwrap(),
    )
    .unwrap();
    let records = &m["details"]["counts"]["records"];
    Ok(format!(
        "{n} artifacts byte-identical, {records} records, {}",
        m["details"]["corpus_checksum"].as_str().unwrap_or("?")
    ))
}

fn paired_baseline() -> Outcome {
    let ds = generate(&SynthConfig::default()).map_err(|e| e.to_string())?;
    let knn = EvalConfig::default();
    let mut base = knn.clone();
    base.classifier.k = 0;
    ensure!(
        knn.classifier.k == 3 && knn.classifier.combine == Combine::Both,
        "unexpected defaults"
    );
    let index = build_index(&ds, knn.metric).map_err(|e| e.to_string())?;
    let a = evaluate_with(&index, &knn).map_err(|e| e.to_string())?;
    let b = evaluate_with(&index, &base).map_err(|e| e.to_string())?;
    ensure!(
        a.split_checksum == b.split_checksum,
        "splits differ between arms"
    );
    let gaps: Vec<f64> = a
        .per_seed
        .iter()
        .zip(&b.per_seed)
        .map(|(x, y)| x.accuracy.unwrap_or(0.0) - y.accuracy.unwrap_or(0.0))
        .collect();
    let wins = gaps.iter().filter(|&&g| g > 0.0).count();
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64;
    ensure!(
        wins >= 2 && mean_gap > 0.0,
        "wins {wins}/3, mean gap {mean_gap:.4}"
    );
    Ok(format!(
        "K=3 {:.3} vs centroid {:.3}, wins {wins}/3, mean gap {mean_gap:.3}",
        a.mean, b.mean
    ))
}

fn negative_window_sweep() -> Outcome {
    let t = tempfile::tempdir().unwrap();
    let d = t.path();
    cli(
        d,
        &[
            "synth",
            "--n-samples",
            "4",
            "--cells-per-sample",
            "200",
            "--out",
            "data",
        ],
    )?;
    cli(
        d,
        &[
            "sweep",
            "--dataset",
            "data",
            "--axis",
            "negative_window",
            "--values",
            "1-1,1-3,4-6,7-9",
            "--out",
            "sweep.json",
        ],
    )?;
    let table: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("sweep.json")).unwrap()).unwrap();
    let rows = table["rows"].as_array().ok_or("no rows")?;
    ensure!(rows.len() == 4, "{} rows", rows.len());
    let values: Vec<&str> = rows
        .iter()
        .map(|r| r["value"].as_str().unwrap_or(""))
        .collect();
    ensure!(values == ["1-1", "1-3", "4-6", "7-9"], "values {values:?}");
    let shared = &table["split_checksum"];
    for r in rows {
        let rep = &r["report"];
        ensure!(
            &rep["split_checksum"] == shared,
            "split checksum differs at {}",
            r["value"]
        );
        ensure!(
            rep["n_evaluated"] == rows[0]["report"]["n_evaluated"],
            "evaluated counts differ"
        );
        ensure!(
            rep["negative_agreement"].is_f64(),
            "missing negative_agreement"
        );
    }
    let agree: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.3}", r["report"]["negative_agreement"].as_f64().unwrap()))
        .collect();
    Ok(format!(
        "4 reports, shared split, negative agreement {}",
        agree.join("/")
    ))
}

fn share_sums(summary: &imcprompt::evaluation::FrequencySummary) -> Result<(), String> {
    for (g, shares) in &summary.groups {
        let t: f64 = shares.truth.values().sum();
        ensure!(
            (t - 100.0).abs() <= SHARE_SUM_TOL,
            "{g}: truth shares sum {t}"
        );
        if let Some(p) = &shares.predicted {
            let s: f64 = p.values().sum();
            ensure!(
                (s - 100.0).abs() <= SHARE_SUM_TOL,
                "{g}: predicted shares sum {s}"
            );
        }
    }
    Ok(())
}

fn frequency_shares() -> Outcome {
    let mut synth = SynthConfig {
        separation: 5.0,
        ..SynthConfig::brain_tumor_like()
    };
    synth.seed = 4;
    let ds = generate(&synth).map_err(|e| e.to_string())?;
    share_sums(&dataset_frequencies(&ds))?;
    let cfg = EvalConfig::default();
    let index = build_index(&ds, cfg.metric).map_err(|e| e.to_string())?;
    let summary = predicted_frequencies(&index, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        summary.groups.len() == 2,
        "{} cohorts",
        summary.groups.len()
    );
    share_sums(&summary)?;
    let gap = summary.max_gap().ok_or("no predictions")?;
    ensure!(gap <= MAX_SHARE_GAP, "max gap {gap:.2} points");
    Ok(format!(
        "2 cohorts, max predicted-vs-truth gap {gap:.2} points"
    ))
}

fn strong_signal() -> Outcome {
    let types = generate(&SynthConfig {
        separation: 5.0,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let type_report = evaluate(&types, &EvalConfig::default()).map_err(|e| e.to_string())?;
    ensure!(
        type_report.accuracy >= MIN_TYPE_ACCURACY,
        "type accuracy {:.4}",
        type_report.accuracy
    );

    let cohort = SynthConfig {
        n_samples: 40,
        cells_per_sample: 50,
        separation: 5.0,
        status_effect: 0.7,
        seed: 1,
        ..Default::default()
    };
    let ds = generate(&cohort).map_err(|e| e.to_string())?;
    let mut cfg = EvalConfig {
        fractions: SplitFractions::new(0.45, 0.05, 0.5).map_err(|e| e.to_string())?,
        stratify: Stratify::Sample,
        ..Default::default()
    };
    cfg.metric.neighbor_scope = NeighborScope::Global;
    cfg.classifier.combine = Combine::ExpressionOnly;
    cfg.classifier.label_target = LabelKind::Status;
    let held_out =
        split(&ds, cfg.fractions, cfg.stratify, cfg.seeds[0]).map_err(|e| e.to_string())?;
    let test_samples: std::collections::BTreeSet<_> = held_out
        .test()
        .into_iter()
        .map(|i| ds.cell(i).sample_id.clone())
        .collect();
    let status_report = evaluate(&ds, &cfg).map_err(|e| e.to_string())?;
    ensure!(
        status_report.accuracy >= MIN_STATUS_ACCURACY,
        "status accuracy {:.4}",
        status_report.accuracy
    );
    Ok(format!(
        "type {:.4} on {} held-out cells, status {:.4} on {} held-out samples per seed",
        type_report.accuracy,
        type_report.n_evaluated,
        status_report.accuracy,
        test_samples.len()
    ))
}

fn main() {
    let checks: [Check; 8] = [
        ("matrix_invariants", Some(30), matrix_invariants),
        ("backend_equivalence", Some(60), backend_equivalence),
        ("sentence_properties", None, sentence_properties),
        ("corpus_determinism", None, corpus_determinism),
        ("knn_beats_centroid_baseline", None, paired_baseline),
        ("negative_window_sweep", None, negative_window_sweep),
        ("frequency_shares", None, frequency_shares),
        ("strong_signal_classification", Some(120), strong_signal),
    ];
    let mut failed = 0;
    for (name, budget, check) in checks {
        let start = Instant::now();
        let mut outcome = check();
        let elapsed = start.elapsed();
        if let (Ok(_), Some(limit)) = (&outcome, budget) {
            if elapsed > Duration::from_secs(limit) {
                outcome = Err(format!(
                    "took {:.1}s, budget {limit}s",
                    elapsed.as_secs_f64()
                ));
            }
        }
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name} ({:.2}s): {detail}", elapsed.as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
