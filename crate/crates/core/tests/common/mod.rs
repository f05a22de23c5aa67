#![allow(dead_code)]

use imcprompt::data::{CellRecord, Dataset, Point, ProteinPanel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random dataset with deliberate ties: coordinates on a small integer grid,
/// duplicated expression rows, and the odd all-zero row.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, m: usize, samples: usize) -> Dataset {
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
        .map(|(i, expression)| {
            let s = i % samples;
            CellRecord {
                cell_id: format!("c{i}"),
                sample_id: format!("s{s}"),
                expression,
                position: Point::new(
                    rng.random_range(0..grid) as f64,
                    rng.random_range(0..grid) as f64,
                ),
                cell_type: Some(format!("t{}", rng.random_range(0..3))),
                status: Some(format!("st{}", s % 2)),
            }
        })
        .collect();
    Dataset::new(panel, cells).unwrap()
}

/// Cells sharing `i`'s sample (or all cells) other than `i`.
pub fn scope(dataset: &Dataset, i: usize, global: bool) -> Vec<usize> {
    let s = &dataset.cell(i).sample_id;
    (0..dataset.len())
        .filter(|&j| j != i && (global || &dataset.cell(j).sample_id == s))
        .collect()
}

pub fn euclid(p: Point, q: Point) -> f64 {
    ((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
