use std::io::Write;

use serde::Serialize;

use super::index::{RankingIndex, Relation};
use super::metric::{spatial_value, PreparedRows};
use crate::error::{Error, Result};

pub const DEFAULT_MATRIX_CAP: usize = 5000;

/// One line of the neighbor-list export.
#[derive(Debug, Clone, Serialize)]
pub struct NeighborRecord<'a> {
    pub cell_id: &'a str,
    pub kind: Relation,
    pub rank: usize,
    pub neighbor_id: &'a str,
    pub score: f64,
}

/// Writes the top `r` neighbors of every cell for every relation as JSON lines.
pub fn write_neighbors<W: Write>(index: &RankingIndex<'_>, r: usize, mut out: W) -> Result<()> {
    let cells = index.dataset().cells();
    for i in 0..index.len() {
        for relation in Relation::ALL {
            for (rank, j) in index.top_k(i, relation, r)?.into_iter().enumerate() {
                let rec = NeighborRecord {
                    cell_id: &cells[i].cell_id,
                    kind: relation,
                    rank: rank + 1,
                    neighbor_id: &cells[j].cell_id,
                    score: index.score(relation, i, j),
                };
                serde_json::to_writer(&mut out, &rec)?;
                out.write_all(b"\n")
                    .map_err(|e| Error::io("<neighbors>", e))?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Expression,
    Spatial,
}

/// Dense all-pairs matrix over every cell (ignoring scope) as tab-separated
/// text with a header row of cell ids. Refused above `cap` cells.
pub fn write_dense_matrix<W: Write>(
    index: &RankingIndex<'_>,
    kind: MatrixKind,
    cap: usize,
    out: W,
) -> Result<()> {
    let ds = index.dataset();
    let n = ds.len();
    if n > cap {
        return Err(Error::InvalidArgument(format!(
            "dense export of {n} cells exceeds the cap of {cap}"
        )));
    }
    let cfg = index.config();
    let rows = match kind {
        MatrixKind::Expression => Some(PreparedRows::new(
            ds.cells().iter().map(|c| c.expression.as_slice()),
            ds.panel().len(),
            cfg.expression_metric,
            cfg.arcsinh_cofactor,
        )),
        MatrixKind::Spatial => None,
    };
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    let mut header = vec!["cell_id".to_string()];
    header.extend(ds.cells().iter().map(|c| c.cell_id.clone()));
    w.write_record(&header)?;
    let mut line = Vec::with_capacity(n + 1);
    for i in 0..n {
        line.clear();
        line.push(ds.cell(i).cell_id.clone());
        for j in 0..n {
            let v = match &rows {
                Some(r) => r.similarity(i, j),
                None => spatial_value(cfg.spatial_metric, ds.cell(i).position, ds.cell(j).position),
            };
            line.push(v.to_string());
        }
        w.write_record(&line)?;
    }
    w.flush().map_err(|e| Error::io("<matrix>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{CellRecord, Dataset, Point, ProteinPanel};
    use crate::ranking::{build_index, MetricConfig};

    fn ds() -> Dataset {
        let cells = (0..3)
            .map(|i| CellRecord {
                cell_id: format!("c{i}"),
                sample_id: "s".into(),
                expression: vec![1.0 + i as f64, 1.0],
                position: Point::new(i as f64 * 3.0, 0.0),
                cell_type: None,
                status: None,
            })
            .collect();
        Dataset::new(ProteinPanel::new(["A", "B"]).unwrap(), cells).unwrap()
    }

    #[test]
    fn neighbor_lines() {
        let d = ds();
        let idx = build_index(&d, MetricConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_neighbors(&idx, 1, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3 * 4);
        assert!(text
            .lines()
            .next()
            .unwrap()
            .starts_with(r#"{"cell_id":"c0","kind":"similar","rank":1,"neighbor_id":"c1""#));
        assert!(text.contains(
            r#"{"cell_id":"c0","kind":"nearest","rank":1,"neighbor_id":"c1","score":3.0}"#
        ));
    }

    #[test]
    fn dense_matrix_and_cap() {
        let d = ds();
        let idx = build_index(&d, MetricConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_dense_matrix(&idx, MatrixKind::Spatial, 10, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "cell_id\tc0\tc1\tc2");
        assert_eq!(lines[1], "c0\t0\t3\t6");
        assert!(write_dense_matrix(&idx, MatrixKind::Expression, 2, Vec::new()).is_err());
    }
}
