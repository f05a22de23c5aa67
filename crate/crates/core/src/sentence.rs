//! Rank-ordered cell sentences.
//!
//! A cell's sentence lists every panel protein in decreasing order of
//! expression. Equal intensities keep panel order, so the encoding is a
//! total, deterministic function of the expression row.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{CellRecord, Dataset, ProteinPanel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellSentence {
    pub cell_id: String,
    /// Protein names, most expressed first.
    pub tokens: Vec<String>,
    /// `ranks[j]` is the 1-based position of panel protein `j` in `tokens`.
    pub ranks: Vec<usize>,
}

impl CellSentence {
    /// Tokens joined by single spaces, optionally keeping only the first `max_tokens`.
    pub fn render(&self, max_tokens: Option<usize>) -> String {
        let n = max_tokens.map_or(self.tokens.len(), |m| m.min(self.tokens.len()));
        self.tokens[..n].join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Panel indices sorted by descending expression, ties by ascending index.
pub fn descending_order(expression: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..expression.len()).collect();
    order.sort_by(|&a, &b| crate::cmp_f64(expression[b], expression[a]).then(a.cmp(&b)));
    order
}

pub fn to_sentence(cell: &CellRecord, panel: &ProteinPanel) -> Result<CellSentence> {
    if cell.expression.len() != panel.len() {
        return Err(Error::Integrity(format!(
            "cell `{}` has {} expression values, panel has {}",
            cell.cell_id,
            cell.expression.len(),
            panel.len()
        )));
    }
    if let Some(j) = cell.expression.iter().position(|v| v.is_nan()) {
        return Err(Error::NonFinite {
            cell_id: cell.cell_id.clone(),
            protein: panel.name(j).to_string(),
        });
    }
    let order = descending_order(&cell.expression);
    let mut ranks = vec![0; order.len()];
    for (pos, &j) in order.iter().enumerate() {
        ranks[j] = pos + 1;
    }
    Ok(CellSentence {
        cell_id: cell.cell_id.clone(),
        tokens: order.iter().map(|&j| panel.name(j).to_string()).collect(),
        ranks,
    })
}

/// Inverse of [`to_sentence`] on the token sequence.
pub fn sentence_to_ranks(tokens: &[String], panel: &ProteinPanel) -> Result<Vec<usize>> {
    let mut ranks = vec![0; panel.len()];
    let mut seen = HashSet::with_capacity(tokens.len());
    for (pos, tok) in tokens.iter().enumerate() {
        let j = panel
            .position(tok)
            .ok_or_else(|| Error::UnknownToken(tok.clone()))?;
        if !seen.insert(j) {
            return Err(Error::DuplicateToken(tok.clone()));
        }
        ranks[j] = pos + 1;
    }
    if seen.len() != panel.len() {
        let missing = (0..panel.len()).find(|j| !seen.contains(j)).unwrap();
        return Err(Error::Integrity(format!(
            "sentence is missing protein `{}`",
            panel.name(missing)
        )));
    }
    Ok(ranks)
}

/// Sentences for every cell, in cell-index order.
pub fn encode_all(dataset: &Dataset) -> Result<Vec<CellSentence>> {
    dataset
        .cells()
        .par_iter()
        .map(|c| to_sentence(c, dataset.panel()))
        .collect()
}
