use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of pairs whose prediction equals the truth.
pub fn accuracy<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("accuracy of zero pairs".into()));
    }
    let hits = pairs
        .iter()
        .filter(|(t, p)| t.as_ref() == p.as_ref())
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Counts with rows = true label, columns = predicted label.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub vocabulary: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
}

impl Confusion {
    pub fn empty(vocabulary: &[String]) -> Self {
        let k = vocabulary.len();
        Self {
            vocabulary: vocabulary.to_vec(),
            matrix: vec![vec![0; k]; k],
        }
    }

    fn position(&self, label: &str) -> Result<usize> {
        self.vocabulary
            .iter()
            .position(|v| v == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn add(&mut self, truth: &str, predicted: &str) -> Result<()> {
        let (t, p) = (self.position(truth)?, self.position(predicted)?);
        self.matrix[t][p] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (row, o) in self.matrix.iter_mut().zip(&other.matrix) {
            row.iter_mut().zip(o).for_each(|(a, b)| *a += b);
        }
    }

    pub fn total(&self) -> u64 {
        self.matrix.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.matrix.len()).map(|i| self.matrix[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.matrix[class].iter().sum()
    }

    pub fn predicted_count(&self, class: usize) -> u64 {
        self.matrix.iter().map(|r| r[class]).sum()
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| self.trace() as f64 / n as f64)
    }

    pub fn per_class(&self) -> Vec<ClassMetrics> {
        self.vocabulary
            .iter()
            .enumerate()
            .map(|(c, label)| {
                let tp = self.matrix[c][c] as f64;
                let support = self.support(c);
                let predicted = self.predicted_count(c);
                ClassMetrics {
                    label: label.clone(),
                    precision: (predicted > 0).then(|| tp / predicted as f64),
                    recall: (support > 0).then(|| tp / support as f64),
                    support,
                }
            })
            .collect()
    }
}

pub fn confusion<S: AsRef<str>>(pairs: &[(S, S)], vocabulary: &[String]) -> Result<Confusion> {
    let mut c = Confusion::empty(vocabulary);
    for (t, p) in pairs {
        c.add(t.as_ref(), p.as_ref())?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class has no support.
    pub recall: Option<f64>,
    pub support: u64,
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Label counts as percentages summing to 100.
pub fn shares<'a>(
    labels: impl IntoIterator<Item = &'a str>,
    vocabulary: &[String],
) -> Option<BTreeMap<String, f64>> {
    let mut counts: BTreeMap<String, u64> = vocabulary.iter().map(|v| (v.clone(), 0)).collect();
    let mut n = 0u64;
    for l in labels {
        *counts.entry(l.to_string()).or_default() += 1;
        n += 1;
    }
    (n > 0).then(|| {
        counts
            .into_iter()
            .map(|(l, c)| (l, 100.0 * c as f64 / n as f64))
            .collect()
    })
}
