use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, LabelKind};
use crate::checksum::Hasher;
use crate::error::{Error, Result};

const UNLABELED: &str = "(unlabeled)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    /// 90:10 train:validation over the non-test portion, 10% held-out test.
    fn default() -> Self {
        Self {
            train: 0.81,
            validation: 0.09,
            test: 0.10,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, validation: f64, test: f64) -> Result<Self> {
        let f = Self {
            train,
            validation,
            test,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.as_array();
        if a.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be non-negative, got {a:?}"
            )));
        }
        let sum: f64 = a.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    fn as_array(&self) -> [f64; 3] {
        [self.train, self.validation, self.test]
    }
}

impl FromStr for SplitFractions {
    type Err = Error;

    /// Parses `train,validation,test`.
    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidArgument(format!("bad split fractions `{s}`")))?;
        match parts.as_slice() {
            [a, b, c] => Self::new(*a, *b, *c),
            _ => Err(Error::InvalidArgument(format!(
                "split fractions need three values, got `{s}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratify {
    #[default]
    None,
    CellType,
    /// Whole samples are assigned, balanced across status cohorts.
    Sample,
}

impl FromStr for Stratify {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Stratify::None),
            "cell_type" | "cell-type" | "type" => Ok(Stratify::CellType),
            "sample" => Ok(Stratify::Sample),
            other => Err(Error::InvalidArgument(format!(
                "unknown stratification `{other}`"
            ))),
        }
    }
}

/// Per-cell split membership.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitAssignment {
    pub seed: u64,
    membership: Vec<Split>,
}

impl SplitAssignment {
    pub fn from_membership(seed: u64, membership: Vec<Split>) -> Self {
        Self { seed, membership }
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    pub fn of(&self, i: usize) -> Split {
        self.membership[i]
    }

    pub fn membership(&self) -> &[Split] {
        &self.membership
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.membership
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn train(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn validation(&self) -> Vec<usize> {
        self.indices(Split::Validation)
    }

    pub fn test(&self) -> Vec<usize> {
        self.indices(Split::Test)
    }

    pub fn counts(&self) -> BTreeMap<Split, usize> {
        let mut m: BTreeMap<Split, usize> = Split::ALL.iter().map(|s| (*s, 0)).collect();
        for s in &self.membership {
            *m.get_mut(s).unwrap() += 1;
        }
        m
    }

    /// Digest of the (cell_id, split) pairs; independent of the seed value.
    pub fn checksum(&self, dataset: &Dataset) -> String {
        let mut h = Hasher::new();
        for (cell, s) in dataset.cells().iter().zip(&self.membership) {
            h.update(&cell.cell_id);
            h.update(b"\t");
            h.update(s.as_str());
            h.update(b"\n");
        }
        h.finish()
    }

    /// Writes `cell_id,split,seed` records.
    pub fn write_csv<W: Write>(&self, dataset: &Dataset, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["cell_id", "split", "seed"])?;
        let seed = self.seed.to_string();
        for (cell, s) in dataset.cells().iter().zip(&self.membership) {
            w.write_record([cell.cell_id.as_str(), s.as_str(), seed.as_str()])?;
        }
        w.flush().map_err(|e| Error::io("<splits>", e))?;
        Ok(())
    }

    /// Reads records written by [`SplitAssignment::write_csv`]; every cell of
    /// `dataset` must appear exactly once.
    pub fn read_csv<R: Read>(dataset: &Dataset, reader: R) -> Result<Self> {
        let index: std::collections::HashMap<&str, usize> = dataset
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| (c.cell_id.as_str(), i))
            .collect();
        let mut membership: Vec<Option<Split>> = vec![None; dataset.len()];
        let mut seed = None;
        let mut rdr = csv::Reader::from_reader(reader);
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |column: &str, message: String| Error::Parse {
                row: r + 1,
                column: column.into(),
                message,
            };
            let id = rec.get(0).unwrap_or("");
            let &i = index
                .get(id)
                .ok_or_else(|| bad("cell_id", format!("unknown cell `{id}`")))?;
            let split: Split = rec
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|e: Error| bad("split", e.to_string()))?;
            let s: u64 = rec
                .get(2)
                .unwrap_or("")
                .parse()
                .map_err(|_| bad("seed", "not an unsigned integer".into()))?;
            if *seed.get_or_insert(s) != s {
                return Err(bad("seed", "mixed seeds in one assignment".into()));
            }
            if membership[i].replace(split).is_some() {
                return Err(Error::Integrity(format!("cell `{id}` assigned twice")));
            }
        }
        let membership = membership
            .into_iter()
            .enumerate()
            .map(|(i, m)| {
                m.ok_or_else(|| {
                    Error::Integrity(format!("cell `{}` has no split", dataset.cell(i).cell_id))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            seed: seed.unwrap_or(0),
            membership,
        })
    }
}

/// Deterministic train/validation/test assignment.
///
/// Units (cells, or whole samples under [`Stratify::Sample`]) are grouped
/// into strata, shuffled within each stratum, and dealt so that every
/// running split total stays within one unit of its ideal share.
pub fn split(
    dataset: &Dataset,
    fractions: SplitFractions,
    stratify: Stratify,
    seed: u64,
) -> Result<SplitAssignment> {
    fractions.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("cannot split an empty dataset".into()));
    }

    // stratum key -> units, each unit a list of cell indices
    let mut strata: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
    match stratify {
        Stratify::None => {
            strata.insert("all".into(), (0..dataset.len()).map(|i| vec![i]).collect());
        }
        Stratify::CellType => {
            for (i, c) in dataset.cells().iter().enumerate() {
                let key = c.label(LabelKind::CellType).unwrap_or(UNLABELED);
                strata.entry(key.to_string()).or_default().push(vec![i]);
            }
        }
        Stratify::Sample => {
            for (sample, cells) in dataset.samples() {
                let key = dataset.sample_status(sample).unwrap_or(UNLABELED);
                strata
                    .entry(key.to_string())
                    .or_default()
                    .push(cells.clone());
            }
        }
    }

    let f = fractions.as_array();
    let active = f.iter().filter(|v| **v > 0.0).count();
    for (name, units) in &strata {
        if units.len() < active {
            return Err(Error::SmallStratum {
                stratum: name.clone(),
                size: units.len(),
                splits: active,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut membership = vec![Split::Train; dataset.len()];
    let mut dealer = Dealer::new(f);
    for units in strata.values_mut() {
        units.shuffle(&mut rng);
        let quota = dealer.deal(units.len());
        let mut it = units.iter();
        for (s, &q) in Split::ALL.iter().zip(&quota) {
            for unit in it.by_ref().take(q) {
                for &i in unit {
                    membership[i] = *s;
                }
            }
        }
    }

    Ok(SplitAssignment { seed, membership })
}

/// Hands out per-stratum quotas while tracking cumulative deficits.
struct Dealer {
    fractions: [f64; 3],
    assigned: [usize; 3],
    seen: usize,
}

impl Dealer {
    fn new(fractions: [f64; 3]) -> Self {
        Self {
            fractions,
            assigned: [0; 3],
            seen: 0,
        }
    }

    fn deal(&mut self, n: usize) -> [usize; 3] {
        self.seen += n;
        let mut q = self.fractions.map(|f| (n as f64 * f).floor() as usize);
        let used: usize = q.iter().sum();
        let rest = n.saturating_sub(used);
        if used > n {
            // fractions summing fractionally above one; shave the largest
            let big = (0..3).max_by(|&a, &b| q[a].cmp(&q[b])).unwrap();
            q[big] -= used - n;
        }
        let deficit = |s: usize, q: &[usize; 3]| {
            self.seen as f64 * self.fractions[s] - (self.assigned[s] + q[s]) as f64
        };
        let mut order: Vec<usize> = (0..3).filter(|&s| self.fractions[s] > 0.0).collect();
        order.sort_by(|&a, &b| deficit(b, &q).total_cmp(&deficit(a, &q)).then(a.cmp(&b)));
        for &s in order.iter().cycle().take(rest) {
            q[s] += 1;
        }
        debug_assert_eq!(q.iter().sum::<usize>(), n);
        for (a, add) in self.assigned.iter_mut().zip(q) {
            *a += add;
        }
        q
    }
}
