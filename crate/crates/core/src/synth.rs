//! Synthetic IMC-like datasets with known ground truth.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::data::{CellRecord, Dataset, Point, ProteinPanel};
use crate::error::{Error, Result};

/// Archetype expression outside a type's marker block.
const BASELINE: f64 = 2.0;
/// Extra expression on a type's own marker block.
const MARKER_GAIN: f64 = 4.0;
/// Spacing of the grid type clusters are placed on.
const CLUSTER_SPACING: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub cells_per_sample: usize,
    pub n_types: usize,
    pub n_proteins: usize,
    pub n_statuses: usize,
    /// Distance between archetypes over per-coordinate noise sd; `inf` is noise-free.
    pub separation: f64,
    /// Cluster spacing over the within-cluster sd of positions.
    pub spatial_clustering: f64,
    /// Relative composition shift between status cohorts, in `[0, 1)`.
    pub status_effect: f64,
    pub seed: u64,
    /// Optional names; generated when absent.
    pub protein_names: Option<Vec<String>>,
    pub type_names: Option<Vec<String>>,
    pub status_names: Option<Vec<String>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 10,
            cells_per_sample: 500,
            n_types: 7,
            n_proteins: 38,
            n_statuses: 2,
            separation: 2.0,
            spatial_clustering: 5.0,
            status_effect: 0.5,
            seed: 0,
            protein_names: None,
            type_names: None,
            status_names: None,
        }
    }
}

fn names(given: &Option<Vec<String>>, n: usize, what: &str, prefix: &str) -> Result<Vec<String>> {
    match given {
        Some(v) if v.len() != n => Err(Error::InvalidArgument(format!(
            "{} {what} names for {n} {what}s",
            v.len()
        ))),
        Some(v) => Ok(v.clone()),
        None => Ok((0..n).map(|i| format!("{prefix}{i:02}")).collect()),
    }
}

impl SynthConfig {
    /// Shape of the diabetes cohort: 38 proteins, seven types, two statuses.
    pub fn diabetes_like() -> Self {
        let types = [
            "T cell",
            "Helper T cell",
            "CD8 T/Cytotoxic T cell",
            "Neutrophils",
            "Monocytes/Macrophages",
            "Immune cell",
            "other",
        ];
        Self {
            n_types: 7,
            n_proteins: 38,
            type_names: Some(types.map(String::from).to_vec()),
            status_names: Some(vec![
                "long-duration diabetes".into(),
                "non-diabetic control".into(),
            ]),
            ..Self::default()
        }
    }

    /// Shape of the brain tumor cohort: 21 proteins, six types, two statuses.
    pub fn brain_tumor_like() -> Self {
        let types = [
            "Tc cell",
            "B cell",
            "Astrocytes",
            "M1-like MDMs",
            "M2-like MDMs",
            "undefined",
        ];
        Self {
            n_types: 6,
            n_proteins: 21,
            type_names: Some(types.map(String::from).to_vec()),
            status_names: Some(vec!["glioblastoma".into(), "brain metastasis".into()]),
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "diabetes_like" | "diabetes" => Ok(Self::diabetes_like()),
            "brain_tumor_like" | "brain_tumor" => Ok(Self::brain_tumor_like()),
            other => Err(Error::InvalidArgument(format!("unknown preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_samples", self.n_samples),
            ("cells_per_sample", self.cells_per_sample),
            ("n_types", self.n_types),
            ("n_proteins", self.n_proteins),
            ("n_statuses", self.n_statuses),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if self.n_proteins < self.n_types {
            return Err(Error::InvalidArgument(format!(
                "need at least one marker protein per type: {} proteins, {} types",
                self.n_proteins, self.n_types
            )));
        }
        if self.separation.is_nan() || self.separation <= 0.0 {
            return Err(Error::InvalidArgument("separation must be > 0".into()));
        }
        if !(self.spatial_clustering.is_finite() && self.spatial_clustering > 0.0) {
            return Err(Error::InvalidArgument(
                "spatial_clustering must be finite and > 0".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.status_effect) {
            return Err(Error::InvalidArgument(
                "status_effect must lie in [0, 1)".into(),
            ));
        }
        names(&self.protein_names, self.n_proteins, "protein", "P")?;
        names(&self.type_names, self.n_types, "type", "type_")?;
        names(&self.status_names, self.n_statuses, "status", "status_")?;
        Ok(())
    }

    /// Size of each type's marker block.
    pub fn marker_block(&self) -> usize {
        self.n_proteins / self.n_types
    }

    /// Per-coordinate noise sd implied by the separation ratio.
    pub fn noise_sd(&self) -> f64 {
        let delta = MARKER_GAIN * (2.0 * self.marker_block() as f64).sqrt();
        delta / self.separation
    }

    /// Noise-free expression profile of type `t`.
    pub fn archetype(&self, t: usize) -> Vec<f64> {
        let s = self.marker_block();
        (0..self.n_proteins)
            .map(|p| {
                if p / s == t && p < s * self.n_types {
                    BASELINE + MARKER_GAIN
                } else {
                    BASELINE
                }
            })
            .collect()
    }

    /// Status of sample `s`, as an index into the status names.
    pub fn status_of(&self, sample: usize) -> usize {
        sample % self.n_statuses
    }

    /// Expected type proportions for status cohort `status`.
    ///
    /// Status 0 favors the first half of the types, every other status the rest.
    pub fn composition(&self, status: usize) -> Vec<f64> {
        let half = self.n_types.div_ceil(2);
        let w: Vec<f64> = (0..self.n_types)
            .map(|t| {
                if (t < half) == (status == 0) {
                    1.0 + self.status_effect
                } else {
                    1.0 - self.status_effect
                }
            })
            .collect();
        let total: f64 = w.iter().sum();
        w.into_iter().map(|x| x / total).collect()
    }
}

/// Deterministic draw of a fully labeled dataset.
pub fn generate(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let proteins = names(&config.protein_names, config.n_proteins, "protein", "P")?;
    let types = names(&config.type_names, config.n_types, "type", "type_")?;
    let statuses = names(&config.status_names, config.n_statuses, "status", "status_")?;
    let panel = ProteinPanel::new(proteins)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sd = config.noise_sd();
    let noise = Normal::new(0.0, if sd.is_finite() { sd } else { 0.0 }).expect("finite sd");
    let jitter = Normal::new(0.0, CLUSTER_SPACING / config.spatial_clustering).expect("finite sd");
    let archetypes: Vec<Vec<f64>> = (0..config.n_types).map(|t| config.archetype(t)).collect();
    let grid = (config.n_types as f64).sqrt().ceil() as usize;
    let width = (config.n_samples - 1).to_string().len().max(2);
    let cell_width = (config.cells_per_sample - 1).to_string().len().max(3);

    let mut cells = Vec::with_capacity(config.n_samples * config.cells_per_sample);
    for s in 0..config.n_samples {
        let status = config.status_of(s);
        let pick = WeightedIndex::new(config.composition(status))
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut slots: Vec<usize> = (0..grid * grid).collect();
        slots.shuffle(&mut rng);
        let centers: Vec<Point> = slots[..config.n_types]
            .iter()
            .map(|&k| {
                Point::new(
                    ((k % grid) as f64 + 0.5) * CLUSTER_SPACING,
                    ((k / grid) as f64 + 0.5) * CLUSTER_SPACING,
                )
            })
            .collect();
        let sample_id = format!("S{s:0width$}");
        for c in 0..config.cells_per_sample {
            let t = pick.sample(&mut rng);
            let position = Point::new(
                centers[t].x + jitter.sample(&mut rng),
                centers[t].y + jitter.sample(&mut rng),
            );
            let expression = archetypes[t]
                .iter()
                .map(|&a| (a + noise.sample(&mut rng)).max(0.0))
                .collect();
            cells.push(CellRecord {
                cell_id: format!("{sample_id}_{c:0cell_width$}"),
                sample_id: sample_id.clone(),
                expression,
                position,
                cell_type: Some(types[t].clone()),
                status: Some(statuses[status].clone()),
            });
        }
    }
    Dataset::with_vocabularies(panel, cells, Some(types), Some(statuses))
}
