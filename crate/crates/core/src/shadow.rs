//! Shadow features: randomized copies of the originals that compete with them.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, FeatureStats};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShadowMode {
    Permuted,
    NoiseAugmented,
}

/// One shadow column per source feature.
#[derive(Debug, Clone, PartialEq)]
pub struct ShadowSet {
    pub columns: Vec<Vec<f64>>,
    /// Source feature of each shadow column.
    pub origin: Vec<usize>,
    pub mode: ShadowMode,
    pub seed: u64,
}

impl ShadowSet {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Appends the shadows to `d` as `shadow_<name>` columns.
    ///
    /// Originals keep indices `0..p`, shadow `k` lands at `p + k`.
    pub fn augment(&self, d: &Dataset) -> Result<Dataset> {
        let names = self
            .origin
            .iter()
            .map(|&j| format!("shadow_{}", d.feature_names()[j]))
            .collect();
        d.with_extra_columns(self.columns.clone(), names)
    }
}

/// Independently shuffled copy of every column.
pub fn permuted_shadows(d: &Dataset, seed: u64) -> Result<ShadowSet> {
    if d.n_rows() == 0 {
        return Err(Error::InvalidDataset("cannot shadow an empty dataset".into()));
    }
    let columns = d
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mut c = col.clone();
            c.shuffle(&mut seed::rng(seed, &[j as u64]));
            c
        })
        .collect();
    Ok(ShadowSet {
        columns,
        origin: (0..d.n_features()).collect(),
        mode: ShadowMode::Permuted,
        seed,
    })
}

/// Every column plus per-element Gaussian noise with the column's standard
/// deviation, then shuffled.
pub fn noise_shadows(d: &Dataset, stats: &FeatureStats, seed: u64) -> Result<ShadowSet> {
    if d.n_rows() == 0 {
        return Err(Error::InvalidDataset("cannot shadow an empty dataset".into()));
    }
    if stats.n_features() != d.n_features() {
        return Err(Error::DimensionMismatch {
            expected: d.n_features(),
            actual: stats.n_features(),
            context: "stats vs dataset features",
        });
    }
    let columns = d
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let mut rng = seed::rng(seed, &[j as u64]);
            let delta = stats.std[j];
            let mut c: Vec<f64> = col
                .iter()
                .map(|&x| x + delta * rng.sample::<f64, _>(StandardNormal))
                .collect();
            c.shuffle(&mut rng);
            c
        })
        .collect();
    Ok(ShadowSet {
        columns,
        origin: (0..d.n_features()).collect(),
        mode: ShadowMode::NoiseAugmented,
        seed,
    })
}
