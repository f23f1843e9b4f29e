//! Noise-augmented Boruta: a shallow network scores every column by the F1
//! drop under perturbation, originals compete with noisy shuffled shadows,
//! and a feature is kept once it has collected enough hits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boruta_classic::{IterationStatus, SelectionResult};
use crate::dataset::{compute_stats, normalize, FeatureStats};
use crate::error::{Error, Result};
use crate::hygiene::TrainPartition;
use crate::neural::{perturbation_importance, train_mlp, MlpSpec, PerturbMode};
use crate::seed::{self, tag};
use crate::shadow::noise_shadows;

pub use crate::boruta_classic::selected_features;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseBorutaConfig {
    pub max_iter: usize,
    pub mlp_spec: MlpSpec,
    pub n_multiplier: f64,
    #[serde(default)]
    pub perturb_mode: PerturbMode,
    #[serde(default = "default_true")]
    pub regenerate_shadows: bool,
    #[serde(default = "default_min_hits")]
    pub min_hits: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_min_hits() -> usize {
    1
}

impl Default for NoiseBorutaConfig {
    fn default() -> Self {
        NoiseBorutaConfig {
            max_iter: 100,
            mlp_spec: MlpSpec::default(),
            n_multiplier: 50.0,
            perturb_mode: PerturbMode::Shift,
            regenerate_shadows: true,
            min_hits: 1,
            seed: 0,
        }
    }
}

impl NoiseBorutaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.n_multiplier.is_finite() && self.n_multiplier > 0.0) {
            return Err(Error::Config(format!(
                "n_multiplier must be a positive number, got {}",
                self.n_multiplier
            )));
        }
        if self.min_hits == 0 {
            return Err(Error::Config("min_hits must be at least 1".into()));
        }
        self.mlp_spec.validate()
    }
}

/// What one iteration contributes to the run.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub status: IterationStatus,
    pub hits: Vec<bool>,
    /// Normalized importance of the original features (zeros when skipped).
    pub scores: Vec<f64>,
    pub max_shadow: Option<f64>,
}

/// Hits of the first `n_original` scores against the maximum of the rest.
pub fn hits_against_shadows(scores: &[f64], n_original: usize) -> (Vec<bool>, f64) {
    let max_shadow = scores[n_original..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (scores[..n_original].iter().map(|&s| s > max_shadow).collect(), max_shadow)
}

/// Runs iteration `iter` (0-based) of noise-augmented Boruta.
///
/// `stats` are the training-partition statistics that scale the shadow
/// noise.
pub fn run_iteration(
    train: &TrainPartition,
    stats: &FeatureStats,
    cfg: &NoiseBorutaConfig,
    iter: usize,
) -> Result<IterationOutcome> {
    let data = train.audited()?;
    let p = data.n_features();
    let shadow_iter = if cfg.regenerate_shadows { iter as u64 } else { 0 };
    let shadows = noise_shadows(data, stats, seed::derive(cfg.seed, &[tag::SHADOW, shadow_iter]))?;
    let augmented = shadows.augment(data)?;
    let normalized = normalize(&augmented, &compute_stats(&augmented)?)?;
    let sigma = compute_stats(&normalized)?;
    let x = normalized.to_matrix();

    let spec = MlpSpec {
        seed: seed::derive(cfg.seed, &[tag::MLP, iter as u64]),
        ..cfg.mlp_spec.clone()
    };
    let skipped = |status| IterationOutcome {
        status,
        hits: vec![false; p],
        scores: vec![0.0; p],
        max_shadow: None,
    };
    let model = match train_mlp(&x, normalized.labels(), normalized.n_classes(), &spec) {
        Ok(m) => m,
        Err(Error::TrainingDiverged { .. }) => return Ok(skipped(IterationStatus::Diverged)),
        Err(e) => return Err(e),
    };
    let score = perturbation_importance(
        &model,
        &x,
        normalized.labels(),
        &sigma,
        cfg.n_multiplier,
        cfg.perturb_mode,
        seed::derive(cfg.seed, &[tag::PERTURB, iter as u64]),
    )?;
    if score.baseline_f1 <= 1.0 / data.n_classes() as f64 {
        return Ok(skipped(IterationStatus::ChanceLevel));
    }
    if score.degenerate {
        return Ok(skipped(IterationStatus::Degenerate));
    }
    let (hits, max_shadow) = hits_against_shadows(&score.normalized, p);
    Ok(IterationOutcome {
        status: IterationStatus::Ok,
        hits,
        scores: score.normalized[..p].to_vec(),
        max_shadow: Some(max_shadow),
    })
}

/// Runs noise-augmented Boruta on the training partition.
///
/// Iterations are independent and run in parallel; their outcomes are merged
/// in iteration order. Every original feature competes in every iteration.
pub fn run_noise_boruta(train: &TrainPartition, cfg: &NoiseBorutaConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let data = train.audited()?;
    if data.n_rows() == 0 || data.n_features() == 0 {
        return Err(Error::InvalidDataset("selection needs rows and features".into()));
    }
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let stats = compute_stats(data)?;
    let outcomes = (0..cfg.max_iter)
        .into_par_iter()
        .map(|i| run_iteration(train, &stats, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    if outcomes.iter().all(|o| o.status == IterationStatus::Diverged) {
        return Err(Error::AllIterationsDiverged);
    }

    let mut result = SelectionResult::new(data.feature_names().to_vec());
    for o in outcomes {
        for (f, (&hit, &s)) in o.hits.iter().zip(&o.scores).enumerate() {
            result.hit_history[f].push(hit);
            result.importance_history[f].push(s);
        }
        result.iteration_status.push(o.status);
        result.max_shadow_history.push(o.max_shadow);
        result.iterations_run += 1;
    }
    result.finalize_min_hits(cfg.min_hits);
    Ok(result)
}
