//! Classic Boruta: random-forest importance against permuted shadows, with an
//! exact binomial test on the accumulated hits.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::forest::{fit_forest, oob_importance, zscore_importance, ImportanceMethod};
use crate::hygiene::TrainPartition;
use crate::seed::{self, tag};
use crate::shadow::permuted_shadows;
use crate::stats::binomial_tails;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Important,
    Unimportant,
    Tentative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    #[default]
    None,
    Bonferroni,
}

/// What gets compared with the shadow maximum in each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HitRule {
    /// The current iteration's score.
    #[default]
    PerIteration,
    /// The mean of the feature's importance history so far.
    RunningMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BorutaConfig {
    pub max_iter: usize,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub alpha: f64,
    #[serde(default)]
    pub correction: Correction,
    #[serde(default)]
    pub importance: ImportanceMethod,
    #[serde(default)]
    pub hit_rule: HitRule,
    /// Fewest shadow columns per iteration; 1 keeps shadows strictly 1:1.
    #[serde(default = "default_min_shadows")]
    pub min_shadows: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_min_shadows() -> usize {
    5
}

impl Default for BorutaConfig {
    fn default() -> Self {
        BorutaConfig {
            max_iter: 100,
            n_estimators: 200,
            max_depth: None,
            alpha: 0.05,
            correction: Correction::None,
            importance: ImportanceMethod::OobPermutation,
            hit_rule: HitRule::PerIteration,
            min_shadows: default_min_shadows(),
            seed: 0,
        }
    }
}

impl BorutaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.min_shadows == 0 {
            return Err(Error::Config("min_shadows must be at least 1".into()));
        }
        if self.importance == ImportanceMethod::Perturbation {
            return Err(Error::Config("classic Boruta scores with a forest; perturbation importance is not available".into()));
        }
        Ok(())
    }
}

/// Outcome of one iteration of a selection run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    Ok,
    /// The learner's loss became non-finite; no hits recorded.
    Diverged,
    /// Baseline score no better than chance; hits discarded.
    ChanceLevel,
    /// No column lowered the score; no hits recorded.
    Degenerate,
}

/// Per-feature histories and decisions of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub feature_names: Vec<String>,
    pub hit_history: Vec<Vec<bool>>,
    pub importance_history: Vec<Vec<f64>>,
    pub decision: Vec<Decision>,
    /// Iteration (1-based) at which a feature was confirmed or rejected.
    pub decided_at: Vec<Option<usize>>,
    pub iterations_run: usize,
    pub iteration_status: Vec<IterationStatus>,
    /// Shadow maximum per iteration; `None` for iterations that were skipped.
    pub max_shadow_history: Vec<Option<f64>>,
    pub finalized: bool,
}

impl SelectionResult {
    /// Fresh result with every feature tentative.
    pub fn new(feature_names: Vec<String>) -> Self {
        let p = feature_names.len();
        SelectionResult {
            feature_names,
            hit_history: vec![Vec::new(); p],
            importance_history: vec![Vec::new(); p],
            decision: vec![Decision::Tentative; p],
            decided_at: vec![None; p],
            iterations_run: 0,
            iteration_status: Vec::new(),
            max_shadow_history: Vec::new(),
            finalized: false,
        }
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn hits(&self) -> Vec<usize> {
        self.hit_history
            .iter()
            .map(|h| h.iter().filter(|&&b| b).count())
            .collect()
    }

    /// Decides every feature by the at-least-`min_hits` rule and marks the
    /// result final.
    pub fn finalize_min_hits(&mut self, min_hits: usize) {
        let iterations = self.iterations_run;
        for (f, hits) in self.hits().into_iter().enumerate() {
            self.decision[f] = if hits >= min_hits {
                Decision::Important
            } else {
                Decision::Unimportant
            };
            self.decided_at[f] = Some(iterations);
        }
        self.finalized = true;
    }

    /// Names of the selected features.
    pub fn selected_names(&self) -> Result<Vec<String>> {
        Ok(selected_features(self)?
            .into_iter()
            .map(|f| self.feature_names[f].clone())
            .collect())
    }
}

/// Indices of features decided important, ascending.
pub fn selected_features(result: &SelectionResult) -> Result<Vec<usize>> {
    if !result.finalized {
        return Err(Error::NotFinalized);
    }
    Ok(result
        .decision
        .iter()
        .enumerate()
        .filter(|(_, d)| **d == Decision::Important)
        .map(|(f, _)| f)
        .collect())
}

/// Exact two-sided binomial decision at p = 1/2.
///
/// Important when `P(X >= hits)` falls below the (possibly Bonferroni
/// adjusted) level, unimportant when `P(X <= hits)` does.
pub fn binomial_decision(
    hits: usize,
    trials: usize,
    alpha: f64,
    correction: Correction,
    n_features: usize,
) -> Result<Decision> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let level = match correction {
        Correction::None => alpha,
        Correction::Bonferroni => alpha / n_features.max(1) as f64,
    };
    let (lower, upper) = binomial_tails(hits, trials)?;
    Ok(if upper < level {
        Decision::Important
    } else if lower < level {
        Decision::Unimportant
    } else {
        Decision::Tentative
    })
}

/// Appends permuted shadows to `current`. When fewer than `min_shadows`
/// features remain, the features are cycled so the best-shadow threshold is
/// still a maximum over several independent permutations; otherwise the last
/// noise feature would face a single coin-flip opponent.
fn shadowed(current: &Dataset, min_shadows: usize, seed: u64) -> Result<Dataset> {
    let p = current.n_features();
    if p >= min_shadows {
        return permuted_shadows(current, seed)?.augment(current);
    }
    let pool: Vec<usize> = (0..min_shadows).map(|k| k % p).collect();
    let shadows = permuted_shadows(&current.select_features(&pool)?, seed)?;
    let names = pool
        .iter()
        .enumerate()
        .map(|(k, &j)| match k / p {
            0 => format!("shadow_{}", current.feature_names()[j]),
            r => format!("shadow_{}_{r}", current.feature_names()[j]),
        })
        .collect();
    current.with_extra_columns(shadows.columns, names)
}

/// Runs classic Boruta on the training partition.
///
/// Each iteration shadows the features still in play (undecided plus
/// confirmed, padded to at least `min_shadows` shadows), fits a forest on
/// originals and shadows, and scores a hit for every undecided feature whose
/// importance beats the best shadow. Rejected features leave the design
/// matrix; confirmed ones stay but stop accumulating hits. Stops after
/// `max_iter` iterations or once nothing is tentative.
pub fn run_boruta(train: &TrainPartition, cfg: &BorutaConfig) -> Result<SelectionResult> {
    cfg.validate()?;
    let data = train.audited()?;
    if data.n_rows() == 0 || data.n_features() == 0 {
        return Err(Error::InvalidDataset("selection needs rows and features".into()));
    }
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let p = data.n_features();
    let mut result = SelectionResult::new(data.feature_names().to_vec());
    let mut active: Vec<usize> = (0..p).collect();

    for iter in 1..=cfg.max_iter {
        let data = train.audited()?;
        let current = data.select_features(&active)?;
        let augmented = shadowed(&current, cfg.min_shadows, seed::derive(cfg.seed, &[tag::SHADOW, iter as u64]))?;
        let forest = fit_forest(
            &augmented,
            cfg.n_estimators,
            cfg.max_depth,
            seed::derive(cfg.seed, &[tag::FOREST, iter as u64]),
        )?;
        let importance_seed = seed::derive(cfg.seed, &[tag::IMPORTANCE, iter as u64]);
        let report = match cfg.importance {
            ImportanceMethod::Zscore => zscore_importance(&forest, &augmented, active.len(), importance_seed)?,
            _ => oob_importance(&forest, &augmented, active.len(), importance_seed)?,
        };

        result.iterations_run = iter;
        result.iteration_status.push(IterationStatus::Ok);
        result.max_shadow_history.push(Some(report.max_shadow));

        for (k, &f) in active.iter().enumerate() {
            if result.decision[f] != Decision::Tentative {
                continue;
            }
            let score = report.scores[k];
            result.importance_history[f].push(score);
            let compared = match cfg.hit_rule {
                HitRule::PerIteration => score,
                HitRule::RunningMean => {
                    let h = &result.importance_history[f];
                    h.iter().sum::<f64>() / h.len() as f64
                }
            };
            result.hit_history[f].push(compared > report.max_shadow);
        }

        for &f in &active {
            if result.decision[f] != Decision::Tentative {
                continue;
            }
            let trials = result.hit_history[f].len();
            let hits = result.hit_history[f].iter().filter(|&&b| b).count();
            let d = binomial_decision(hits, trials, cfg.alpha, cfg.correction, p)?;
            if d != Decision::Tentative {
                result.decision[f] = d;
                result.decided_at[f] = Some(iter);
            }
        }
        active.retain(|&f| result.decision[f] != Decision::Unimportant);

        if !result.decision.contains(&Decision::Tentative) || active.is_empty() {
            break;
        }
    }
    result.finalized = true;
    Ok(result)
}
