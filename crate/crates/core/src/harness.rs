//! Experiment harness: selection on a held-out split, repeated-resampling
//! evaluation of the selected features, method comparison, the n ablation,
//! and report writers.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boruta_classic::{run_boruta, selected_features, BorutaConfig, Decision, SelectionResult};
use crate::boruta_noise::{run_noise_boruta, NoiseBorutaConfig};
use crate::dataset::{compute_stats, load_csv, normalize, stratified_split, Dataset, MissingPolicy, SplitSpec, TargetColumn};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, predict_forest};
use crate::hygiene::TrainPartition;
use crate::neural::{self, f1_score, train_mlp, Averaging, MlpSpec};
use crate::seed::{self, tag};
use crate::stats::{mann_whitney_u, prediction_entropy, shapiro_wilk, t_test_two_sample, EntropyRecord, TTestVariant, TestResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Boruta,
    NoiseBoruta,
    #[default]
    Both,
}

impl Method {
    /// The single methods this choice stands for.
    pub fn expand(self) -> Vec<Method> {
        match self {
            Method::Both => vec![Method::Boruta, Method::NoiseBoruta],
            m => vec![m],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Boruta => "boruta",
            Method::NoiseBoruta => "noise_boruta",
            Method::Both => "both",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "boruta" => Ok(Method::Boruta),
            "noise_boruta" => Ok(Method::NoiseBoruta),
            "both" => Ok(Method::Both),
            _ => Err(Error::Config(format!(
                "unknown method `{s}` (expected boruta, noise_boruta or both)"
            ))),
        }
    }
}

/// Classifier used to score a feature subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Evaluator {
    #[default]
    Mlp,
    Forest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestSpec {
    pub n_estimators: usize,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl Default for ForestSpec {
    fn default() -> Self {
        ForestSpec {
            n_estimators: 200,
            max_depth: None,
        }
    }
}

/// Full description of an experiment. Field names match the JSON config.
///
/// The seeds inside the nested selection and split configs are replaced by
/// streams derived from `master_seed` before anything runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: PathBuf,
    pub target: TargetColumn,
    #[serde(default)]
    pub missing_policy: MissingPolicy,
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub boruta: BorutaConfig,
    #[serde(default)]
    pub noise_boruta: NoiseBorutaConfig,
    #[serde(default)]
    pub evaluator: Evaluator,
    #[serde(default = "default_eval_mlp")]
    pub eval_mlp: MlpSpec,
    #[serde(default)]
    pub eval_forest: ForestSpec,
    #[serde(default = "default_eval_runs")]
    pub eval_runs: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_ablation_n")]
    pub ablation_n: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub compare_alpha: f64,
    #[serde(default)]
    pub master_seed: u64,
    /// Not echoed into reports: where output goes does not change results.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    /// Thread count; `None` uses every core. Not echoed into reports.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
}

pub fn default_eval_mlp() -> MlpSpec {
    MlpSpec {
        hidden_layers: vec![512, 512, 256],
        epochs: 1000,
        ..MlpSpec::default()
    }
}

fn default_eval_runs() -> usize {
    100
}

fn default_ablation_n() -> Vec<f64> {
    vec![5.0, 20.0, 50.0]
}

fn default_alpha() -> f64 {
    0.05
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Defaults for everything except the data location.
    pub fn new(data: impl Into<PathBuf>, target: TargetColumn) -> Self {
        ExperimentConfig {
            data: data.into(),
            target,
            missing_policy: MissingPolicy::default(),
            method: Method::default(),
            boruta: BorutaConfig::default(),
            noise_boruta: NoiseBorutaConfig::default(),
            evaluator: Evaluator::default(),
            eval_mlp: default_eval_mlp(),
            eval_forest: ForestSpec::default(),
            eval_runs: default_eval_runs(),
            split: SplitSpec::default(),
            ablation_n: default_ablation_n(),
            compare_alpha: default_alpha(),
            master_seed: 0,
            output_dir: default_output_dir(),
            workers: None,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.eval_runs == 0 {
            return Err(Error::Config("eval_runs must be at least 1".into()));
        }
        if self.ablation_n.iter().any(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::Config("ablation_n values must be positive".into()));
        }
        if !(self.compare_alpha > 0.0 && self.compare_alpha < 1.0) {
            return Err(Error::Config("compare_alpha must lie in (0, 1)".into()));
        }
        if self.eval_forest.n_estimators == 0 {
            return Err(Error::Config("eval_forest.n_estimators must be at least 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.boruta.validate()?;
        self.noise_boruta.validate()?;
        self.eval_mlp.validate()?;
        self.split.validate()
    }

    /// Copy with every nested seed derived from `master_seed`.
    pub fn resolved(&self) -> ExperimentConfig {
        let mut c = self.clone();
        let m = self.master_seed;
        c.split.seed = seed::derive(m, &[tag::SPLIT]);
        c.boruta.seed = seed::derive(m, &[tag::BORUTA]);
        c.noise_boruta.seed = seed::derive(m, &[tag::NOISE_BORUTA]);
        c.noise_boruta.mlp_spec.seed = 0;
        c.eval_mlp.seed = 0;
        c
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?
            .install(f),
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    load_csv(&cfg.data, &cfg.target, cfg.missing_policy)
}

/// Fills missing cells of both sides with the training side's column means.
fn impute_from_train(train: Dataset, test: Dataset) -> Result<(Dataset, Dataset)> {
    if !train.has_missing() && !test.has_missing() {
        return Ok((train, test));
    }
    let fill = train.observed_means()?;
    Ok((train.impute(&fill)?, test.impute(&fill)?))
}

/// The one split used for selection; the test side is sealed.
pub fn selection_split(cfg: &ExperimentConfig, data: &Dataset) -> Result<(TrainPartition, Dataset)> {
    let cfg = cfg.resolved();
    let (train, test) = stratified_split(data, &cfg.split)?;
    let (train, test) = impute_from_train(train, test)?;
    let partition = TrainPartition::from_split(train, &test);
    Ok((partition, test))
}

/// Outcome of one selection method on the selection split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionArtifact {
    pub method: Method,
    pub selected: Vec<usize>,
    pub selected_names: Vec<String>,
    pub tentative: Vec<usize>,
    /// Set when nothing was selected.
    pub empty_selection: bool,
    pub train_rows: usize,
    pub test_rows: usize,
    pub result: SelectionResult,
}

impl SelectionArtifact {
    fn new(method: Method, result: SelectionResult, train_rows: usize, test_rows: usize) -> Result<Self> {
        let selected = selected_features(&result)?;
        let selected_names = result.selected_names()?;
        let tentative = result
            .decision
            .iter()
            .enumerate()
            .filter(|(_, d)| **d == Decision::Tentative)
            .map(|(f, _)| f)
            .collect();
        Ok(SelectionArtifact {
            method,
            empty_selection: selected.is_empty(),
            selected,
            selected_names,
            tentative,
            train_rows,
            test_rows,
            result,
        })
    }
}

/// Runs one selection method (`Boruta` or `NoiseBoruta`) on the training
/// side of the selection split.
pub fn run_selection(cfg: &ExperimentConfig, data: &Dataset, method: Method) -> Result<SelectionArtifact> {
    let rcfg = cfg.resolved();
    let (train, test) = selection_split(cfg, data)?;
    let train_rows = train.audited()?.n_rows();
    let result = match method {
        Method::Boruta => run_boruta(&train, &rcfg.boruta)?,
        Method::NoiseBoruta => run_noise_boruta(&train, &rcfg.noise_boruta)?,
        Method::Both => return Err(Error::invalid("run_selection takes a single method")),
    };
    SelectionArtifact::new(method, result, train_rows, test.n_rows())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    /// The configuration with derived seeds filled in.
    pub config: ExperimentConfig,
    pub master_seed: u64,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.resolved(),
            master_seed: cfg.master_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionDocument {
    pub selections: Vec<SelectionArtifact>,
    pub provenance: Provenance,
}

/// Runs every method named by `cfg.method`.
pub fn run_selections(cfg: &ExperimentConfig, data: &Dataset) -> Result<SelectionDocument> {
    let selections = cfg
        .method
        .expand()
        .into_iter()
        .map(|m| run_selection(cfg, data, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(SelectionDocument {
        selections,
        provenance: Provenance::of(cfg),
    })
}

/// Split and model seeds of evaluation attempt `attempt`.
pub fn eval_seeds(master_seed: u64, attempt: usize) -> (u64, u64) {
    (
        seed::derive(master_seed, &[tag::EVAL, attempt as u64, 0]),
        seed::derive(master_seed, &[tag::EVAL, attempt as u64, 1]),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub f1_runs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (divisor N-1); 0 for a single run.
    pub std: f64,
    pub notes: Vec<String>,
    pub selected_feature_count: usize,
    pub selected_features: Vec<usize>,
    pub selected_feature_names: Vec<String>,
    /// Attempt index behind each entry of `f1_runs`.
    pub attempts_used: Vec<usize>,
    pub diverged_runs: usize,
    pub test_results: Vec<TestResult>,
    /// Attempt whose test-set predictions are recorded in `entropy`.
    pub entropy_attempt: usize,
    pub entropy: EntropyRecord,
    pub evaluator: Evaluator,
}

/// Mean and sample standard deviation, or `(mean, 0)` for one value.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

enum Attempt {
    Done { f1: f64, entropy: EntropyRecord },
    Diverged,
}

fn run_attempt(cfg: &ExperimentConfig, data: &Dataset, selected: &[usize], attempt: usize) -> Result<Attempt> {
    let (split_seed, model_seed) = eval_seeds(cfg.master_seed, attempt);
    let subset = data.select_features(selected)?;
    let split = SplitSpec {
        seed: split_seed,
        ..cfg.split
    };
    let (train, test) = stratified_split(&subset, &split)?;
    let (train, test) = impute_from_train(train, test)?;
    let stats = compute_stats(&train)?;
    let train = normalize(&train, &stats)?;
    let test = normalize(&test, &stats)?;
    let (xtr, xte) = (train.to_matrix(), test.to_matrix());
    let c = data.n_classes();

    let (pred, probs) = match cfg.evaluator {
        Evaluator::Mlp => {
            let spec = MlpSpec {
                seed: model_seed,
                ..cfg.eval_mlp.clone()
            };
            let model = match train_mlp(&xtr, train.labels(), c, &spec) {
                Ok(m) => m,
                Err(Error::TrainingDiverged { .. }) => return Ok(Attempt::Diverged),
                Err(e) => return Err(e),
            };
            (model.predict(&xte)?, neural::predict_proba(&model, &xte)?)
        }
        Evaluator::Forest => {
            let model = fit_forest(&train, cfg.eval_forest.n_estimators, cfg.eval_forest.max_depth, model_seed)?;
            (predict_forest(&model, &xte)?, model.predict_proba(&xte)?)
        }
    };
    let f1 = f1_score(test.labels(), &pred, Averaging::for_classes(c))?;
    let entropy = prediction_entropy(&probs, test.labels(), &pred)?;
    Ok(Attempt::Done { f1, entropy })
}

/// Trains the evaluator `eval_runs` times on fresh stratified splits of the
/// whole dataset restricted to `selected`, scoring test F1 each time.
///
/// Runs whose training diverges are dropped and replaced by further attempts,
/// up to `2 * eval_runs` attempts in total. Attempts run in parallel and are
/// merged in attempt order.
pub fn evaluate_selection(cfg: &ExperimentConfig, data: &Dataset, selected: &[usize], label: &str) -> Result<EvaluationReport> {
    cfg.validate()?;
    if selected.is_empty() {
        return Err(Error::invalid("cannot evaluate an empty feature selection"));
    }
    let max_attempts = 2 * cfg.eval_runs;
    let mut done: Vec<(usize, f64, EntropyRecord)> = Vec::new();
    let mut diverged = 0;
    let mut next = 0;
    while done.len() < cfg.eval_runs && next < max_attempts {
        let batch_end = (next + cfg.eval_runs - done.len()).min(max_attempts);
        let outcomes = (next..batch_end)
            .into_par_iter()
            .map(|a| run_attempt(cfg, data, selected, a).map(|o| (a, o)))
            .collect::<Result<Vec<_>>>()?;
        for (a, o) in outcomes {
            match o {
                Attempt::Done { f1, entropy } => done.push((a, f1, entropy)),
                Attempt::Diverged => diverged += 1,
            }
        }
        next = batch_end;
    }
    if done.is_empty() {
        return Err(Error::AllIterationsDiverged);
    }

    let f1_runs: Vec<f64> = done.iter().map(|d| d.1).collect();
    let (mean, std) = mean_std(&f1_runs);
    let mut notes = Vec::new();
    if f1_runs.len() == 1 {
        notes.push("single run: standard deviation undefined, reported as 0".to_string());
    }
    if diverged > 0 {
        notes.push(format!("{diverged} diverged run(s) excluded and redrawn"));
    }
    if done.len() < cfg.eval_runs {
        notes.push(format!(
            "only {} of {} runs completed within {max_attempts} attempts",
            done.len(),
            cfg.eval_runs
        ));
    }
    let mut test_results = Vec::new();
    if f1_runs.len() >= 3 {
        match shapiro_wilk(&f1_runs) {
            Ok(t) => test_results.push(t),
            Err(e) => notes.push(format!("normality test skipped: {e}")),
        }
    }
    let names = data.feature_names();
    let attempts_used: Vec<usize> = done.iter().map(|d| d.0).collect();
    let (entropy_attempt, _, entropy) = done.swap_remove(0);
    Ok(EvaluationReport {
        method: label.to_string(),
        mean,
        std,
        notes,
        selected_feature_count: selected.len(),
        selected_features: selected.to_vec(),
        selected_feature_names: selected.iter().map(|&f| names[f].clone()).collect(),
        attempts_used,
        f1_runs,
        diverged_runs: diverged,
        test_results,
        entropy_attempt,
        entropy,
        evaluator: cfg.evaluator,
    })
}

/// Statistical comparison of two F1 samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub alpha: f64,
    /// Normality tests of `a` and `b`, then the location test.
    pub tests: Vec<TestResult>,
    pub p_value: f64,
    /// Name of the higher-mean method, or `indistinguishable`.
    pub verdict: String,
    pub notes: Vec<String>,
}

/// Shapiro-Wilk on both samples picks the two-sample t-test (both normal at
/// `alpha`) or Mann-Whitney U; a significant difference names the method with
/// the higher mean.
pub fn compare_methods(a: &EvaluationReport, b: &EvaluationReport, alpha: f64) -> Result<Comparison> {
    if a.f1_runs.len() < 3 || b.f1_runs.len() < 3 {
        return Err(Error::invalid("comparison needs at least 3 runs per method"));
    }
    let mut tests = Vec::new();
    let mut notes = Vec::new();
    let mut both_normal = true;
    for r in [a, b] {
        match shapiro_wilk(&r.f1_runs) {
            Ok(t) => {
                both_normal &= t.p_value > alpha;
                tests.push(t);
            }
            Err(e) => {
                both_normal = false;
                notes.push(format!("{}: normality test not applicable ({e}); treated as non-normal", r.method));
            }
        }
    }
    let location = if both_normal {
        t_test_two_sample(&a.f1_runs, &b.f1_runs, TTestVariant::StudentPooled)?
    } else {
        mann_whitney_u(&a.f1_runs, &b.f1_runs)?
    };
    let p_value = location.p_value;
    tests.push(location);
    let (ma, _) = mean_std(&a.f1_runs);
    let (mb, _) = mean_std(&b.f1_runs);
    let verdict = if p_value < alpha && ma != mb {
        if ma > mb { a.method.clone() } else { b.method.clone() }
    } else {
        "indistinguishable".to_string()
    };
    Ok(Comparison {
        a: a.method.clone(),
        b: b.method.clone(),
        alpha,
        tests,
        p_value,
        verdict,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationDocument {
    pub reports: Vec<EvaluationReport>,
    pub comparison: Option<Comparison>,
    pub warnings: Vec<String>,
    pub provenance: Provenance,
}

/// Evaluates the selections in `selections` and compares them when there
/// are two.
pub fn evaluate_selections(cfg: &ExperimentConfig, data: &Dataset, selections: &SelectionDocument) -> Result<EvaluationDocument> {
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for s in &selections.selections {
        if s.empty_selection {
            warnings.push(format!("{}: empty selection, not evaluated", s.method.label()));
            continue;
        }
        reports.push(evaluate_selection(cfg, data, &s.selected, s.method.label())?);
    }
    let comparison = if reports.len() == 2 {
        match compare_methods(&reports[0], &reports[1], cfg.compare_alpha) {
            Ok(c) => Some(c),
            Err(e) => {
                warnings.push(format!("comparison skipped: {e}"));
                None
            }
        }
    } else {
        None
    };
    Ok(EvaluationDocument {
        reports,
        comparison,
        warnings,
        provenance: Provenance::of(cfg),
    })
}

/// Selection followed by evaluation, as run by the `evaluate` command.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<(SelectionDocument, EvaluationDocument)> {
    cfg.validate()?;
    with_workers(cfg.workers, || {
        let data = load_data(cfg)?;
        let selections = run_selections(cfg, &data)?;
        let evaluation = evaluate_selections(cfg, &data, &selections)?;
        Ok((selections, evaluation))
    })
}

/// Everything except `n` that an ablation row depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub max_iter: usize,
    pub mlp_spec: MlpSpec,
    pub perturb_mode: neural::PerturbMode,
    pub regenerate_shadows: bool,
    pub min_hits: usize,
    pub selection_seed: u64,
    pub split: SplitSpec,
    pub evaluator: Evaluator,
    pub eval_mlp: MlpSpec,
    pub eval_runs: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub n: f64,
    pub selected: usize,
    pub selected_names: Vec<String>,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub frozen: FrozenParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub provenance: Provenance,
}

/// Noise-augmented selection and evaluation for each multiplier in
/// `cfg.ablation_n`, everything else held fixed. An empty selection yields a
/// row with zero count and zero scores.
pub fn run_ablation(cfg: &ExperimentConfig, data: &Dataset) -> Result<AblationReport> {
    cfg.validate()?;
    if cfg.ablation_n.is_empty() {
        return Err(Error::Config("ablation_n must not be empty".into()));
    }
    let rcfg = cfg.resolved();
    let (train, _test) = selection_split(cfg, data)?;
    let mut rows = Vec::new();
    for &n in &cfg.ablation_n {
        let nb = NoiseBorutaConfig {
            n_multiplier: n,
            ..rcfg.noise_boruta.clone()
        };
        let result = run_noise_boruta(&train, &nb)?;
        let selected = selected_features(&result)?;
        let (f1_mean, f1_std) = if selected.is_empty() {
            (0.0, 0.0)
        } else {
            let r = evaluate_selection(cfg, data, &selected, &format!("noise_boruta_n{n}"))?;
            (r.mean, r.std)
        };
        rows.push(AblationRow {
            n,
            selected: selected.len(),
            selected_names: result.selected_names()?,
            f1_mean,
            f1_std,
            frozen: FrozenParams {
                max_iter: nb.max_iter,
                mlp_spec: nb.mlp_spec.clone(),
                perturb_mode: nb.perturb_mode,
                regenerate_shadows: nb.regenerate_shadows,
                min_hits: nb.min_hits,
                selection_seed: nb.seed,
                split: rcfg.split,
                evaluator: rcfg.evaluator,
                eval_mlp: rcfg.eval_mlp.clone(),
                eval_runs: rcfg.eval_runs,
                master_seed: rcfg.master_seed,
            },
        });
    }
    Ok(AblationReport {
        rows,
        provenance: Provenance::of(cfg),
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn write_rows(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_f1_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    write_rows(
        path,
        &["run", "f1"],
        report
            .f1_runs
            .iter()
            .enumerate()
            .map(|(i, f)| vec![i.to_string(), f.to_string()]),
    )
}

pub fn write_entropy_csv(path: &Path, entropy: &EntropyRecord) -> Result<()> {
    write_rows(
        path,
        &["instance", "entropy", "correct"],
        entropy
            .entropy
            .iter()
            .zip(&entropy.correct)
            .enumerate()
            .map(|(i, (h, c))| vec![i.to_string(), h.to_string(), c.to_string()]),
    )
}

pub fn write_ablation_csv(path: &Path, report: &AblationReport) -> Result<()> {
    write_rows(
        path,
        &["n", "selected", "f1_mean", "f1_std"],
        report.rows.iter().map(|r| {
            vec![
                r.n.to_string(),
                r.selected.to_string(),
                r.f1_mean.to_string(),
                r.f1_std.to_string(),
            ]
        }),
    )
}

/// Writes `evaluation.json` plus per-run F1 and entropy CSVs. With one report
/// the CSVs go into `dir`; with several, into `dir/<method>/`.
pub fn write_evaluation(dir: &Path, doc: &EvaluationDocument) -> Result<()> {
    write_json(&dir.join("evaluation.json"), doc)?;
    let nested = doc.reports.len() > 1;
    for r in &doc.reports {
        let d = if nested { dir.join(&r.method) } else { dir.to_path_buf() };
        write_f1_csv(&d.join("f1_runs.csv"), r)?;
        write_entropy_csv(&d.join("entropy.csv"), &r.entropy)?;
    }
    Ok(())
}

pub fn write_selection(dir: &Path, doc: &SelectionDocument) -> Result<()> {
    write_json(&dir.join("selection.json"), doc)
}

pub fn write_ablation(dir: &Path, report: &AblationReport) -> Result<()> {
    write_json(&dir.join("ablation.json"), report)?;
    write_ablation_csv(&dir.join("ablation.csv"), report)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
