//! Tabular classification data: loading, statistics, scaling, splitting and
//! synthetic generation.
//!
//! Features are stored column-major since tree fitting, shadow generation and
//! per-feature statistics all walk one column at a time.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    n_classes: usize,
    class_names: Vec<String>,
    /// Position of every row in the originally loaded table.
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from feature columns and labels in `0..n_classes`.
    ///
    /// Class names default to the decimal class index.
    pub fn new(
        columns: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        n_classes: usize,
    ) -> Result<Self> {
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        let row_ids = (0..labels.len()).collect();
        let d = Dataset {
            columns,
            labels,
            feature_names,
            n_classes,
            class_names,
            row_ids,
        };
        d.validate(false)?;
        Ok(d)
    }

    /// Builds a dataset with default feature names `f0, f1, ...`.
    pub fn from_columns(columns: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        let names = (0..columns.len()).map(|j| format!("f{j}")).collect();
        Dataset::new(columns, labels, names, n_classes)
    }

    fn validate(&self, allow_missing: bool) -> Result<()> {
        if self.n_classes == 0 {
            return Err(Error::InvalidDataset("n_classes must be positive".into()));
        }
        if self.feature_names.len() != self.columns.len() {
            return Err(Error::DimensionMismatch {
                expected: self.columns.len(),
                actual: self.feature_names.len(),
                context: "feature names vs columns",
            });
        }
        if self.class_names.len() != self.n_classes {
            return Err(Error::InvalidDataset("class names do not match n_classes".into()));
        }
        let mut seen = HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidDataset(format!("duplicate feature name `{name}`")));
            }
        }
        let n = self.labels.len();
        if self.row_ids.len() != n {
            return Err(Error::InvalidDataset("row id count differs from label count".into()));
        }
        for col in &self.columns {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: col.len(),
                    context: "column length vs label count",
                });
            }
            if !allow_missing && col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidDataset("non-finite feature value".into()));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&y| y >= self.n_classes) {
            return Err(Error::InvalidDataset(format!(
                "label {bad} outside 0..{}",
                self.n_classes
            )));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Original label values, indexed by class id.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    #[inline]
    pub fn value(&self, row: usize, feature: usize) -> f64 {
        self.columns[feature][row]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// Row-major copy of the feature matrix.
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_columns(&self.columns)
    }

    /// Instances per class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().flatten().any(|v| v.is_nan())
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| idx.iter().map(|&i| c[i]).collect())
                .collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            feature_names: self.feature_names.clone(),
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
            row_ids: idx.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Keeps the listed feature columns, in the given order.
    pub fn select_features(&self, idx: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = idx.iter().find(|&&j| j >= self.n_features()) {
            return Err(Error::invalid(format!(
                "feature index {bad} out of range for {} features",
                self.n_features()
            )));
        }
        Ok(Dataset {
            columns: idx.iter().map(|&j| self.columns[j].clone()).collect(),
            labels: self.labels.clone(),
            feature_names: idx.iter().map(|&j| self.feature_names[j].clone()).collect(),
            n_classes: self.n_classes,
            class_names: self.class_names.clone(),
            row_ids: self.row_ids.clone(),
        })
    }

    /// Appends columns after the existing features.
    pub fn with_extra_columns(&self, columns: Vec<Vec<f64>>, names: Vec<String>) -> Result<Dataset> {
        let mut d = self.clone();
        d.columns.extend(columns);
        d.feature_names.extend(names);
        d.validate(self.has_missing())?;
        Ok(d)
    }

    /// Replaces the feature columns, keeping labels and row identity.
    pub fn with_columns(&self, columns: Vec<Vec<f64>>) -> Result<Dataset> {
        let mut d = self.clone();
        d.columns = columns;
        d.validate(false)?;
        Ok(d)
    }

    /// Per-column means ignoring missing (NaN) cells.
    pub fn observed_means(&self) -> Result<Vec<f64>> {
        self.columns
            .iter()
            .zip(&self.feature_names)
            .map(|(col, name)| {
                let (sum, count) = col
                    .iter()
                    .filter(|v| !v.is_nan())
                    .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
                if count == 0 {
                    Err(Error::AllMissing {
                        column: name.clone(),
                    })
                } else {
                    Ok(sum / count as f64)
                }
            })
            .collect()
    }

    /// Replaces missing cells with the supplied per-column values.
    pub fn impute(&self, fill: &[f64]) -> Result<Dataset> {
        if fill.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: fill.len(),
                context: "imputation values vs features",
            });
        }
        let mut d = self.clone();
        for (col, &v) in d.columns.iter_mut().zip(fill) {
            for x in col.iter_mut().filter(|x| x.is_nan()) {
                *x = v;
            }
        }
        d.validate(false)?;
        Ok(d)
    }
}

/// Per-feature summary statistics. `std` uses the N-1 divisor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl FeatureStats {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Statistics of a single column of at least two values.
    pub fn of_column(col: &[f64]) -> (f64, f64, f64, f64) {
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let ss = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        let std = (ss / (n - 1.0)).sqrt();
        let min = col.iter().copied().fold(f64::INFINITY, f64::min);
        let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // Rounding can push the mean a hair outside [min, max] for constant columns.
        (mean.clamp(min, max), std, min, max)
    }
}

pub fn compute_stats(d: &Dataset) -> Result<FeatureStats> {
    if d.n_rows() < 2 {
        return Err(Error::InvalidDataset(format!(
            "statistics need at least 2 rows, got {}",
            d.n_rows()
        )));
    }
    if d.has_missing() {
        return Err(Error::InvalidDataset("statistics requested on data with missing values".into()));
    }
    let mut stats = FeatureStats {
        mean: Vec::with_capacity(d.n_features()),
        std: Vec::with_capacity(d.n_features()),
        min: Vec::with_capacity(d.n_features()),
        max: Vec::with_capacity(d.n_features()),
    };
    for col in d.columns() {
        let (mean, std, min, max) = FeatureStats::of_column(col);
        stats.mean.push(mean);
        stats.std.push(std);
        stats.min.push(min);
        stats.max.push(max);
    }
    Ok(stats)
}

#[inline]
fn min_max_scale(x: f64, min: f64, max: f64) -> f64 {
    let range = max - min;
    if range > 0.0 {
        (x - min) / range
    } else {
        0.0
    }
}

/// Min-max scales every feature with the given statistics.
///
/// Values outside the statistics' range are extrapolated, not clipped.
/// Constant features map to 0.
pub fn normalize(d: &Dataset, stats: &FeatureStats) -> Result<Dataset> {
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
            col.iter()
                .map(|&x| min_max_scale(x, stats.min[j], stats.max[j]))
                .collect()
        })
        .collect();
    d.with_columns(columns)
}

/// Row-major counterpart of [`normalize`].
pub fn normalize_matrix(m: &Matrix, stats: &FeatureStats) -> Result<Matrix> {
    if stats.n_features() != m.cols() {
        return Err(Error::DimensionMismatch {
            expected: m.cols(),
            actual: stats.n_features(),
            context: "stats vs matrix columns",
        });
    }
    let mut out = m.clone();
    let cols = m.cols();
    for (k, v) in out.as_mut_slice().iter_mut().enumerate() {
        let j = k % cols;
        *v = min_max_scale(*v, stats.min[j], stats.max[j]);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    #[serde(default = "default_true")]
    pub stratified: bool,
    #[serde(default)]
    pub seed: u64,
}

fn default_true() -> bool {
    true
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            stratified: true,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie strictly between 0 and 1, got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

/// `round(fraction * m)` with halves rounded up.
fn train_count(fraction: f64, m: usize) -> usize {
    // The epsilon keeps products such as 0.7 * 5 = 3.4999999999999996 on the half.
    let k = (fraction * m as f64 + 0.5 + 1e-9).floor() as usize;
    k.min(m)
}

/// Splits `d` into train and test partitions.
///
/// With `stratified` set, each class contributes `round(train_fraction * m_c)`
/// instances to train, chosen by a seeded shuffle within the class. Without
/// it, the whole table is shuffled and cut once. Both partitions keep rows in
/// their original relative order.
pub fn stratified_split(d: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    spec.validate()?;
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    if spec.stratified {
        for (class, &count) in d.class_counts().iter().enumerate() {
            if count < 2 {
                return Err(Error::ClassTooSmall {
                    class,
                    count,
                    required: 2,
                });
            }
        }
        for class in 0..d.n_classes() {
            let mut members: Vec<usize> = (0..d.n_rows()).filter(|&i| d.labels[i] == class).collect();
            members.shuffle(&mut seed::rng(spec.seed, &[class as u64]));
            let k = train_count(spec.train_fraction, members.len());
            train_idx.extend_from_slice(&members[..k]);
            test_idx.extend_from_slice(&members[k..]);
        }
    } else {
        let mut all: Vec<usize> = (0..d.n_rows()).collect();
        all.shuffle(&mut seed::rng(spec.seed, &[u64::MAX]));
        let k = train_count(spec.train_fraction, all.len());
        train_idx.extend_from_slice(&all[..k]);
        test_idx.extend_from_slice(&all[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((d.select_rows(&train_idx), d.select_rows(&test_idx)))
}

/// How the loader treats empty / `NA` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Replace with the column mean over the whole file.
    #[default]
    MeanImpute,
    /// Keep cells missing so the caller can impute with training-partition means.
    TrainMeanImpute,
    /// Fail on the first missing cell.
    Reject,
}

/// Target column selector: header name, or zero-based index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl TargetColumn {
    /// A string that parses as an integer is an index, anything else a name.
    pub fn parse(s: &str) -> TargetColumn {
        s.parse::<usize>()
            .map(TargetColumn::Index)
            .unwrap_or_else(|_| TargetColumn::Name(s.to_string()))
    }
}

impl std::fmt::Display for TargetColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetColumn::Index(i) => write!(f, "#{i}"),
            TargetColumn::Name(n) => f.write_str(n),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na")
}

/// Reads a CSV file with a header row.
///
/// Labels are remapped to `0..C` in order of first appearance; the original
/// values are kept in [`Dataset::class_names`].
pub fn load_csv(path: &Path, target: &TargetColumn, policy: MissingPolicy) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file, target, policy)
}

/// [`load_csv`] over any reader.
pub fn read_csv<R: std::io::Read>(reader: R, target: &TargetColumn, policy: MissingPolicy) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let target_idx = match target {
        TargetColumn::Index(i) if *i < headers.len() => *i,
        TargetColumn::Name(name) => headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::TargetNotFound(name.clone()))?,
        other => return Err(Error::TargetNotFound(other.to_string())),
    };

    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_names.len()];
    let mut labels = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let mut k = 0;
        for (j, cell) in record.iter().enumerate() {
            if j == target_idx {
                if is_missing(cell) {
                    return Err(Error::InvalidDataset(format!("row {row}: missing target value")));
                }
                let next = class_index.len();
                let id = *class_index.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                labels.push(id);
                continue;
            }
            let value = if is_missing(cell) {
                if policy == MissingPolicy::Reject {
                    return Err(Error::MissingRejected {
                        row,
                        column: feature_names[k].clone(),
                    });
                }
                f64::NAN
            } else {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => v,
                    _ => {
                        return Err(Error::NonNumeric {
                            row,
                            column: feature_names[k].clone(),
                            value: cell.to_string(),
                        })
                    }
                }
            };
            columns[k].push(value);
            k += 1;
        }
    }

    if class_names.len() < 2 {
        return Err(Error::SingleClass);
    }
    let n_classes = class_names.len();
    let row_ids = (0..labels.len()).collect();
    let d = Dataset {
        columns,
        labels,
        feature_names,
        n_classes,
        class_names,
        row_ids,
    };
    d.validate(true)?;
    // An all-missing column cannot be imputed under either imputation mode.
    let means = d.observed_means()?;
    match policy {
        MissingPolicy::MeanImpute => d.impute(&means),
        MissingPolicy::TrainMeanImpute | MissingPolicy::Reject => Ok(d),
    }
}

/// Writes features plus a trailing `target` column holding class names.
pub fn write_csv(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = d.feature_names().iter().map(String::as_str).collect();
    header.push("target");
    w.write_record(&header)?;
    for i in 0..d.n_rows() {
        let mut rec: Vec<String> = (0..d.n_features()).map(|j| d.value(i, j).to_string()).collect();
        rec.push(d.class_names()[d.labels()[i]].clone());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

/// Generates a classification problem with known informative columns.
///
/// Informative columns are standard normal and feed a linear score with
/// random weights of magnitude in `[0.5, 1.5]`; Gaussian noise with a quarter
/// of the score's spread is added and the result is cut at quantiles into
/// `n_classes` equally sized classes. Noise columns are independent standard
/// normals. Column positions are shuffled; the informative positions are
/// returned in ascending order.
pub fn synthesize(
    n_instances: usize,
    n_informative: usize,
    n_noise: usize,
    n_classes: usize,
    seed: u64,
) -> Result<(Dataset, Vec<usize>)> {
    if n_instances == 0 || n_informative == 0 || n_classes < 2 {
        return Err(Error::invalid(
            "synthesize needs positive instance and informative counts and at least 2 classes",
        ));
    }
    if n_instances < 10 * n_classes {
        return Err(Error::invalid(format!(
            "synthesize needs at least {} instances for {n_classes} classes",
            10 * n_classes
        )));
    }
    let p = n_informative + n_noise;
    let mut rng = seed::rng(seed, &[seed::tag::SYNTH]);

    let mut columns: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n_instances).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    let weights: Vec<f64> = (0..n_informative)
        .map(|_| {
            let magnitude = rng.random_range(0.5..1.5);
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();

    let clean: Vec<f64> = (0..n_instances)
        .map(|i| (0..n_informative).map(|j| weights[j] * columns[j][i]).sum())
        .collect();
    let (_, spread, _, _) = FeatureStats::of_column(&clean);
    let score: Vec<f64> = clean
        .iter()
        .map(|s| s + 0.25 * spread * rng.sample::<f64, _>(StandardNormal))
        .collect();

    let mut order: Vec<usize> = (0..n_instances).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n_instances];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * n_classes / n_instances;
    }

    // Column j < n_informative is informative; scatter them across positions.
    let mut position: Vec<usize> = (0..p).collect();
    position.shuffle(&mut rng);
    let mut placed = vec![Vec::new(); p];
    for (j, col) in columns.drain(..).enumerate() {
        placed[position[j]] = col;
    }
    let mut informative: Vec<usize> = position[..n_informative].to_vec();
    informative.sort_unstable();

    let d = Dataset::from_columns(placed, labels, n_classes)?;
    Ok((d, informative))
}
