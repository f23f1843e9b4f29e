//! Random forest classifier (CART, Gini impurity) with out-of-bag permutation
//! importance.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class_counts: Vec<usize>,
    },
}

/// A fitted CART tree stored as a flat node arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_classes: usize,
}

fn majority(counts: &[usize]) -> usize {
    // max_by_key keeps the last maximum, so scan manually for the first.
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Leaf class counts reached by a row whose feature values come from `value`.
    pub fn leaf_with<F: Fn(usize) -> f64>(&self, value: F) -> &[usize] {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => id = if value(*feature) <= *threshold { *left } else { *right },
                TreeNode::Leaf { class_counts } => return class_counts,
            }
        }
    }

    pub fn predict_with<F: Fn(usize) -> f64>(&self, value: F) -> usize {
        majority(self.leaf_with(value))
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        self.predict_with(|j| row[j])
    }

    /// Features referenced by at least one split.
    pub fn used_features(&self, n_features: usize) -> Vec<bool> {
        let mut used = vec![false; n_features];
        for node in &self.nodes {
            if let TreeNode::Split { feature, .. } = node {
                used[*feature] = true;
            }
        }
        used
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], id: usize) -> usize {
            match &nodes[id] {
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Gini impurity of a class-count vector.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct SplitCandidate {
    feature: usize,
    threshold: f64,
    /// Sum over children of `sum_c count_c^2 / n_child`; larger means purer.
    score: f64,
}

struct TreeBuilder<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    mtry: usize,
    max_depth: Option<usize>,
}

impl TreeBuilder<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in idx {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn best_split_on(&self, feature: usize, idx: &[usize], total: &[usize]) -> Option<SplitCandidate> {
        let col = &self.columns[feature];
        let mut pairs: Vec<(f64, usize)> = idx.iter().map(|&i| (col[i], self.labels[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = pairs.len();
        let mut left = vec![0usize; self.n_classes];
        let mut best: Option<SplitCandidate> = None;
        for k in 0..n - 1 {
            left[pairs[k].1] += 1;
            let (lo, hi) = (pairs[k].0, pairs[k + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = (k + 1) as f64;
            let n_right = (n - k - 1) as f64;
            let mut sq_left = 0.0;
            let mut sq_right = 0.0;
            for c in 0..self.n_classes {
                let l = left[c] as f64;
                let r = (total[c] - left[c]) as f64;
                sq_left += l * l;
                sq_right += r * r;
            }
            let score = sq_left / n_left + sq_right / n_right;
            if best.as_ref().is_none_or(|b| score > b.score) {
                let mut threshold = 0.5 * (lo + hi);
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(SplitCandidate {
                    feature,
                    threshold,
                    score,
                });
            }
        }
        best
    }

    fn choose_split(&self, idx: &[usize], total: &[usize], rng: &mut ChaCha8Rng) -> Option<SplitCandidate> {
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        order.shuffle(rng);
        let mtry = self.mtry.min(order.len());
        // Scan the drawn features in ascending index order so equal scores
        // resolve to the lowest feature index, then the lowest threshold.
        let mut drawn = order[..mtry].to_vec();
        drawn.sort_unstable();
        let mut best: Option<SplitCandidate> = None;
        for f in drawn {
            if let Some(c) = self.best_split_on(f, idx, total) {
                if best.as_ref().is_none_or(|b| c.score > b.score) {
                    best = Some(c);
                }
            }
        }
        if best.is_some() {
            return best;
        }
        // None of the drawn features varies here; keep drawing until one does.
        order[mtry..].iter().find_map(|&f| self.best_split_on(f, idx, total))
    }

    fn build(&self, sample: Vec<usize>, rng: &mut ChaCha8Rng) -> DecisionTree {
        let mut nodes = vec![TreeNode::Leaf {
            class_counts: Vec::new(),
        }];
        let mut stack = vec![(0usize, sample, 0usize)];
        while let Some((id, idx, depth)) = stack.pop() {
            let counts = self.counts(&idx);
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_capped = self.max_depth.is_some_and(|d| depth >= d);
            let split = if pure || depth_capped || idx.len() < 2 {
                None
            } else {
                self.choose_split(&idx, &counts, rng)
            };
            match split {
                None => nodes[id] = TreeNode::Leaf { class_counts: counts },
                Some(s) => {
                    let col = &self.columns[s.feature];
                    let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| col[i] <= s.threshold);
                    let left = nodes.len();
                    let right = left + 1;
                    nodes.push(TreeNode::Leaf {
                        class_counts: Vec::new(),
                    });
                    nodes.push(TreeNode::Leaf {
                        class_counts: Vec::new(),
                    });
                    nodes[id] = TreeNode::Split {
                        feature: s.feature,
                        threshold: s.threshold,
                        left,
                        right,
                    };
                    stack.push((right, r, depth + 1));
                    stack.push((left, l, depth + 1));
                }
            }
        }
        DecisionTree {
            nodes,
            n_classes: self.n_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    /// Rows of the training set never drawn into each tree's bootstrap sample.
    pub oob_indices: Vec<Vec<usize>>,
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
    pub n_features: usize,
    pub n_classes: usize,
}

/// Fits `n_estimators` trees, each on a bootstrap sample of the rows, with
/// `floor(sqrt(p))` candidate features per node.
pub fn fit_forest(train: &Dataset, n_estimators: usize, max_depth: Option<usize>, seed: u64) -> Result<ForestModel> {
    if n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if train.n_rows() < 2 {
        return Err(Error::InvalidDataset("forest needs at least 2 rows".into()));
    }
    if train.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    if train.n_features() == 0 {
        return Err(Error::InvalidDataset("forest needs at least one feature".into()));
    }
    let n = train.n_rows();
    let p = train.n_features();
    let builder = TreeBuilder {
        columns: train.columns(),
        labels: train.labels(),
        n_classes: train.n_classes(),
        mtry: ((p as f64).sqrt().floor() as usize).max(1),
        max_depth,
    };
    let (trees, oob_indices): (Vec<_>, Vec<_>) = (0..n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed, &[t as u64]);
            let mut in_bag = vec![false; n];
            let sample: Vec<usize> = (0..n)
                .map(|_| {
                    let i = rng.random_range(0..n);
                    in_bag[i] = true;
                    i
                })
                .collect();
            let oob: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
            (builder.build(sample, &mut rng), oob)
        })
        .unzip();
    Ok(ForestModel {
        trees,
        oob_indices,
        n_estimators,
        max_depth,
        seed,
        n_features: p,
        n_classes: train.n_classes(),
    })
}

impl ForestModel {
    fn check_dims(&self, cols: usize) -> Result<()> {
        if cols != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: cols,
                context: "forest input columns",
            });
        }
        Ok(())
    }

    /// Per-row vote counts.
    pub fn votes(&self, rows: &Matrix) -> Result<Vec<Vec<usize>>> {
        self.check_dims(rows.cols())?;
        Ok((0..rows.rows())
            .map(|i| {
                let row = rows.row(i);
                let mut v = vec![0; self.n_classes];
                for tree in &self.trees {
                    v[tree.predict_row(row)] += 1;
                }
                v
            })
            .collect())
    }

    /// Vote fractions per class.
    pub fn predict_proba(&self, rows: &Matrix) -> Result<Vec<Vec<f64>>> {
        let k = self.trees.len() as f64;
        Ok(self
            .votes(rows)?
            .into_iter()
            .map(|v| v.into_iter().map(|c| c as f64 / k).collect())
            .collect())
    }
}

/// Majority vote over trees; ties go to the smallest class index.
pub fn predict_forest(m: &ForestModel, rows: &Matrix) -> Result<Vec<usize>> {
    Ok(m.votes(rows)?.iter().map(|v| majority(v)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    #[default]
    OobPermutation,
    Zscore,
    Perturbation,
}

/// Importance of every column of an augmented dataset for one iteration.
///
/// Columns `0..n_original` are originals, the rest shadows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub scores: Vec<f64>,
    /// Maximum score among shadow columns; `-inf` when there are none.
    pub max_shadow: f64,
    pub method: ImportanceMethod,
    pub n_original: usize,
}

impl ImportanceReport {
    pub fn new(scores: Vec<f64>, n_original: usize, method: ImportanceMethod) -> Self {
        let max_shadow = scores[n_original.min(scores.len())..]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        ImportanceReport {
            scores,
            max_shadow,
            method,
            n_original,
        }
    }
}

/// Shuffle of `0..len` applied to the out-of-bag rows of `tree` when
/// permuting `feature`.
pub fn oob_permutation(seed: u64, tree: usize, feature: usize, len: usize) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..len).collect();
    perm.shuffle(&mut seed::rng(seed, &[tree as u64, feature as u64]));
    perm
}

/// Per-tree importances `(V_orig - V_perm) / |OOB_t|` for every tree with a
/// non-empty out-of-bag set, as `(tree index, per-feature values)`.
pub fn per_tree_importance(m: &ForestModel, d: &Dataset, seed: u64) -> Result<Vec<(usize, Vec<f64>)>> {
    m.check_dims(d.n_features())?;
    if m.oob_indices.iter().all(Vec::is_empty) {
        return Err(Error::NoOutOfBag);
    }
    if let Some(&max) = m.oob_indices.iter().flatten().max() {
        if max >= d.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: max + 1,
                actual: d.n_rows(),
                context: "out-of-bag row index vs dataset rows",
            });
        }
    }
    let labels = d.labels();
    Ok(m.trees
        .par_iter()
        .zip(&m.oob_indices)
        .enumerate()
        .filter(|(_, (_, oob))| !oob.is_empty())
        .map(|(t, (tree, oob))| {
            let correct_orig = oob
                .iter()
                .filter(|&&i| tree.predict_with(|j| d.value(i, j)) == labels[i])
                .count();
            let used = tree.used_features(m.n_features);
            let scores = (0..m.n_features)
                .map(|f| {
                    if !used[f] {
                        return 0.0;
                    }
                    let perm = oob_permutation(seed, t, f, oob.len());
                    let correct_perm = oob
                        .iter()
                        .zip(&perm)
                        .filter(|&(&i, &k)| {
                            let donor = oob[k];
                            let pred = tree.predict_with(|j| if j == f { d.value(donor, j) } else { d.value(i, j) });
                            pred == labels[i]
                        })
                        .count();
                    (correct_orig as f64 - correct_perm as f64) / oob.len() as f64
                })
                .collect();
            (t, scores)
        })
        .collect())
}

/// Out-of-bag permutation importance averaged over trees with a non-empty
/// out-of-bag set.
pub fn oob_importance(m: &ForestModel, d: &Dataset, n_original: usize, seed: u64) -> Result<ImportanceReport> {
    let per_tree = per_tree_importance(m, d, seed)?;
    let k = per_tree.len() as f64;
    let scores = (0..m.n_features)
        .map(|f| per_tree.iter().map(|(_, s)| s[f]).sum::<f64>() / k)
        .collect();
    Ok(ImportanceReport::new(scores, n_original, ImportanceMethod::OobPermutation))
}

/// Mean over trees divided by the N-1 standard deviation over trees; zero
/// when the deviation is zero.
pub fn zscore(per_tree: &[Vec<f64>]) -> Result<Vec<f64>> {
    if per_tree.len() < 2 {
        return Err(Error::invalid(format!(
            "z-score importance needs at least 2 trees with out-of-bag rows, got {}",
            per_tree.len()
        )));
    }
    let k = per_tree.len() as f64;
    let p = per_tree[0].len();
    Ok((0..p)
        .map(|f| {
            let mean = per_tree.iter().map(|s| s[f]).sum::<f64>() / k;
            let var = per_tree.iter().map(|s| (s[f] - mean).powi(2)).sum::<f64>() / (k - 1.0);
            let sd = var.sqrt();
            if sd > 0.0 {
                mean / sd
            } else {
                0.0
            }
        })
        .collect())
}

pub fn zscore_importance(m: &ForestModel, d: &Dataset, n_original: usize, seed: u64) -> Result<ImportanceReport> {
    let per_tree: Vec<Vec<f64>> = per_tree_importance(m, d, seed)?.into_iter().map(|(_, s)| s).collect();
    Ok(ImportanceReport::new(zscore(&per_tree)?, n_original, ImportanceMethod::Zscore))
}
