#![allow(dead_code)]

use nboruta::dataset::Dataset;
use nboruta::hygiene;
use nboruta::seed;
use rand::Rng;
use rand_distr::StandardNormal;

/// Column 0 equals the (balanced, shuffled) binary label; the other
/// `n_noise` columns are independent standard normals.
pub fn label_copy(n_rows: usize, n_noise: usize, s: u64) -> Dataset {
    let mut rng = seed::rng(s, &[0xdead]);
    let mut labels: Vec<usize> = (0..n_rows).map(|i| i % 2).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    let mut cols = vec![labels.iter().map(|&y| y as f64).collect::<Vec<f64>>()];
    for _ in 0..n_noise {
        cols.push((0..n_rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
    }
    Dataset::from_columns(cols, labels, 2).unwrap()
}

/// Only noise columns, labels independent of them.
pub fn pure_noise(n_rows: usize, n_features: usize, s: u64) -> Dataset {
    let mut rng = seed::rng(s, &[0xbeef]);
    let labels: Vec<usize> = (0..n_rows).map(|_| rng.random_range(0..2)).collect();
    let cols = (0..n_features)
        .map(|_| (0..n_rows).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    Dataset::from_columns(cols, labels, 2).unwrap()
}

pub fn assert_no_hygiene_violations() {
    assert_eq!(hygiene::violations(), 0, "a selection run read sealed test rows");
}
