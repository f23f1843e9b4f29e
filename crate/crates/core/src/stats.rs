//! Statistical tests and uncertainty measures used by the evaluation
//! protocol.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    pub method_notes: String,
}

impl TestResult {
    fn new(test_name: &str, statistic: f64, p_value: f64, method_notes: impl Into<String>) -> Self {
        TestResult {
            test_name: test_name.to_string(),
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method_notes: method_notes.into(),
        }
    }
}

/// Normalized prediction entropy per instance plus prediction correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyRecord {
    pub entropy: Vec<f64>,
    pub correct: Vec<bool>,
}

impl EntropyRecord {
    /// Counts of entropies per bin over `[0, 1]`, split into (correct, incorrect).
    pub fn histogram(&self, bins: usize) -> (Vec<usize>, Vec<usize>) {
        let mut right = vec![0; bins];
        let mut wrong = vec![0; bins];
        for (&h, &ok) in self.entropy.iter().zip(&self.correct) {
            let b = ((h * bins as f64) as usize).min(bins - 1);
            if ok {
                right[b] += 1;
            } else {
                wrong[b] += 1;
            }
        }
        (right, wrong)
    }
}

/// Shannon entropy in bits with `0 log 0 = 0`, divided by `log2(C)`.
pub fn normalized_entropy(p: &[f64]) -> f64 {
    let h: f64 = p
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|&q| -q * q.log2())
        .sum();
    (h / (p.len() as f64).log2()).clamp(0.0, 1.0)
}

pub fn prediction_entropy(probs: &[Vec<f64>], y_true: &[usize], y_pred: &[usize]) -> Result<EntropyRecord> {
    if probs.len() != y_true.len() || y_true.len() != y_pred.len() {
        return Err(Error::DimensionMismatch {
            expected: probs.len(),
            actual: y_true.len().min(y_pred.len()),
            context: "probability rows vs labels",
        });
    }
    let mut entropy = Vec::with_capacity(probs.len());
    for (i, p) in probs.iter().enumerate() {
        if p.len() < 2 {
            return Err(Error::invalid(format!("row {i}: entropy needs at least 2 classes")));
        }
        let total: f64 = p.iter().sum();
        if p.iter().any(|q| !(0.0..=1.0).contains(q)) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::invalid(format!("row {i} is not a probability vector")));
        }
        entropy.push(normalized_entropy(p));
    }
    Ok(EntropyRecord {
        entropy,
        correct: y_true.iter().zip(y_pred).map(|(a, b)| a == b).collect(),
    })
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Evaluates `c[0] + c[1] x + c[2] x^2 + ...`.
fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Shapiro-Wilk W test using Royston's AS R94 approximation.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
    const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
    const C3: [f64; 4] = [0.5440, -0.39978, 0.025054, -6.714e-4];
    const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
    const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
    const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
    const G: [f64; 2] = [-2.273, 0.459];

    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::invalid(format!("Shapiro-Wilk needs 3..=5000 observations, got {n}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Shapiro-Wilk sample contains non-finite values"));
    }
    let mut xs = x.to_vec();
    xs.sort_by(f64::total_cmp);
    if xs[n - 1] - xs[0] <= 0.0 {
        return Err(Error::invalid("Shapiro-Wilk sample has zero range"));
    }

    let half = n / 2;
    let an = n as f64;
    // Coefficients for the upper half, largest first: a[0] pairs x(n) with x(1).
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let norm = std_normal();
        let m: Vec<f64> = (1..=half)
            .map(|i| -norm.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) + m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }

    // W is the squared correlation between the coefficient vector and the
    // ordered sample, which makes it exactly affine invariant.
    let mean = xs.iter().sum::<f64>() / an;
    let ss: f64 = xs.iter().map(|v| (v - mean).powi(2)).sum();
    let b: f64 = (0..half).map(|i| a[i] * (xs[n - 1 - i] - xs[i])).sum();
    let a_norm2 = 2.0 * a.iter().map(|v| v * v).sum::<f64>();
    let w = (b * b / (a_norm2 * ss)).min(1.0);

    let p = if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        (1.0 - pi6 * w.sqrt().acos()).max(0.0)
    } else if w >= 1.0 {
        1.0
    } else {
        let y = (1.0 - w).ln();
        let norm = std_normal();
        if n <= 11 {
            let gamma = poly(&G, an);
            if y >= gamma {
                1e-19
            } else {
                let y = -(gamma - y).ln();
                let m = poly(&C3, an);
                let s = poly(&C4, an).exp();
                norm.sf((y - m) / s)
            }
        } else {
            let xx = an.ln();
            let m = poly(&C5, xx);
            let s = poly(&C6, xx).exp();
            norm.sf((y - m) / s)
        }
    };
    Ok(TestResult::new("shapiro_wilk", w, p, "Royston AS R94"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TTestVariant {
    #[default]
    StudentPooled,
    Welch,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided two-sample t-test of equal means.
pub fn t_test_two_sample(x: &[f64], y: &[f64], variant: TTestVariant) -> Result<TestResult> {
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid("t-test needs at least 2 observations per sample"));
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (se, df, notes) = match variant {
        TTestVariant::StudentPooled => {
            let pooled = ((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0);
            ((pooled * (1.0 / nx + 1.0 / ny)).sqrt(), nx + ny - 2.0, "pooled variance")
        }
        TTestVariant::Welch => {
            let (qx, qy) = (vx / nx, vy / ny);
            let df = (qx + qy).powi(2) / (qx * qx / (nx - 1.0) + qy * qy / (ny - 1.0));
            ((qx + qy).sqrt(), df, "Welch-Satterthwaite")
        }
    };
    if !(se > 0.0) {
        return Err(Error::invalid("t-test needs positive variance in at least one sample"));
    }
    let t = (mx - my) / se;
    let p = if t == 0.0 {
        1.0
    } else {
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
        2.0 * dist.sf(t.abs())
    };
    Ok(TestResult::new("t_test_two_sample", t, p, format!("{notes}, df = {df}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MwuMethod {
    /// Exact when `n * m <= 400` and there are no ties, asymptotic otherwise.
    #[default]
    Auto,
    Exact,
    Asymptotic,
}

/// Average ranks (1-based) of the pooled sample.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Number of orderings of `n` x-values and `m` y-values for each value of
/// `U_x` in `0..=n*m`.
pub fn mwu_null_counts(n: usize, m: usize) -> Vec<u128> {
    // f[i][j][u]: arrangements of i x's and j y's with U = u. The largest
    // element is either an x (beating all j y's) or a y.
    let size = n * m + 1;
    let mut prev: Vec<Vec<u128>> = vec![vec![0; size]; m + 1];
    for cell in prev.iter_mut() {
        cell[0] = 1;
    }
    for _i in 1..=n {
        let mut cur: Vec<Vec<u128>> = vec![vec![0; size]; m + 1];
        cur[0][0] = 1;
        for j in 1..=m {
            for u in 0..size {
                let from_x = if u >= j { prev[j][u - j] } else { 0 };
                cur[j][u] = from_x + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<TestResult> {
    mann_whitney_u_with(x, y, MwuMethod::Auto)
}

/// Two-sided Mann-Whitney U test. The reported statistic is `min(U_x, U_y)`.
pub fn mann_whitney_u_with(x: &[f64], y: &[f64], method: MwuMethod) -> Result<TestResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::invalid("Mann-Whitney U needs non-empty samples"));
    }
    let (n, m) = (x.len(), y.len());
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..n].iter().sum();
    let u_x = rank_sum_x - (n * (n + 1)) as f64 / 2.0;
    let nm = (n * m) as f64;
    let u = u_x.min(nm - u_x);

    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let has_ties = tie_term > 0.0;

    let exact = match method {
        MwuMethod::Auto => n * m <= 400 && !has_ties,
        MwuMethod::Exact => {
            if has_ties {
                return Err(Error::invalid("exact Mann-Whitney distribution requires tie-free samples"));
            }
            true
        }
        MwuMethod::Asymptotic => false,
    };

    if exact {
        let counts = mwu_null_counts(n, m);
        let total: u128 = counts.iter().sum();
        // Without ties U is an integer.
        let below: u128 = counts[..=(u as usize)].iter().sum();
        let p = (2.0 * below as f64 / total as f64).min(1.0);
        return Ok(TestResult::new("mann_whitney_u", u, p, "exact null distribution"));
    }

    let big_n = (n + m) as f64;
    let var = nm / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let notes = if has_ties {
        "normal approximation, tie and continuity corrected"
    } else {
        "normal approximation, continuity corrected"
    };
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u_x - nm / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        2.0 * std_normal().sf(z)
    };
    Ok(TestResult::new("mann_whitney_u", u, p, notes))
}

fn ln_choose_table(trials: usize) -> Vec<f64> {
    // ln C(trials, k) for k in 0..=trials.
    let mut out = Vec::with_capacity(trials + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=trials {
        acc += ((trials - k + 1) as f64).ln() - (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `(P(X <= hits), P(X >= hits))` for `X ~ Binomial(trials, 1/2)`.
pub fn binomial_tails(hits: usize, trials: usize) -> Result<(f64, f64)> {
    if trials == 0 || hits > trials {
        return Err(Error::invalid(format!("invalid binomial counts: {hits} of {trials}")));
    }
    let ln_choose = ln_choose_table(trials);
    let ln_half = trials as f64 * std::f64::consts::LN_2;
    let pmf = |k: usize| (ln_choose[k] - ln_half).exp();
    let lower: f64 = (0..=hits).map(pmf).sum();
    let upper: f64 = (hits..=trials).map(pmf).sum();
    Ok((lower.min(1.0), upper.min(1.0)))
}
