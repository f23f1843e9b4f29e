//! Statistical routines against brute-force enumeration and reference values
//! produced by an established statistics package.

use nboruta::stats::{
    binomial_tails, mann_whitney_u, mann_whitney_u_with, mwu_null_counts, prediction_entropy, shapiro_wilk,
    t_test_two_sample, MwuMethod, TTestVariant,
};

#[test]
fn shapiro_wilk_reference_values() {
    let cases: [(Vec<f64>, f64, f64); 4] = [
        (vec![2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8], 0.9401366782, 0.6399513746),
        ((1..=50).map(|i| (i as f64).powi(3)).collect(), 0.8279356825, 0.0000041155),
        (
            vec![0.1, 0.2, 0.15, 0.12, 0.18, 0.9, 0.95, 0.88, 0.92, 0.85, 0.11, 0.91],
            0.7258402822,
            0.0015122650,
        ),
        (vec![1.0, 2.0, 4.0], 0.9642857143, 0.6368868450),
    ];
    for (x, w, p) in cases {
        let r = shapiro_wilk(&x).unwrap();
        assert!((r.statistic - w).abs() < 1e-3, "W {} vs {w}", r.statistic);
        assert!((r.p_value - p).abs() < 1e-3, "p {} vs {p}", r.p_value);
    }
    let grid: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
    let r = shapiro_wilk(&grid).unwrap();
    assert!((r.statistic - 0.9585657853).abs() < 1e-3);
    assert!((r.p_value - 0.3866496591).abs() < 1e-3);
}

#[test]
fn t_test_reference_values() {
    let r = t_test_two_sample(&[1.0, 2.0, 3.0], &[11.0, 12.0, 13.0], TTestVariant::StudentPooled).unwrap();
    assert!((r.statistic + 12.24744871391589).abs() < 1e-9);
    assert!((r.p_value - 0.00025521674944192687).abs() < 1e-7);

    let a = [0.91, 0.88, 0.93, 0.90, 0.87, 0.92];
    let b = [0.85, 0.86, 0.89, 0.84, 0.83, 0.88, 0.86];
    let s = t_test_two_sample(&a, &b, TTestVariant::StudentPooled).unwrap();
    assert!((s.statistic - 3.5061457701229237).abs() < 1e-9);
    assert!((s.p_value - 0.004916825534258936).abs() < 1e-7);
    let w = t_test_two_sample(&a, &b, TTestVariant::Welch).unwrap();
    assert!((w.statistic - 3.4796112688070555).abs() < 1e-9);
    assert!((w.p_value - 0.005661386922206219).abs() < 1e-6);

    let swapped = t_test_two_sample(&b, &a, TTestVariant::StudentPooled).unwrap();
    assert_eq!(swapped.statistic, -s.statistic);
    assert!((swapped.p_value - s.p_value).abs() < 1e-15);
}

#[test]
fn mann_whitney_reference_values() {
    let x = [1.2, 3.4, 2.2, 5.1, 0.3, 4.4, 2.9, 3.8, 1.7, 6.0, 2.5, 3.1, 0.9, 4.0, 5.5];
    let y = [2.4, 4.9, 6.1, 3.3, 5.8, 7.2, 4.1, 6.6, 5.0, 3.9, 7.7, 6.9, 4.6, 5.3, 8.1];
    let exact = mann_whitney_u_with(&x, &y, MwuMethod::Exact).unwrap();
    let approx = mann_whitney_u_with(&x, &y, MwuMethod::Asymptotic).unwrap();
    assert_eq!(exact.statistic, 38.0);
    assert!((exact.p_value - 0.0014081194696769263).abs() < 1e-12);
    assert!((approx.p_value - 0.0021450570245935504).abs() < 1e-9);
    assert!((exact.p_value - approx.p_value).abs() < 0.02);
    assert_eq!(mann_whitney_u(&x, &y).unwrap().p_value, exact.p_value);

    let xt = [1.0, 2.0, 2.0, 3.0, 4.0, 4.0, 4.0, 5.0];
    let yt = [3.0, 4.0, 5.0, 5.0, 6.0, 6.0, 7.0];
    let tied = mann_whitney_u(&xt, &yt).unwrap();
    assert_eq!(tied.statistic, 8.0);
    assert!((tied.p_value - 0.021920655864769517).abs() < 1e-9);
    assert!(tied.method_notes.contains("tie"));
}

#[test]
fn mann_whitney_null_distribution_sums_to_one() {
    for n in 1..=8 {
        for m in 1..=8 {
            let counts = mwu_null_counts(n, m);
            assert_eq!(counts.len(), n * m + 1);
            let total: u128 = counts.iter().sum();
            let mut choose: u128 = 1;
            for k in 0..n {
                choose = choose * (n + m - k) as u128 / (k + 1) as u128;
            }
            assert_eq!(total, choose);
            // Symmetric about n*m/2.
            assert!(counts.iter().eq(counts.iter().rev()));
        }
    }
}

#[test]
fn mann_whitney_single_observations() {
    let r = mann_whitney_u(&[1.0], &[2.0]).unwrap();
    assert_eq!(r.p_value, 1.0);
    let r = mann_whitney_u(&[3.0], &[3.0]).unwrap();
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn binomial_tails_are_complementary() {
    for trials in 1..=60 {
        for hits in 0..=trials {
            let (lo, hi) = binomial_tails(hits, trials).unwrap();
            let (lo_next, _) = if hits < trials { binomial_tails(hits + 1, trials).unwrap() } else { (1.0, 0.0) };
            assert!(lo <= 1.0 && hi <= 1.0);
            if hits > 0 {
                // P(X >= h) = 1 - P(X <= h - 1)
                let (lo_prev, _) = binomial_tails(hits - 1, trials).unwrap();
                assert!((hi - (1.0 - lo_prev)).abs() < 1e-9);
            }
            assert!(lo <= lo_next + 1e-15);
        }
    }
}

#[test]
fn entropy_over_model_outputs_is_bounded() {
    let probs = vec![vec![0.2, 0.3, 0.5], vec![1.0, 0.0, 0.0], vec![1.0 / 3.0; 3]];
    let r = prediction_entropy(&probs, &[2, 0, 1], &[2, 0, 0]).unwrap();
    assert_eq!(r.correct, vec![true, true, false]);
    assert_eq!(r.entropy[1], 0.0);
    assert!((r.entropy[2] - 1.0).abs() < 1e-12);
    assert!(r.entropy.iter().all(|h| (0.0..=1.0).contains(h)));
    assert!(prediction_entropy(&[vec![0.7, 0.7]], &[0], &[0]).is_err());
}
