//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Built with `harness = false`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use num_bigint::BigUint;
use statrs::distribution::{ContinuousCDF, Normal};

use nboruta::boruta_classic::{binomial_decision, BorutaConfig, Correction, Decision};
use nboruta::boruta_noise::NoiseBorutaConfig;
use nboruta::dataset::{synthesize, write_csv, Dataset, TargetColumn};
use nboruta::forest::{fit_forest, oob_importance, oob_permutation, ForestModel, TreeNode};
use nboruta::harness::{
    evaluate_selection, run_ablation, run_pipeline, run_selection, with_workers, write_evaluation, ExperimentConfig,
    Method,
};
use nboruta::hygiene;
use nboruta::matrix::Matrix;
use nboruta::neural::{MlpModel, MlpSpec, PerturbMode};
use nboruta::stats::{mann_whitney_u_with, prediction_entropy, shapiro_wilk, MwuMethod};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Classic Boruta at desk scale: fewer iterations and trees than the defaults.
fn desk_boruta(max_iter: usize) -> BorutaConfig {
    BorutaConfig {
        max_iter,
        n_estimators: 100,
        ..BorutaConfig::default()
    }
}

/// Noise-augmented Boruta at desk scale. The additive `1 + n*sigma` shift
/// saturates at n = 50 on min-max scaled data (every perturbed column drives
/// F1 to the same floor, so nothing beats the shadows strictly), so the
/// perturbation is Gaussian. A feature must hit in at least half of the
/// iterations, the same p = 1/2 null the classic binomial test uses; a single
/// hit lets through noise columns that correlate with the label by chance.
fn desk_noise(max_iter: usize) -> NoiseBorutaConfig {
    NoiseBorutaConfig {
        max_iter,
        min_hits: max_iter.div_ceil(2),
        perturb_mode: PerturbMode::Gaussian,
        mlp_spec: MlpSpec {
            hidden_layers: vec![5],
            epochs: 100,
            learning_rate: 0.05,
            batch_size: 32,
            seed: 0,
        },
        ..NoiseBorutaConfig::default()
    }
}

fn desk_eval_mlp() -> MlpSpec {
    MlpSpec {
        hidden_layers: vec![16],
        epochs: 60,
        learning_rate: 0.05,
        batch_size: 32,
        seed: 0,
    }
}

fn experiment(master_seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new("synthetic.csv", TargetColumn::Name("target".into()));
    cfg.master_seed = master_seed;
    cfg.eval_mlp = desk_eval_mlp();
    cfg
}

fn median(mut v: Vec<usize>) -> f64 {
    v.sort_unstable();
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2] as f64
    } else {
        (v[k / 2 - 1] + v[k / 2]) as f64 / 2.0
    }
}

fn criterion_1() -> Outcome {
    let (p_inf, p_noise) = (5, 45);
    let mut detail = Vec::new();
    let mut pass = true;
    for method in [Method::Boruta, Method::NoiseBoruta] {
        let mut recovered = 0;
        let mut reject_rate = 0.0;
        for s in 0..20 {
            let (d, informative) = synthesize(1000, p_inf, p_noise, 2, s).unwrap();
            let mut cfg = experiment(s);
            cfg.boruta = desk_boruta(30);
            cfg.noise_boruta = desk_noise(30);
            let art = run_selection(&cfg, &d, method).unwrap();
            let found = informative.iter().filter(|f| art.selected.contains(f)).count();
            recovered += (found >= 4) as usize;
            let rejected = (0..d.n_features())
                .filter(|f| !informative.contains(f) && art.result.decision[*f] == Decision::Unimportant)
                .count();
            reject_rate += rejected as f64 / p_noise as f64 / 20.0;
        }
        let ok = recovered >= 16 && reject_rate >= 0.8;
        pass &= ok;
        detail.push(format!(
            "{}: >=4/5 informative in {recovered}/20 seeds, noise rejected {:.3}",
            method.label(),
            reject_rate
        ));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_2() -> Outcome {
    let mut classic_counts = Vec::new();
    let mut noise_counts = Vec::new();
    let mut classic_f1 = Vec::new();
    let mut noise_f1 = Vec::new();
    for s in 0..10 {
        let (d, _) = synthesize(2000, 10, 90, 2, 100 + s).unwrap();
        let mut cfg = experiment(s);
        cfg.boruta = desk_boruta(30);
        cfg.noise_boruta = desk_noise(30);
        cfg.eval_runs = 30;
        let a = run_selection(&cfg, &d, Method::Boruta).unwrap();
        let b = run_selection(&cfg, &d, Method::NoiseBoruta).unwrap();
        classic_counts.push(a.selected.len());
        noise_counts.push(b.selected.len());
        // An empty selection scores zero, the worst possible F1.
        let f1 = |sel: &[usize], label: &str| {
            if sel.is_empty() {
                0.0
            } else {
                evaluate_selection(&cfg, &d, sel, label).unwrap().mean
            }
        };
        classic_f1.push(f1(&a.selected, "boruta"));
        noise_f1.push(f1(&b.selected, "noise_boruta"));
    }
    let (mc, mn) = (median(classic_counts.clone()), median(noise_counts.clone()));
    let fc = classic_f1.iter().sum::<f64>() / 10.0;
    let fn_ = noise_f1.iter().sum::<f64>() / 10.0;
    outcome(
        mn <= mc && fn_ >= fc - 0.02,
        format!(
            "median count noise {mn} vs classic {mc} (noise {noise_counts:?}, classic {classic_counts:?}); mean F1 noise {fn_:.4} vs classic {fc:.4}"
        ),
    )
}

/// Walks a tree by hand, reading feature values through `value`.
fn oracle_leaf<'a>(nodes: &'a [TreeNode], value: &dyn Fn(usize) -> f64) -> &'a [usize] {
    let mut id = 0;
    loop {
        match &nodes[id] {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                id = if value(*feature) <= *threshold { *left } else { *right };
            }
            TreeNode::Leaf { class_counts } => return class_counts,
        }
    }
}

/// Majority class, lowest index on ties.
fn oracle_vote(counts: &[usize]) -> usize {
    let mut best = 0;
    for c in 1..counts.len() {
        if counts[c] > counts[best] {
            best = c;
        }
    }
    best
}

/// Per tree with OOB rows: build a copy of the data whose column `f` is
/// permuted among the OOB rows, count correct OOB predictions before and
/// after, divide the difference by |OOB|; average over those trees.
fn oracle_importance(m: &ForestModel, d: &Dataset, seed: u64) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..d.n_rows()).map(|i| (0..d.n_features()).map(|j| d.value(i, j)).collect()).collect();
    let y = d.labels();
    let mut totals = vec![0.0; d.n_features()];
    let mut used_trees = 0.0;
    for (t, tree) in m.trees.iter().enumerate() {
        let oob = &m.oob_indices[t];
        if oob.is_empty() {
            continue;
        }
        used_trees += 1.0;
        let mut v_orig = 0usize;
        for &i in oob {
            if oracle_vote(oracle_leaf(tree.nodes(), &|j| rows[i][j])) == y[i] {
                v_orig += 1;
            }
        }
        for f in 0..d.n_features() {
            let perm = oob_permutation(seed, t, f, oob.len());
            let mut permuted = rows.clone();
            for (r, &i) in oob.iter().enumerate() {
                permuted[i][f] = rows[oob[perm[r]]][f];
            }
            let mut v_perm = 0usize;
            for &i in oob {
                if oracle_vote(oracle_leaf(tree.nodes(), &|j| permuted[i][j])) == y[i] {
                    v_perm += 1;
                }
            }
            totals[f] += (v_orig as f64 - v_perm as f64) / oob.len() as f64;
        }
    }
    totals.iter().map(|v| v / used_trees).collect()
}

fn criterion_3() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..5 {
        let (d, _) = synthesize(50, 2, 2, 2, s).unwrap();
        let m = fit_forest(&d, 3, None, s).unwrap();
        let got = oob_importance(&m, &d, 4, 1000 + s).unwrap().scores;
        let want = oracle_importance(&m, &d, 1000 + s);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max((g - w).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |difference| {worst:e} over 5 forests"))
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    let h = 1e-5;
    for s in 0..10 {
        let spec = MlpSpec {
            hidden_layers: vec![4],
            seed: s,
            ..MlpSpec::default()
        };
        let m = MlpModel::init(3, 2, &spec);
        let mut rng_state = s.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
        let mut next = || {
            rng_state ^= rng_state << 13;
            rng_state ^= rng_state >> 7;
            rng_state ^= rng_state << 17;
            (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| next()).collect()).collect();
        let x = Matrix::from_rows(&rows);
        let y = [0, 1, 1, 0, 1, 0];
        let (_, analytic) = m.loss_and_gradient(&x, &y);
        let base = m.params();
        let mut probe = m.clone();
        for k in 0..base.len() {
            let mut p = base.clone();
            p[k] = base[k] + h;
            probe.set_params(&p);
            let up = probe.loss(&x, &y);
            p[k] = base[k] - h;
            probe.set_params(&p);
            let down = probe.loss(&x, &y);
            let numeric = (up - down) / (2.0 * h);
            let scale = numeric.abs().max(analytic[k].abs());
            if scale > 1e-8 {
                worst = worst.max((numeric - analytic[k]).abs() / scale);
            }
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:e} over 10 seeds"))
}

/// Two-sided exact p for `U_min = u`: enumerate every placement of the `n`
/// x-ranks among `n + m`, count placements with `U_x <= u`, double (the null
/// distribution is symmetric) and cap at 1.
fn enumerated_mwu_p(n: usize, m: usize, u: usize) -> f64 {
    let bits = n + m;
    let (mut at_most, mut total) = (0u64, 0u64);
    for mask in 0u32..(1 << bits) {
        if mask.count_ones() as usize != n {
            continue;
        }
        total += 1;
        // Bit k set means rank k belongs to x; U_x counts y's below each x.
        let mut u_x = 0;
        let mut ys_below = 0;
        for bit in 0..bits {
            if mask >> bit & 1 == 1 {
                u_x += ys_below;
            } else {
                ys_below += 1;
            }
        }
        if u_x <= u {
            at_most += 1;
        }
    }
    (2.0 * at_most as f64 / total as f64).min(1.0)
}

fn exact_tail_decision(hits: usize, trials: usize, level_den: u64) -> Decision {
    // Tail counts of Binomial(trials, 1/2) times 2^trials; level = 1 / level_den.
    let choose = |k: usize| -> BigUint {
        let mut c = BigUint::from(1u32);
        for i in 0..k {
            c = c * BigUint::from((trials - i) as u64) / BigUint::from((i + 1) as u64);
        }
        c
    };
    let upper: BigUint = (hits..=trials).map(choose).sum();
    let lower: BigUint = (0..=hits).map(choose).sum();
    let scale = BigUint::from(1u32) << trials;
    if upper * level_den < scale {
        Decision::Important
    } else if lower * level_den < scale {
        Decision::Unimportant
    } else {
        Decision::Tentative
    }
}

fn criterion_5() -> Outcome {
    let mut notes = Vec::new();

    let mut mwu_cases = 0;
    let mut mwu_bad = 0;
    for n in 1..=6 {
        for m in 1..=6 {
            let bits = n + m;
            for mask in 0u32..(1 << bits) {
                if mask.count_ones() as usize != n {
                    continue;
                }
                let (mut x, mut y) = (Vec::new(), Vec::new());
                for bit in 0..bits {
                    let v = 0.25 + 1.5 * bit as f64;
                    if mask >> bit & 1 == 1 {
                        x.push(v);
                    } else {
                        y.push(v);
                    }
                }
                x.reverse();
                let r = mann_whitney_u_with(&x, &y, MwuMethod::Exact).unwrap();
                let want = enumerated_mwu_p(n, m, r.statistic as usize);
                mwu_cases += 1;
                if r.p_value != want {
                    mwu_bad += 1;
                }
            }
        }
    }
    notes.push(format!("Mann-Whitney exact: {}/{mwu_cases} match", mwu_cases - mwu_bad));

    let normal = Normal::new(0.0, 1.0).unwrap();
    let reference: [(&str, Vec<f64>, f64, f64); 5] = [
        ("small", vec![2.1, 3.4, 1.9, 5.6, 4.4, 3.3, 2.8], 0.9401366782, 0.6399513746),
        ("cubes", (1..=50).map(|i| (i as f64).powi(3)).collect(), 0.8279356825, 0.0000041155),
        (
            "normal scores",
            (1..=30).map(|i| normal.inverse_cdf((i as f64 - 0.375) / 30.25)).collect(),
            0.9977832115,
            0.9999999793,
        ),
        (
            "bimodal",
            vec![0.1, 0.2, 0.15, 0.12, 0.18, 0.9, 0.95, 0.88, 0.92, 0.85, 0.11, 0.91],
            0.7258402822,
            0.0015122650,
        ),
        ("uniform grid", (0..25).map(|i| i as f64 / 24.0).collect(), 0.9585657853, 0.3866496591),
    ];
    let mut sw_worst: f64 = 0.0;
    for (_, x, w, p) in &reference {
        let r = shapiro_wilk(x).unwrap();
        sw_worst = sw_worst.max((r.statistic - w).abs()).max((r.p_value - p).abs());
    }
    notes.push(format!("Shapiro-Wilk max deviation {sw_worst:.2e} on 5 vectors"));

    let mut binom_bad = 0;
    let mut binom_cases = 0;
    for trials in 1..=100 {
        for hits in 0..=trials {
            for (alpha, den, correction, n_features) in [
                (0.05, 20, Correction::None, 1),
                (0.01, 100, Correction::None, 1),
                (0.05, 200, Correction::Bonferroni, 10),
                (0.05, 900, Correction::Bonferroni, 45),
            ] {
                binom_cases += 1;
                let got = binomial_decision(hits, trials, alpha, correction, n_features).unwrap();
                if got != exact_tail_decision(hits, trials, den) {
                    binom_bad += 1;
                }
            }
        }
    }
    notes.push(format!("binomial decisions: {}/{binom_cases} match", binom_cases - binom_bad));

    outcome(mwu_bad == 0 && sw_worst < 1e-3 && binom_bad == 0, notes.join("; "))
}

fn criterion_6() -> Outcome {
    let probs = vec![vec![1.0, 0.0], vec![0.5, 0.5], vec![0.25, 0.75]];
    let r = prediction_entropy(&probs, &[0, 0, 1], &[0, 1, 1]).unwrap();
    let third = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln()) / 2f64.ln();
    let expected = [0.0, 1.0, third];
    let worst = r.entropy.iter().zip(&expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let (d, informative) = synthesize(400, 4, 6, 3, 9).unwrap();
    let mut cfg = experiment(9);
    cfg.eval_runs = 5;
    let report = evaluate_selection(&cfg, &d, &informative, "informative").unwrap();
    let bounded = report.entropy.entropy.iter().all(|h| (0.0..=1.0).contains(h));
    outcome(
        worst < 1e-9 && bounded && !report.entropy.entropy.is_empty(),
        format!(
            "tagged examples max error {worst:e}; {} evaluation entropies all in [0,1]: {bounded}",
            report.entropy.entropy.len()
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut varied = 0;
    let mut shape_ok = true;
    let mut counts_seen = Vec::new();
    for s in 0..10 {
        let (d, _) = synthesize(600, 5, 20, 2, 200 + s).unwrap();
        let mut cfg = experiment(s);
        cfg.ablation_n = vec![5.0, 20.0, 50.0];
        cfg.noise_boruta.max_iter = 10;
        cfg.eval_runs = 5;
        let report = run_ablation(&cfg, &d).unwrap();
        let rows = &report.rows;
        shape_ok &= rows.len() == 3
            && rows.iter().map(|r| r.n).collect::<Vec<_>>() == [5.0, 20.0, 50.0]
            && rows.iter().all(|r| r.frozen == rows[0].frozen)
            && report.provenance.config.eval_mlp == rows[0].frozen.eval_mlp;
        let counts: Vec<usize> = rows.iter().map(|r| r.selected).collect();
        if !(counts[0] == counts[1] && counts[1] == counts[2]) {
            varied += 1;
        }
        counts_seen.push(counts);
    }
    outcome(
        shape_ok && varied >= 7,
        format!("3 rows with identical frozen params: {shape_ok}; counts vary with n in {varied}/10 seeds {counts_seen:?}"),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = synthesize(300, 3, 9, 2, 77).unwrap();
    let data = dir.path().join("data.csv");
    write_csv(&d, &data).unwrap();
    let mut cfg = ExperimentConfig::new(&data, TargetColumn::Name("target".into()));
    cfg.master_seed = 77;
    cfg.method = Method::Both;
    cfg.boruta = desk_boruta(10);
    cfg.noise_boruta = desk_noise(8);
    cfg.eval_mlp = desk_eval_mlp();
    cfg.eval_runs = 8;
    let mut bytes = Vec::new();
    for workers in [1, 2, 1] {
        let out = dir.path().join(format!("w{workers}_{}", bytes.len()));
        let (_, doc) = with_workers(Some(workers), || run_pipeline(&cfg)).unwrap();
        write_evaluation(&out, &doc).unwrap();
        bytes.push(std::fs::read(out.join("evaluation.json")).unwrap());
    }
    let identical = bytes.windows(2).all(|w| w[0] == w[1]);
    outcome(identical, format!("3 runs (1, 2, 1 workers), evaluation.json {} bytes, identical: {identical}", bytes[0].len()))
}

fn criterion_9() -> Outcome {
    let (reads, violations) = (hygiene::audited_reads(), hygiene::violations());
    outcome(
        violations == 0 && reads > 0,
        format!("{reads} audited reads of training partitions, {violations} touched test rows"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("synthetic recovery", criterion_1),
        ("fewer features, non-inferior F1", criterion_2),
        ("OOB importance oracle", criterion_3),
        ("gradient check", criterion_4),
        ("statistical tests vs oracles", criterion_5),
        ("entropy contract", criterion_6),
        ("ablation harness shape", criterion_7),
        ("determinism across worker counts", criterion_8),
        ("test-set hygiene", criterion_9),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !result.pass as usize;
        println!(
            "criterion {id} ({name}): {} [{:.1}s] {}",
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
