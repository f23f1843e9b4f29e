use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nboruta::dataset::{synthesize, write_csv, TargetColumn};
use nboruta::harness::{
    self, compare_methods, evaluate_selections, load_data, read_json, run_ablation, run_selections, with_workers,
    EvaluationDocument, ExperimentConfig, Method, SelectionDocument,
};
use nboruta::{Error, Result};

#[derive(Parser)]
#[command(name = "nboruta", version, about = "Boruta and noise-augmented Boruta feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run feature selection and write selection.json.
    Select(Common),
    /// Select, then evaluate the selections over repeated splits.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Evaluate the selections stored in this selection.json instead of selecting again.
        #[arg(long)]
        selection: Option<PathBuf>,
    },
    /// Noise-augmented selection and evaluation for each value of n.
    Ablate(Common),
    /// Compare two evaluation reports statistically.
    Compare {
        #[command(flatten)]
        common: Common,
        /// evaluation.json files holding exactly two reports between them.
        #[arg(long, num_args = 1..)]
        reports: Vec<PathBuf>,
        /// Significance level; defaults to the config's compare_alpha (0.05).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Write a synthetic classification dataset to CSV.
    Synth {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 5)]
        informative: usize,
        #[arg(long, default_value_t = 45)]
        noise: usize,
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; overrides the config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column name or zero-based index.
    #[arg(long)]
    target: Option<String>,
    /// boruta, noise_boruta or both.
    #[arg(long)]
    method: Option<String>,
    /// Perturbation multiplier; comma-separated list for `ablate`.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<f64>>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    eval_runs: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

impl Common {
    fn config(&self, ablate: bool) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => {
                let data = self
                    .data
                    .clone()
                    .ok_or_else(|| Error::Config("either --config or --data and --target is required".into()))?;
                let target = self
                    .target
                    .as_deref()
                    .ok_or_else(|| Error::Config("--target is required without --config".into()))?;
                ExperimentConfig::new(data, TargetColumn::parse(target))
            }
        };
        if let Some(d) = &self.data {
            cfg.data = d.clone();
        }
        if let Some(t) = &self.target {
            cfg.target = TargetColumn::parse(t);
        }
        if let Some(m) = &self.method {
            cfg.method = m.parse()?;
        }
        if let Some(n) = &self.n {
            if ablate {
                cfg.ablation_n = n.clone();
            } else if let [single] = n.as_slice() {
                cfg.noise_boruta.n_multiplier = *single;
            } else {
                return Err(Error::Config("--n takes a single value outside `ablate`".into()));
            }
        }
        if let Some(k) = self.max_iter {
            cfg.boruta.max_iter = k;
            cfg.noise_boruta.max_iter = k;
        }
        if let Some(r) = self.eval_runs {
            cfg.eval_runs = r;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_selection(doc: &SelectionDocument) {
    for s in &doc.selections {
        println!(
            "{}: {} selected, {} tentative, {} iterations{}",
            s.method.label(),
            s.selected.len(),
            s.tentative.len(),
            s.result.iterations_run,
            if s.empty_selection { " (warning: empty selection)" } else { "" }
        );
        if !s.selected_names.is_empty() {
            println!("  {}", s.selected_names.join(", "));
        }
    }
}

fn print_evaluation(doc: &EvaluationDocument) {
    for r in &doc.reports {
        println!(
            "{}: F1 {:.4} ± {:.4} over {} runs, {} features",
            r.method,
            r.mean,
            r.std,
            r.f1_runs.len(),
            r.selected_feature_count
        );
    }
    for w in &doc.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(c) = &doc.comparison {
        println!("comparison: p = {:.4} -> {}", c.p_value, c.verdict);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Select(common) => {
            let cfg = common.config(false)?;
            with_workers(cfg.workers, || {
                let data = load_data(&cfg)?;
                let doc = run_selections(&cfg, &data)?;
                harness::write_selection(&cfg.output_dir, &doc)?;
                print_selection(&doc);
                Ok(())
            })
        }
        Command::Evaluate { common, selection } => {
            let cfg = common.config(false)?;
            with_workers(cfg.workers, || {
                let data = load_data(&cfg)?;
                let selections = match &selection {
                    Some(path) => read_json::<SelectionDocument>(path)?,
                    None => {
                        let doc = run_selections(&cfg, &data)?;
                        harness::write_selection(&cfg.output_dir, &doc)?;
                        doc
                    }
                };
                print_selection(&selections);
                let doc = evaluate_selections(&cfg, &data, &selections)?;
                harness::write_evaluation(&cfg.output_dir, &doc)?;
                print_evaluation(&doc);
                Ok(())
            })
        }
        Command::Ablate(common) => {
            let cfg = common.config(true)?;
            with_workers(cfg.workers, || {
                let data = load_data(&cfg)?;
                let report = run_ablation(&cfg, &data)?;
                harness::write_ablation(&cfg.output_dir, &report)?;
                println!("n,selected,f1_mean,f1_std");
                for r in &report.rows {
                    println!("{},{},{:.4},{:.4}", r.n, r.selected, r.f1_mean, r.f1_std);
                }
                Ok(())
            })
        }
        Command::Compare { common, reports, alpha } => {
            if reports.is_empty() {
                // Run the full pipeline on both methods and compare.
                let mut cfg = common.config(false)?;
                cfg.method = Method::Both;
                if let Some(a) = alpha {
                    cfg.compare_alpha = a;
                }
                cfg.validate()?;
                let (selections, doc) = harness::run_pipeline(&cfg)?;
                harness::write_selection(&cfg.output_dir, &selections)?;
                harness::write_evaluation(&cfg.output_dir, &doc)?;
                print_evaluation(&doc);
                return Ok(());
            }
            let mut all = Vec::new();
            for path in &reports {
                all.extend(read_json::<EvaluationDocument>(path)?.reports);
            }
            let [a, b] = all.as_slice() else {
                return Err(Error::Config(format!(
                    "compare needs exactly two reports, found {}",
                    all.len()
                )));
            };
            let alpha = alpha.unwrap_or(0.05);
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(Error::Config("--alpha must lie in (0, 1)".into()));
            }
            let c = compare_methods(a, b, alpha)?;
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("."));
            harness::write_json(&out.join("comparison.json"), &c)?;
            for t in &c.tests {
                println!("{}: statistic {:.6}, p = {:.6} ({})", t.test_name, t.statistic, t.p_value, t.method_notes);
            }
            println!("verdict: {}", c.verdict);
            Ok(())
        }
        Command::Synth {
            instances,
            informative,
            noise,
            classes,
            seed,
            out,
        } => {
            let (d, idx) = synthesize(instances, informative, noise, classes, seed)?;
            write_csv(&d, Path::new(&out))?;
            let names: Vec<&str> = idx.iter().map(|&i| d.feature_names()[i].as_str()).collect();
            println!("informative: {}", names.join(","));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                ref e if e.is_data_error() => ExitCode::from(3),
                _ => ExitCode::from(1),
            }
        }
    }
}
