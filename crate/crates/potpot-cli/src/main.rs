//! Command-line front end: dataset generation, bandwidth tuning, model
//! application, experiment tables, and the self-check suite.

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use potpot::experiment::{export_surface, parse_spec, run_experiment, tune_for};
use potpot::potentials::{PotentialModel, ScalingMode};
use potpot::separators::{Separator, SeparatorKind};
use potpot::selftest;
use potpot::tuning::{CvProtocol, Strategy};
use potpot::{
    generate_named, load_csv, potential_at, save_csv, LabeledDataset, PotPotClassifier,
};

#[derive(Parser)]
#[command(name = "potpot", about = "Pot-pot plot classification toolkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset and write train/test CSV files.
    Generate {
        /// Generator name, e.g. 1dist3, 2scale4, 1scale*2, 1rotate7,
        /// disks_100x100, spheres_d3_n1000.
        #[arg(long)]
        name: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path for the training set.
        #[arg(long)]
        train_out: PathBuf,
        /// Output path for the test set.
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Tune bandwidths on a CSV dataset by cross validation.
    Tune {
        /// Input CSV (coordinates, then an integer label in the last column).
        #[arg(long)]
        data: PathBuf,
        /// joint | separate | regressive-separate | rot-joint | rot-separate
        /// | mM-joint | mM-separate
        #[arg(long)]
        strategy: String,
        /// diagonal | knn | alpha
        #[arg(long, default_value = "diagonal")]
        separator: String,
        #[arg(long, default_value_t = 200)]
        max_iterations: usize,
        #[arg(long, default_value_t = 0)]
        fold_seed: u64,
        /// Optional CSV path for the bandwidths-to-errors surface.
        #[arg(long)]
        surface: Option<PathBuf>,
        /// Optional JSON path for the trained model.
        #[arg(long)]
        model_out: Option<PathBuf>,
    },
    /// Classify a CSV dataset with a saved model.
    Classify {
        /// JSON model written by `tune --model-out`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV with one predicted label per row.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an experiment described by a flat key-value spec file.
    Bench {
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV; overrides the spec's `output` key. Without either the
        /// table prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the acceptance self-check suite.
    Selftest {
        /// Run a single criterion (1..=8) instead of all.
        #[arg(long)]
        criterion: Option<usize>,
    },
}

fn parse_strategy(s: &str) -> anyhow::Result<(Strategy, ScalingMode)> {
    Ok(match s {
        "joint" => (Strategy::Joint, ScalingMode::Joint),
        "separate" => (Strategy::Separate, ScalingMode::Separate),
        "regressive" | "regressive-separate" => {
            (Strategy::RegressiveSeparate, ScalingMode::Separate)
        }
        "rot-joint" => (Strategy::Rot, ScalingMode::Joint),
        "rot-separate" => (Strategy::Rot, ScalingMode::Separate),
        "mM-joint" | "mm-joint" => (Strategy::MinMax, ScalingMode::Joint),
        "mM-separate" | "mm-separate" => (Strategy::MinMax, ScalingMode::Separate),
        _ => bail!("unknown strategy '{s}'"),
    })
}

fn parse_separator(s: &str) -> anyhow::Result<SeparatorKind> {
    Ok(match s {
        "diag" | "diagonal" => SeparatorKind::Diagonal,
        "knn" => SeparatorKind::Knn { k_max: None },
        "alpha" => SeparatorKind::Alpha { max_degree: 3 },
        _ => bail!("unknown separator '{s}'"),
    })
}

fn classify_all(
    model: &PotentialModel,
    separator: &Separator,
    data: &LabeledDataset,
) -> anyhow::Result<Vec<usize>> {
    let q = model.q();
    let mut out = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let z: Vec<f64> = (1..=q)
            .map(|j| potential_at(model, data.point(i), j))
            .collect::<potpot::Result<_>>()?;
        out.push(separator.classify(&z));
    }
    Ok(out)
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Generate { name, seed, train_out, test_out } => {
            let set = generate_named(&name, seed)
                .with_context(|| format!("'{name}' is not a known generator"))??;
            save_csv(&set.train, &train_out)?;
            save_csv(&set.test, &test_out)?;
            println!(
                "{}: wrote {} training and {} test points (d = {})",
                set.name,
                set.train.n(),
                set.test.n(),
                set.train.dim()
            );
        }
        Command::Tune {
            data,
            strategy,
            separator,
            max_iterations,
            fold_seed,
            surface,
            model_out,
        } => {
            let dataset = load_csv(&data)?;
            let (strat, mode) = parse_strategy(&strategy)?;
            let sep_kind = parse_separator(&separator)?;
            let protocol = CvProtocol::new(max_iterations, fold_seed);
            let report = tune_for(strat, mode, &dataset, sep_kind, &protocol)?;
            println!(
                "{} evaluations; best h² = {:?} with CV error {:.4}",
                report.evaluations.len(),
                report.best.h2,
                report.best_error
            );
            if let Some(path) = surface {
                export_surface(&report, &path)?;
                println!("surface written to {}", path.display());
            }
            if let Some(path) = model_out {
                let clf = PotPotClassifier::train(&dataset, &report.best, sep_kind)?;
                let json = serde_json::to_string(&(clf.model, clf.separator))?;
                std::fs::write(&path, json)?;
                println!("model written to {}", path.display());
            }
        }
        Command::Classify { model, data, out } => {
            let json = std::fs::read_to_string(&model)
                .with_context(|| format!("reading {}", model.display()))?;
            let (model, separator): (PotentialModel, Separator) = serde_json::from_str(&json)
                .context("model file is not a valid saved model")?;
            let dataset = load_csv(&data)?;
            let predictions = classify_all(&model, &separator, &dataset)?;
            let mut text = String::from("prediction\n");
            for p in &predictions {
                text.push_str(&format!("{p}\n"));
            }
            std::fs::write(&out, text)?;
            let hits = predictions
                .iter()
                .zip(dataset.labels())
                .filter(|(p, l)| p == l)
                .count();
            println!(
                "{} predictions written to {}; agreement with input labels: {:.1}%",
                predictions.len(),
                out.display(),
                100.0 * hits as f64 / dataset.n() as f64
            );
        }
        Command::Bench { spec, out } => {
            let text = std::fs::read_to_string(&spec)
                .with_context(|| format!("reading {}", spec.display()))?;
            let mut parsed = parse_spec(&text)?;
            if let Some(path) = out {
                parsed.output = Some(path);
            }
            let table = run_experiment(&parsed)?;
            let csv = table.render_csv();
            match &parsed.output {
                Some(path) => {
                    std::fs::write(path, &csv)?;
                    println!("table written to {}", path.display());
                }
                None => print!("{csv}"),
            }
        }
        Command::Selftest { criterion } => {
            let results = match criterion {
                Some(id) => {
                    if !(1..=8).contains(&id) {
                        bail!("criterion must be in 1..=8");
                    }
                    vec![selftest::run_criterion(id)]
                }
                None => selftest::run_all(),
            };
            let mut all_pass = true;
            for r in &results {
                println!("{}", r.line());
                all_pass &= r.passed;
            }
            if !all_pass {
                bail!("self-check failed");
            }
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
