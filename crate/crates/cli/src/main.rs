//! `histner` command line: run experiments, score predictions, export
//! tables and convert HIPE files to JSON dumps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use histner::corpus::{dump_json, load_json, Dataset, Split};
use histner::runner::{
    export_tables, load_dataset, read_jsonl, run_experiment, score_predictions, write_jsonl, DatasetConfig,
    ExperimentConfig, PredictionRecord,
};
use histner::scoring::ScoreReport;

#[derive(Parser)]
#[command(name = "histner", version, about = "LLM prompting for named entity recognition on historical texts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method × run × document matrix described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write artifacts here instead of the configured output_dir.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the configured worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Score a predictions.jsonl file against gold annotations.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        /// A JSON dump, or one or more HIPE TSV files (repeat the flag).
        #[arg(long, required = true)]
        gold: Vec<PathBuf>,
        /// Dataset id for TSV gold files; defaults to the one in the predictions.
        #[arg(long)]
        dataset_id: Option<String>,
        /// Tag column to read from TSV gold files.
        #[arg(long)]
        column: Option<String>,
        /// Write score reports as JSON lines here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rebuild the Markdown and CSV tables from a run directory's scores.jsonl.
    ExportTables {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        confidence: f64,
        /// Defaults to `<runs>/tables`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Convert HIPE TSV split files into one JSON dump.
    Dump {
        #[arg(long)]
        dataset_id: String,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        language: Option<String>,
        #[arg(long)]
        column: Option<String>,
        /// Fail on recoverable format problems instead of warning.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            output_dir,
            workers,
        } => run(&config, output_dir, workers),
        Command::Score {
            predictions,
            gold,
            dataset_id,
            column,
            output,
        } => score(&predictions, &gold, dataset_id, column, output.as_deref()),
        Command::ExportTables {
            runs,
            confidence,
            output,
        } => {
            let scores: Vec<ScoreReport> = read_jsonl(&runs.join("scores.jsonl"))?;
            let dir = output.unwrap_or_else(|| runs.join("tables"));
            for path in export_tables(&scores, confidence, &dir)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Dump {
            dataset_id,
            train,
            dev,
            test,
            language,
            column,
            strict,
            output,
        } => {
            if train.is_none() && dev.is_none() && test.is_none() {
                bail!("give at least one of --train, --dev, --test");
            }
            let cfg = DatasetConfig {
                id: dataset_id,
                language,
                column,
                train,
                dev,
                test,
                strict,
                ..Default::default()
            };
            let ds = load_dataset(&cfg)?;
            std::fs::write(&output, dump_json(&ds)).with_context(|| format!("writing {}", output.display()))?;
            println!(
                "{}: {} documents, labels {}",
                ds.dataset_id,
                ds.documents.len(),
                ds.labels.labels().join(", ")
            );
            Ok(())
        }
    }
}

fn run(config: &Path, output_dir: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let outcome = run_experiment(&cfg)?;
    let m = &outcome.manifest;
    if m.failed > 0 {
        log::warn!("{} documents failed; see manifest.json for reasons", m.failed);
    }
    println!(
        "{} documents annotated ({} failed), {} provider calls, {} cache hits, {:.1}s",
        m.entries.len(),
        m.failed,
        m.provider_calls,
        m.cache_hits,
        m.wall_clock_secs
    );
    let strict = cfg.output_dir.join("tables").join("strict.md");
    if let Ok(table) = std::fs::read_to_string(&strict) {
        println!("\n{table}");
    }
    println!("artifacts in {}", cfg.output_dir.display());
    Ok(())
}

fn split_from_name(path: &Path) -> Split {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_lowercase()).unwrap_or_default();
    if stem.contains("dev") {
        Split::Dev
    } else if stem.contains("test") {
        Split::Test
    } else {
        Split::Train
    }
}

fn load_gold(paths: &[PathBuf], dataset_id: &str, column: Option<String>) -> Result<Dataset> {
    if let [single] = paths {
        if single.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(single).with_context(|| format!("reading {}", single.display()))?;
            return Ok(load_json(&text)?);
        }
    }
    let mut cfg = DatasetConfig {
        id: dataset_id.to_string(),
        column,
        ..Default::default()
    };
    for p in paths {
        let slot = match split_from_name(p) {
            Split::Train => &mut cfg.train,
            Split::Dev => &mut cfg.dev,
            Split::Test => &mut cfg.test,
        };
        if slot.is_some() {
            bail!("two gold files map to the same split; name them *train*, *dev* and *test*");
        }
        *slot = Some(p.clone());
    }
    Ok(load_dataset(&cfg)?)
}

fn score(
    predictions: &Path,
    gold: &[PathBuf],
    dataset_id: Option<String>,
    column: Option<String>,
    output: Option<&Path>,
) -> Result<()> {
    let records: Vec<PredictionRecord> = read_jsonl(predictions)?;
    let ids: BTreeSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    let dataset_id = match dataset_id {
        Some(id) => id,
        None if ids.len() == 1 => ids.into_iter().next().unwrap_or_default().to_string(),
        None => bail!("predictions cover datasets {ids:?}; pick one with --dataset-id"),
    };
    let gold = load_gold(gold, &dataset_id, column)?;
    let reports = score_predictions(&records, &gold)?;
    match output {
        Some(path) => write_jsonl(path, &reports)?,
        None => {
            for r in &reports {
                println!("{}", serde_json::to_string(r)?);
            }
        }
    }
    for r in &reports {
        eprintln!(
            "{} {:<11} run {:<5} {:<6} P {:.3} R {:.3} F1 {:.3}",
            r.dataset_id, r.method, r.run, r.mode, r.precision, r.recall, r.f1
        );
    }
    Ok(())
}
