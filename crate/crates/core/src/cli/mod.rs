//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or unexpected failure, 2 configuration or
//! usage error, 3 data error, 4 numeric failure, 130 interrupted.

pub mod config;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{
    self, cost_table, evaluate, existing_result, load_features, load_predictor, record_result, run_experiment,
    train_experiment, ExperimentConfig, ExperimentResult, ResultRow,
};
use crate::multiclass::{inference_cost, CostLedger, Strategy};

pub use config::load_config;

#[derive(Debug, Parser)]
#[command(
    name = "multibin",
    version,
    about = "Multiclass classification from constrained binary classifiers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Redo work even when a result or model set already exists.
    #[arg(long)]
    pub force: bool,
    /// Concurrent binary trainings (overrides the config key).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Suppress progress messages on stderr.
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every binary model of the configured strategy and write the manifest.
    Train(RunArgs),
    /// Evaluate a trained predictor on the test split.
    Eval(RunArgs),
    /// Evaluate (training first with --train) and append the result record.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Train the models when no complete manifest exists.
        #[arg(long)]
        train: bool,
    },
    /// Train and evaluate at several K with the architecture fixed.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated class counts.
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
        ks: Vec<usize>,
    },
    /// Print model and evaluation counts for a strategy.
    Cost {
        #[arg(short = 'K', long = "k")]
        k: usize,
        /// One strategy; all when omitted.
        #[arg(long)]
        strategy: Option<String>,
    },
}

pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::Config(_) | Error::Usage(_) | Error::Shape { .. } => 2,
        Error::Data(_) | Error::Parse { .. } => 3,
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 3,
        Error::Numeric(_) => 4,
        Error::Interrupted => 130,
        _ => 1,
    }
}

fn resolve(run: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = load_config(run.config.as_deref(), &run.overrides)?;
    if let Some(w) = run.workers {
        config.workers = w;
    }
    config.validate()?;
    Ok(config)
}

fn note(run: &RunArgs, msg: impl AsRef<str>) {
    if !run.quiet {
        eprintln!("{}", msg.as_ref());
    }
}

fn print_rows(rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::Data(format!("cannot print row: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<stdout>", e))
}

fn manifest_is_complete(config: &ExperimentConfig) -> bool {
    harness::load_predictor(&config.manifest_path()).is_ok()
}

fn train(run: &RunArgs) -> Result<()> {
    let config = resolve(run)?;
    if !run.force && manifest_is_complete(&config) {
        note(
            run,
            format!(
                "models already trained at {} (use --force to retrain)",
                config.run_dir().display()
            ),
        );
        println!("{}", config.manifest_path().display());
        return Ok(());
    }
    note(
        run,
        format!("training {} ({} models)", config.id(), config.plan()?.entries.len()),
    );
    let features = load_features(
        config.dataset,
        &config.data_dir,
        config.k,
        Some(&config.out_dir.join("cache")),
    )?;
    if let Some(r) = features.report {
        if r.zero_norm_train + r.zero_norm_test > 0 {
            note(
                run,
                format!(
                    "{} train / {} test rows had zero norm",
                    r.zero_norm_train, r.zero_norm_test
                ),
            );
        }
    }
    let (plan, trained) = train_experiment(&config, &features, true)?;
    for (key, h) in &trained.histories {
        if let Some(last) = h.last() {
            note(
                run,
                format!(
                    "{key}: loss {:.4}, train accuracy {:.4}",
                    last.train_loss, last.train_accuracy
                ),
            );
        }
    }
    note(run, format!("wrote {} models", plan.entries.len()));
    println!("{}", config.manifest_path().display());
    Ok(())
}

fn evaluate_saved(config: &ExperimentConfig) -> Result<ExperimentResult> {
    let start = std::time::Instant::now();
    let (plan, predictor) = load_predictor(&config.manifest_path())?;
    let features = load_features(
        config.dataset,
        &config.data_dir,
        config.k,
        Some(&config.out_dir.join("cache")),
    )?;
    let eval = evaluate(&predictor, &plan, &features.test, config.workers)?;
    Ok(ExperimentResult {
        id: config.id(),
        dataset: config.dataset.to_string(),
        strategy: config.strategy,
        k: config.k,
        policy: config.policy.to_string(),
        train: config.train,
        per_class_recall: eval.per_class_recall,
        macro_accuracy_pct: eval.macro_accuracy_pct,
        random_guess_pct: harness::random_guess_pct(config.k),
        ledger: eval.ledger,
        mean_observed_evals: eval.mean_observed_evals,
        max_observed_evals: eval.max_observed_evals,
        wall_s: start.elapsed().as_secs_f64(),
        histories: Default::default(),
        predictions: eval.predictions,
    })
}

fn eval(run: &RunArgs) -> Result<()> {
    let config = resolve(run)?;
    let result = evaluate_saved(&config)?;
    note(run, format!("per-class recall: {:?}", result.per_class_recall));
    print_rows(&[ResultRow::from(&result)])
}

fn bench(run: &RunArgs, train_on_demand: bool) -> Result<()> {
    let config = resolve(run)?;
    if !run.force {
        if let Some(prev) = existing_result(&config.out_dir, &config.id())? {
            note(run, format!("result for {} exists (use --force to rerun)", prev.id));
            return print_rows(&[ResultRow::from(&prev)]);
        }
    }
    let result = if manifest_is_complete(&config) && !run.force {
        evaluate_saved(&config)?
    } else if train_on_demand {
        note(run, format!("training and evaluating {}", config.id()));
        run_experiment(&config)?
    } else {
        return Err(Error::Config(format!(
            "no complete manifest at {}; run `train` first or pass --train",
            config.manifest_path().display()
        )));
    };
    record_result(&config.out_dir, &result)?;
    print_rows(&[ResultRow::from(&result)])
}

fn sweep(run: &RunArgs, ks: &[usize]) -> Result<()> {
    let template = resolve(run)?;
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &k in ks {
        let config = ExperimentConfig { k, ..template.clone() };
        config.validate()?;
        let result = match existing_result(&config.out_dir, &config.id())? {
            Some(prev) if !run.force => prev,
            _ => {
                note(run, format!("K={k}: training and evaluating {}", config.id()));
                let r = run_experiment(&config)?;
                record_result(&config.out_dir, &r)?;
                r
            }
        };
        table.push((k, result.macro_accuracy_pct, result.random_guess_pct));
        rows.push(ResultRow::from(&result));
    }
    print_rows(&rows)?;
    let mut err = std::io::stderr().lock();
    if !run.quiet {
        let _ = writeln!(err, "{:>4} {:>9} {:>8}", "K", "accuracy", "random");
        for (k, acc, rnd) in table {
            let _ = writeln!(err, "{k:>4} {acc:>9.1} {rnd:>8.1}");
        }
    }
    Ok(())
}

fn print_ledger(l: &CostLedger) {
    println!("{},{},{},{}", l.strategy, l.k, l.models_total, l.worst_case_evals);
}

fn cost(k: usize, strategy: Option<&str>) -> Result<()> {
    let ledgers = match strategy {
        Some(s) => vec![inference_cost(s.parse::<Strategy>()?, k)?],
        None => cost_table(k)?,
    };
    println!("strategy,K,models_total,worst_case_evals");
    ledgers.iter().for_each(print_ledger);
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train(r) => train(r),
        Command::Eval(r) => eval(r),
        Command::Bench { run, train } => bench(run, *train),
        Command::Sweep { run, ks } => sweep(run, ks),
        Command::Cost { k, strategy } => cost(*k, strategy.as_deref()),
    }
}

/// Parses arguments, installs the interrupt handler, runs, and maps the
/// outcome to an exit code with a one-line diagnosis on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = ctrlc::set_handler(|| {
        eprintln!("interrupt: finishing in-flight tasks, then stopping");
        harness::request_stop();
    });
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
