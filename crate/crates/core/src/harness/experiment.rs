use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use super::metrics::{macro_accuracy, per_class_recall, random_guess_pct};
use super::stop_requested;
use crate::data::{
    cache_path, filter_classes, load_dataset, preprocess, read_features, relabel_for_task, write_features, DatasetId,
    FeatureDataset, PreprocessReport, Split,
};
use crate::error::{Error, Result};
use crate::model::{read_model, train_binary, write_model, BinaryModel, EpochRecord, TrainConfig};
use crate::multiclass::{
    inference_cost, CostLedger, Manifest, MultiPredictor, PartitionPolicy, Strategy, TrainingPlan,
};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetId,
    pub data_dir: PathBuf,
    pub strategy: Strategy,
    pub k: usize,
    pub policy: PartitionPolicy,
    pub train: TrainConfig,
    /// Binary trainings run concurrently up to this many threads.
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetId::Mnist,
            data_dir: PathBuf::from("data"),
            strategy: Strategy::Dt,
            k: 4,
            policy: PartitionPolicy::Balanced,
            train: TrainConfig::default(),
            workers: 1,
            out_dir: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(2..=10).contains(&self.k) {
            return Err(Error::Config(format!("K must lie in 2..=10, got {}", self.k)));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Stable name of the run, used for its output directory and result
    /// record. The suffix hashes every setting that affects the outcome.
    pub fn id(&self) -> String {
        let t = &self.train;
        let settings = serde_json::json!({
            "dataset": self.dataset.as_str(),
            "strategy": self.strategy,
            "k": self.k,
            "policy": self.policy.to_string(),
            "train": t,
        });
        format!(
            "{}-{}-{}-k{}-m{}-b{}-s{}-{:08x}",
            self.dataset,
            t.kind,
            self.strategy,
            self.k,
            t.hidden,
            t.batch_size,
            t.seed,
            derive_seed(0, &settings.to_string()) >> 32
        )
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(self.id())
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.run_dir().join("manifest.txt")
    }

    pub fn plan(&self) -> Result<TrainingPlan> {
        TrainingPlan::new(self.strategy, self.k, self.policy, self.train.seed)
    }
}

/// Preprocessed train and test splits restricted to classes `0..k`.
#[derive(Debug, Clone)]
pub struct Features {
    pub train: FeatureDataset,
    pub test: FeatureDataset,
    /// `None` when the features came from the cache.
    pub report: Option<PreprocessReport>,
}

/// Loads, preprocesses and filters a dataset, reusing cached features from
/// `cache_dir` when present.
///
/// Standardization statistics come from the full training split before the
/// class filter, so every K shares one feature space.
pub fn load_features(dataset: DatasetId, data_dir: &Path, k: usize, cache_dir: Option<&Path>) -> Result<Features> {
    if let Some(dir) = cache_dir {
        let (tr, te) = (
            cache_path(dir, dataset, k, Split::Train),
            cache_path(dir, dataset, k, Split::Test),
        );
        if tr.is_file() && te.is_file() {
            return Ok(Features {
                train: read_features(&tr)?,
                test: read_features(&te)?,
                report: None,
            });
        }
    }
    let (raw_train, raw_test) = load_dataset(dataset, data_dir)?;
    let (train, test, report) = preprocess(&raw_train, &raw_test)?;
    let features = Features {
        train: filter_classes(&train, k)?,
        test: filter_classes(&test, k)?,
        report: Some(report),
    };
    if let Some(dir) = cache_dir {
        write_features(&cache_path(dir, dataset, k, Split::Train), &features.train)?;
        write_features(&cache_path(dir, dataset, k, Split::Test), &features.test)?;
    }
    Ok(features)
}

/// Models and per-epoch histories keyed by plan entry.
#[derive(Debug, Clone, Default)]
pub struct TrainedModels {
    pub models: BTreeMap<String, BinaryModel>,
    pub histories: BTreeMap<String, Vec<EpochRecord>>,
    /// Set when a stop request left some entries untrained.
    pub interrupted: bool,
}

/// Per-task config: the run config with a seed derived from the entry's seed key.
pub fn task_config(config: &TrainConfig, seed_key: &str) -> TrainConfig {
    TrainConfig {
        seed: derive_seed(config.seed, seed_key),
        ..*config
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

type TaskOutcome = Result<Option<(BinaryModel, Vec<EpochRecord>)>>;

/// Trains every entry of `plan` independently. `on_done` runs as each model
/// finishes (from the worker thread). Entries not yet started once
/// `should_stop` returns true are skipped.
pub fn train_plan(
    plan: &TrainingPlan,
    train: &FeatureDataset,
    config: &TrainConfig,
    workers: usize,
    should_stop: &(dyn Fn() -> bool + Sync),
    on_done: &(dyn Fn(&str, &BinaryModel) -> Result<()> + Sync),
) -> Result<TrainedModels> {
    let outcomes: Vec<TaskOutcome> = pool(workers)?.install(|| {
        plan.entries
            .par_iter()
            .map(|entry| {
                if should_stop() {
                    return Ok(None);
                }
                let run = || -> Result<(BinaryModel, Vec<EpochRecord>)> {
                    let set = relabel_for_task(train, &entry.task)?;
                    let out = train_binary(&set, None, &task_config(config, &entry.seed_key))?;
                    on_done(&entry.key, &out.model)?;
                    Ok((out.model, out.history))
                };
                run().map(Some).map_err(|e| e.in_task(entry.key.clone()))
            })
            .collect()
    });
    let mut trained = TrainedModels::default();
    for (entry, outcome) in plan.entries.iter().zip(outcomes) {
        match outcome? {
            Some((model, history)) => {
                trained.models.insert(entry.key.clone(), model);
                trained.histories.insert(entry.key.clone(), history);
            }
            None => trained.interrupted = true,
        }
    }
    Ok(trained)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub per_class_recall: Vec<f64>,
    pub macro_accuracy_pct: f64,
    pub ledger: CostLedger,
    pub mean_observed_evals: f64,
    pub max_observed_evals: usize,
}

/// Predicts every test sample and scores the predictions.
pub fn evaluate(
    predictor: &MultiPredictor<BinaryModel>,
    plan: &TrainingPlan,
    test: &FeatureDataset,
    workers: usize,
) -> Result<Evaluation> {
    let ledger = plan.cost()?;
    let outcomes: Vec<Result<(usize, usize)>> = pool(workers)?.install(|| {
        (0..test.len())
            .into_par_iter()
            .map(|i| {
                let p = predictor.predict(test.features.row(i))?;
                Ok((p.label, p.ledger.observed_evals.unwrap_or(ledger.worst_case_evals)))
            })
            .collect()
    });
    let mut predictions = Vec::with_capacity(test.len());
    let mut evals = Vec::with_capacity(test.len());
    for o in outcomes {
        let (label, n) = o?;
        predictions.push(label);
        evals.push(n);
    }
    let recall = per_class_recall(&predictions, &test.labels, plan.k)?;
    Ok(Evaluation {
        macro_accuracy_pct: macro_accuracy(&predictions, &test.labels, plan.k)?,
        per_class_recall: recall,
        ledger,
        mean_observed_evals: evals.iter().sum::<usize>() as f64 / evals.len().max(1) as f64,
        max_observed_evals: evals.iter().copied().max().unwrap_or(0),
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExperimentResult {
    pub id: String,
    pub dataset: String,
    pub strategy: Strategy,
    #[serde(rename = "K")]
    pub k: usize,
    pub policy: String,
    pub train: TrainConfig,
    pub per_class_recall: Vec<f64>,
    pub macro_accuracy_pct: f64,
    pub random_guess_pct: f64,
    pub ledger: CostLedger,
    pub mean_observed_evals: f64,
    pub max_observed_evals: usize,
    pub wall_s: f64,
    pub histories: BTreeMap<String, Vec<EpochRecord>>,
    #[serde(skip)]
    pub predictions: Vec<usize>,
}

impl ExperimentResult {
    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        Self {
            wall_s: 0.0,
            ..self.clone()
        } == Self {
            wall_s: 0.0,
            ..other.clone()
        }
    }
}

/// Writes each finished model under the run directory and keeps the
/// manifest current, marked incomplete until every model exists.
struct ArtifactWriter {
    run_dir: PathBuf,
    manifest_path: PathBuf,
    manifest: Mutex<Manifest>,
}

impl ArtifactWriter {
    fn new(config: &ExperimentConfig, plan: &TrainingPlan) -> Result<Self> {
        let writer = Self {
            run_dir: config.run_dir(),
            manifest_path: config.manifest_path(),
            manifest: Mutex::new(Manifest::for_plan(plan, config.train.seed)),
        };
        writer
            .manifest
            .lock()
            .expect("manifest lock")
            .write(&writer.manifest_path)?;
        Ok(writer)
    }

    fn save(&self, key: &str, model: &BinaryModel) -> Result<()> {
        let rel = PathBuf::from("models").join(format!("{key}.model"));
        write_model(&self.run_dir.join(&rel), model)?;
        let mut m = self.manifest.lock().expect("manifest lock");
        m.models.insert(key.to_string(), rel);
        m.write(&self.manifest_path)
    }

    fn finish(&self) -> Result<()> {
        let mut m = self.manifest.lock().expect("manifest lock");
        m.complete = true;
        m.write(&self.manifest_path)
    }
}

/// Trains every model of the configured strategy on `features.train`.
/// With `save`, model files and the manifest go to the run directory.
/// Stops early, leaving the manifest marked incomplete, on a stop request.
pub fn train_experiment(
    config: &ExperimentConfig,
    features: &Features,
    save: bool,
) -> Result<(TrainingPlan, TrainedModels)> {
    train_experiment_until(config, features, save, &stop_requested)
}

pub fn train_experiment_until(
    config: &ExperimentConfig,
    features: &Features,
    save: bool,
    should_stop: &(dyn Fn() -> bool + Sync),
) -> Result<(TrainingPlan, TrainedModels)> {
    config.validate()?;
    let plan = config.plan()?;
    let writer = if save {
        Some(ArtifactWriter::new(config, &plan)?)
    } else {
        None
    };
    let on_done = |key: &str, model: &BinaryModel| match &writer {
        Some(w) => w.save(key, model),
        None => Ok(()),
    };
    let trained = train_plan(
        &plan,
        &features.train,
        &config.train,
        config.workers,
        should_stop,
        &on_done,
    )?;
    if trained.interrupted {
        return Err(Error::Interrupted);
    }
    if let Some(w) = &writer {
        w.finish()?;
    }
    Ok((plan, trained))
}

/// Trains and evaluates one experiment on already-loaded features.
pub fn run_on_features(config: &ExperimentConfig, features: &Features, save: bool) -> Result<ExperimentResult> {
    let start = Instant::now();
    let (plan, trained) = train_experiment(config, features, save)?;
    let predictor = plan.assemble(trained.models)?;
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
        random_guess_pct: random_guess_pct(config.k),
        ledger: eval.ledger,
        mean_observed_evals: eval.mean_observed_evals,
        max_observed_evals: eval.max_observed_evals,
        wall_s: start.elapsed().as_secs_f64(),
        histories: trained.histories,
        predictions: eval.predictions,
    })
}

/// Loads the data, trains every binary model, evaluates on the test split
/// and saves the models and manifest.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let features = load_features(
        config.dataset,
        &config.data_dir,
        config.k,
        Some(&config.out_dir.join("cache")),
    )?;
    run_on_features(config, &features, true)
}

/// Loads a saved predictor from its manifest.
pub fn load_predictor(manifest_path: &Path) -> Result<(TrainingPlan, MultiPredictor<BinaryModel>)> {
    if !manifest_path.is_file() {
        return Err(Error::Config(format!("no manifest at {}", manifest_path.display())));
    }
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let plan = manifest.validate(base)?;
    let mut models = BTreeMap::new();
    for (key, path) in manifest.resolved_models(base) {
        let model = read_model(&path).map_err(|e| e.in_task(key.clone()))?;
        models.insert(key, model);
    }
    let predictor = plan.assemble(models)?;
    Ok((plan, predictor))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub random_guess_pct: f64,
    pub result: ExperimentResult,
}

/// Runs the template at each K with the architecture held fixed.
pub fn run_k_sweep(template: &ExperimentConfig, ks: &[usize], save: bool) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let config = ExperimentConfig { k, ..template.clone() };
        config.validate()?;
        let features = load_features(config.dataset, &config.data_dir, k, Some(&config.out_dir.join("cache")))?;
        let result = run_on_features(&config, &features, save)?;
        rows.push(SweepRow {
            k,
            random_guess_pct: random_guess_pct(k),
            result,
        });
    }
    Ok(rows)
}

/// Worst-case cost table for every strategy at `k`.
pub fn cost_table(k: usize) -> Result<Vec<CostLedger>> {
    Strategy::ALL.iter().map(|&s| inference_cost(s, k)).collect()
}
