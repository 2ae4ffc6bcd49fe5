//! Experiment orchestration: data loading, per-task training, evaluation
//! and result records.

pub mod experiment;
pub mod metrics;
pub mod results;

use std::sync::atomic::{AtomicBool, Ordering};

pub use experiment::{
    cost_table, evaluate, load_features, load_predictor, run_experiment, run_k_sweep, run_on_features, task_config,
    train_experiment, train_experiment_until, train_plan, Evaluation, ExperimentConfig, ExperimentResult, Features,
    SweepRow, TrainedModels,
};
pub use metrics::{macro_accuracy, per_class_recall, random_guess_pct};
pub use results::{existing_result, read_results, record_result, ResultRow};

static STOP: AtomicBool = AtomicBool::new(false);

/// Asks running experiments to finish their in-flight tasks and stop.
pub fn request_stop() {
    STOP.store(true, Ordering::SeqCst);
}

pub fn stop_requested() -> bool {
    STOP.load(Ordering::SeqCst)
}
