//! Decomposition of a K-class problem into binary tasks and recombination
//! of trained binary scorers.

pub mod cost;
pub mod manifest;
pub mod plan;
pub mod predict;
pub mod task;
pub mod tree;

pub use cost::{inference_cost, CostLedger, Strategy, ENSEMBLE_SIZE};
pub use manifest::Manifest;
pub use plan::{MultiPredictor, PlanEntry, TrainingPlan};
pub use predict::{
    plurality_first_wins, predict_ovo, predict_ovr, predict_root_ensemble, predict_tree, predict_tree_ensemble,
    BinaryScorer, Prediction, TrainedTree,
};
pub use task::{build_ovo_tasks, build_ovr_tasks, BinaryTask};
pub use tree::{build_tree, ceil_log2, ClassTree, PartitionPolicy, TreeNode};
