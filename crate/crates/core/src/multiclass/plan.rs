//! Which binary models a strategy needs, and how trained models are
//! assembled back into a multinomial predictor.

use std::collections::BTreeMap;

use ndarray::ArrayView1;

use super::cost::{inference_cost, CostLedger, Strategy, ENSEMBLE_SIZE};
use super::predict::{
    predict_ovo, predict_ovr, predict_root_ensemble, predict_tree, predict_tree_ensemble, BinaryScorer, Prediction,
    TrainedTree,
};
use super::task::{build_ovo_tasks, build_ovr_tasks, BinaryTask};
use super::tree::{build_tree, ClassTree, PartitionPolicy};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// One binary model to train.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanEntry {
    /// Model key; unique within a plan and safe to use as a file stem.
    pub key: String,
    pub task: BinaryTask,
    /// Names the training run for seeding. Equal relabelings share it across
    /// strategies; ensemble members get distinct ones.
    pub seed_key: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPlan {
    pub strategy: Strategy,
    pub k: usize,
    pub policy: PartitionPolicy,
    /// Partition policy of every tree the strategy uses, in order.
    pub tree_policies: Vec<PartitionPolicy>,
    pub trees: Vec<ClassTree>,
    pub entries: Vec<PlanEntry>,
}

pub fn root_member_key(root_id: &str, i: usize) -> String {
    format!("{root_id}-r{i}")
}

pub fn tree_member_key(tree: usize, task_id: &str) -> String {
    format!("t{tree}-{task_id}")
}

/// Topologies for the tree ensemble: random shuffles seeded from the
/// configured policy seed, or from the run seed under the balanced policy.
pub fn ensemble_policies(policy: PartitionPolicy, seed: u64) -> Vec<PartitionPolicy> {
    let base = match policy {
        PartitionPolicy::Random(s) => s,
        PartitionPolicy::Balanced => seed,
    };
    (0..ENSEMBLE_SIZE)
        .map(|i| PartitionPolicy::Random(derive_seed(base, &format!("topology-{i}"))))
        .collect()
}

impl TrainingPlan {
    pub fn new(strategy: Strategy, k: usize, policy: PartitionPolicy, seed: u64) -> Result<Self> {
        let tree_policies = match strategy {
            Strategy::Ovo | Strategy::Ovr => Vec::new(),
            Strategy::Dt | Strategy::DtRootEnsemble => vec![policy],
            Strategy::DtTreeEnsemble => ensemble_policies(policy, seed),
        };
        Self::with_tree_policies(strategy, k, policy, tree_policies)
    }

    pub fn with_tree_policies(
        strategy: Strategy,
        k: usize,
        policy: PartitionPolicy,
        tree_policies: Vec<PartitionPolicy>,
    ) -> Result<Self> {
        let expected_trees = match strategy {
            Strategy::Ovo | Strategy::Ovr => 0,
            Strategy::Dt | Strategy::DtRootEnsemble => 1,
            Strategy::DtTreeEnsemble => ENSEMBLE_SIZE,
        };
        if tree_policies.len() != expected_trees {
            return Err(Error::Config(format!(
                "{strategy} uses {expected_trees} trees, got {} tree policies",
                tree_policies.len()
            )));
        }
        let classes: Vec<usize> = (0..k).collect();
        let trees = tree_policies
            .iter()
            .map(|&p| build_tree(&classes, p))
            .collect::<Result<Vec<_>>>()?;
        let entry = |key: String, task: &BinaryTask| PlanEntry {
            key,
            seed_key: task.signature(),
            task: task.clone(),
        };
        let member = |key: String, task: &BinaryTask, tag: String| PlanEntry {
            key,
            seed_key: format!("{}#{tag}", task.signature()),
            task: task.clone(),
        };
        let entries = match strategy {
            Strategy::Ovo => build_ovo_tasks(k)?
                .into_iter()
                .map(|t| entry(t.id.clone(), &t))
                .collect(),
            Strategy::Ovr => build_ovr_tasks(k)?
                .into_iter()
                .map(|t| entry(t.id.clone(), &t))
                .collect(),
            Strategy::Dt => trees[0].tasks().into_iter().map(|t| entry(t.id.clone(), t)).collect(),
            Strategy::DtRootEnsemble => {
                let tasks = trees[0].tasks();
                let root = tasks[0];
                (0..ENSEMBLE_SIZE)
                    .map(|i| member(root_member_key(&root.id, i), root, format!("r{i}")))
                    .chain(tasks[1..].iter().map(|t| entry(t.id.clone(), t)))
                    .collect()
            }
            Strategy::DtTreeEnsemble => trees
                .iter()
                .enumerate()
                .flat_map(|(i, tree)| {
                    tree.tasks()
                        .into_iter()
                        .map(move |t| member(tree_member_key(i, &t.id), t, format!("t{i}")))
                })
                .collect(),
        };
        Ok(Self {
            strategy,
            k,
            policy,
            tree_policies,
            trees,
            entries,
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.key.as_str())
    }

    pub fn cost(&self) -> Result<CostLedger> {
        inference_cost(self.strategy, self.k)
    }

    /// Distributes trained models (keyed as in [`TrainingPlan::entries`])
    /// into a ready predictor. Every key must be present.
    pub fn assemble<S: BinaryScorer>(&self, mut models: BTreeMap<String, S>) -> Result<MultiPredictor<S>> {
        let missing: Vec<&str> = self.keys().filter(|k| !models.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("missing trained models: {}", missing.join(", "))));
        }
        let mut take = |key: &str| models.remove(key).expect("checked above");
        Ok(match self.strategy {
            Strategy::Ovo => {
                let mut table = BTreeMap::new();
                for e in &self.entries {
                    let a = *e.task.zero_classes.first().expect("non-empty");
                    let b = *e.task.one_classes.first().expect("non-empty");
                    table.insert((a, b), take(&e.key));
                }
                MultiPredictor::Ovo {
                    k: self.k,
                    models: table,
                }
            }
            Strategy::Ovr => {
                let mut table = BTreeMap::new();
                for e in &self.entries {
                    table.insert(*e.task.one_classes.first().expect("non-empty"), take(&e.key));
                }
                MultiPredictor::Ovr {
                    k: self.k,
                    models: table,
                }
            }
            Strategy::Dt => {
                let tree = &self.trees[0];
                let nodes = tree.tasks().iter().map(|t| (t.id.clone(), take(&t.id))).collect();
                MultiPredictor::Tree(TrainedTree::new(tree.clone(), nodes)?)
            }
            Strategy::DtRootEnsemble => {
                let tree = &self.trees[0];
                let tasks = tree.tasks();
                let roots = (0..ENSEMBLE_SIZE)
                    .map(|i| take(&root_member_key(&tasks[0].id, i)))
                    .collect();
                let nodes = tasks[1..].iter().map(|t| (t.id.clone(), take(&t.id))).collect();
                MultiPredictor::RootEnsemble {
                    tree: TrainedTree::without_root(tree.clone(), nodes)?,
                    roots,
                }
            }
            Strategy::DtTreeEnsemble => {
                let mut trained = Vec::with_capacity(ENSEMBLE_SIZE);
                for (i, tree) in self.trees.iter().enumerate() {
                    let nodes = tree
                        .tasks()
                        .iter()
                        .map(|t| (t.id.clone(), take(&tree_member_key(i, &t.id))))
                        .collect();
                    trained.push(TrainedTree::new(tree.clone(), nodes)?);
                }
                MultiPredictor::TreeEnsemble(trained)
            }
        })
    }
}

/// A multinomial predictor built from trained binary models. Read-only
/// after construction.
#[derive(Debug, Clone)]
pub enum MultiPredictor<S> {
    Ovo {
        k: usize,
        models: BTreeMap<(usize, usize), S>,
    },
    Ovr {
        k: usize,
        models: BTreeMap<usize, S>,
    },
    Tree(TrainedTree<S>),
    RootEnsemble {
        tree: TrainedTree<S>,
        roots: Vec<S>,
    },
    TreeEnsemble(Vec<TrainedTree<S>>),
}

impl<S: BinaryScorer> MultiPredictor<S> {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<Prediction> {
        match self {
            MultiPredictor::Ovo { k, models } => predict_ovo(models, *k, x),
            MultiPredictor::Ovr { k, models } => predict_ovr(models, *k, x),
            MultiPredictor::Tree(t) => predict_tree(t, x),
            MultiPredictor::RootEnsemble { tree, roots } => predict_root_ensemble(tree, roots, x),
            MultiPredictor::TreeEnsemble(trees) => predict_tree_ensemble(trees, x),
        }
    }
}
