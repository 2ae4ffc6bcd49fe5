use std::collections::BTreeMap;

use ndarray::ArrayView1;

use super::cost::{inference_cost, CostLedger, Strategy, ENSEMBLE_SIZE};
use super::tree::{ClassTree, TreeNode};
use crate::error::{Error, Result};

/// Anything that maps an input to a score in `[0, 1]`.
pub trait BinaryScorer {
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64>;
}

/// A fixed score, independent of the input.
impl BinaryScorer for f64 {
    fn score(&self, _x: ArrayView1<'_, f64>) -> Result<f64> {
        Ok(*self)
    }
}

impl<S: BinaryScorer + ?Sized> BinaryScorer for &S {
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        (**self).score(x)
    }
}

impl<S: BinaryScorer + ?Sized> BinaryScorer for Box<S> {
    fn score(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        (**self).score(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub label: usize,
    pub ledger: CostLedger,
}

fn argmax_smallest(counts: impl IntoIterator<Item = usize>) -> usize {
    let mut best = (0, 0);
    for (i, c) in counts.into_iter().enumerate() {
        if c > best.1 {
            best = (i, c);
        }
    }
    best.0
}

/// Pairwise majority vote. Score `< 0.5` votes for the smaller class of the
/// pair; vote ties go to the smallest label.
pub fn predict_ovo<S: BinaryScorer>(
    models: &BTreeMap<(usize, usize), S>,
    k: usize,
    x: ArrayView1<'_, f64>,
) -> Result<Prediction> {
    let ledger = inference_cost(Strategy::Ovo, k)?;
    let mut votes = vec![0usize; k];
    let mut evals = 0;
    for a in 0..k {
        for b in a + 1..k {
            let model = models
                .get(&(a, b))
                .ok_or_else(|| Error::Config(format!("missing OvO model for pair ({a}, {b})")))?;
            let winner = if model.score(x)? < 0.5 { a } else { b };
            votes[winner] += 1;
            evals += 1;
        }
    }
    Ok(Prediction {
        label: argmax_smallest(votes),
        ledger: ledger.observed(evals),
    })
}

/// Highest score wins; exact ties go to the smallest label.
pub fn predict_ovr<S: BinaryScorer>(
    models: &BTreeMap<usize, S>,
    k: usize,
    x: ArrayView1<'_, f64>,
) -> Result<Prediction> {
    let ledger = inference_cost(Strategy::Ovr, k)?;
    let mut best = (0, f64::NEG_INFINITY);
    for c in 0..k {
        let model = models
            .get(&c)
            .ok_or_else(|| Error::Config(format!("missing OvR model for class {c}")))?;
        let s = model.score(x)?;
        if s.is_nan() {
            return Err(Error::Numeric(format!("OvR model {c} returned NaN")));
        }
        if s > best.1 {
            best = (c, s);
        }
    }
    Ok(Prediction {
        label: best.0,
        ledger: ledger.observed(k),
    })
}

/// A class tree with one model per internal node, keyed by task id.
#[derive(Debug, Clone)]
pub struct TrainedTree<S> {
    pub tree: ClassTree,
    pub models: BTreeMap<String, S>,
}

impl<S: BinaryScorer> TrainedTree<S> {
    /// Requires a model at every internal node.
    pub fn new(tree: ClassTree, models: BTreeMap<String, S>) -> Result<Self> {
        Self::build(tree, models, false)
    }

    /// Like [`TrainedTree::new`] but the root model may be absent; used when
    /// the root decision comes from an ensemble.
    pub fn without_root(tree: ClassTree, models: BTreeMap<String, S>) -> Result<Self> {
        Self::build(tree, models, true)
    }

    fn build(tree: ClassTree, models: BTreeMap<String, S>, skip_root: bool) -> Result<Self> {
        tree.validate()?;
        let skip = usize::from(skip_root);
        if let Some(t) = tree
            .tasks()
            .into_iter()
            .skip(skip)
            .find(|t| !models.contains_key(&t.id))
        {
            return Err(Error::Config(format!("tree node {} has no trained model", t.id)));
        }
        Ok(Self { tree, models })
    }

    fn k(&self) -> usize {
        self.tree.classes().len()
    }

    /// Routes from node `start` to a leaf; returns the class and the number
    /// of models evaluated.
    fn descend(&self, start: usize, x: ArrayView1<'_, f64>) -> Result<(usize, usize)> {
        let mut at = start;
        let mut evals = 0;
        loop {
            match self.tree.node(at) {
                TreeNode::Leaf { class } => return Ok((*class, evals)),
                TreeNode::Internal { task, left, right } => {
                    let model = self
                        .models
                        .get(&task.id)
                        .ok_or_else(|| Error::Config(format!("tree node {} has no trained model", task.id)))?;
                    evals += 1;
                    at = if model.score(x)? < 0.5 { *left } else { *right };
                }
            }
        }
    }

    fn children(&self) -> (usize, usize) {
        match self.tree.node(self.tree.root()) {
            TreeNode::Internal { left, right, .. } => (*left, *right),
            TreeNode::Leaf { .. } => unreachable!("validated trees have an internal root"),
        }
    }
}

/// Root-to-leaf routing: score `< 0.5` goes left, otherwise right.
pub fn predict_tree<S: BinaryScorer>(tree: &TrainedTree<S>, x: ArrayView1<'_, f64>) -> Result<Prediction> {
    let (label, evals) = tree.descend(tree.tree.root(), x)?;
    Ok(Prediction {
        label,
        ledger: inference_cost(Strategy::Dt, tree.k())?.observed(evals),
    })
}

/// The root direction is the majority of the thresholded root votes; the
/// rest of the descent uses the tree's own models.
pub fn predict_root_ensemble<S: BinaryScorer, R: BinaryScorer>(
    tree: &TrainedTree<S>,
    root_models: &[R],
    x: ArrayView1<'_, f64>,
) -> Result<Prediction> {
    if root_models.len() != ENSEMBLE_SIZE {
        return Err(Error::Config(format!(
            "root ensemble needs {ENSEMBLE_SIZE} models, got {}",
            root_models.len()
        )));
    }
    let mut right_votes = 0;
    for m in root_models {
        if m.score(x)? >= 0.5 {
            right_votes += 1;
        }
    }
    let (left, right) = tree.children();
    let next = if 2 * right_votes > ENSEMBLE_SIZE { right } else { left };
    let (label, evals) = tree.descend(next, x)?;
    Ok(Prediction {
        label,
        ledger: inference_cost(Strategy::DtRootEnsemble, tree.k())?.observed(ENSEMBLE_SIZE + evals),
    })
}

/// Most frequent leaf among the trees; with no repeated leaf the first tree wins.
pub fn plurality_first_wins(leaves: &[usize]) -> usize {
    let mut best = (leaves[0], 0);
    for &l in leaves {
        let c = leaves.iter().filter(|&&o| o == l).count();
        if c > best.1 {
            best = (l, c);
        }
    }
    best.0
}

pub fn predict_tree_ensemble<S: BinaryScorer>(trees: &[TrainedTree<S>], x: ArrayView1<'_, f64>) -> Result<Prediction> {
    if trees.len() != ENSEMBLE_SIZE {
        return Err(Error::Config(format!(
            "tree ensemble needs {ENSEMBLE_SIZE} trees, got {}",
            trees.len()
        )));
    }
    let classes = |t: &TrainedTree<S>| {
        let mut c = t.tree.classes().to_vec();
        c.sort_unstable();
        c
    };
    let reference = classes(&trees[0]);
    if let Some(i) = trees.iter().position(|t| classes(t) != reference) {
        return Err(Error::Config(format!("tree {i} covers a different class set")));
    }
    let mut leaves = Vec::with_capacity(ENSEMBLE_SIZE);
    let mut evals = 0;
    for t in trees {
        let (leaf, n) = t.descend(t.tree.root(), x)?;
        leaves.push(leaf);
        evals += n;
    }
    Ok(Prediction {
        label: plurality_first_wins(&leaves),
        ledger: inference_cost(Strategy::DtTreeEnsemble, reference.len())?.observed(evals),
    })
}
