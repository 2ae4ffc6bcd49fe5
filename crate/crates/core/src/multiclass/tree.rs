use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::task::BinaryTask;
use crate::error::{Error, Result};

/// How a node's class list is split between its branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PartitionPolicy {
    /// First `⌈n/2⌉` classes left, the rest right.
    Balanced,
    /// Shuffle the class list once with the seed, then split balanced.
    Random(u64),
}

impl fmt::Display for PartitionPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PartitionPolicy::Balanced => f.write_str("balanced"),
            PartitionPolicy::Random(seed) => write!(f, "random:{seed}"),
        }
    }
}

impl FromStr for PartitionPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("balanced") {
            return Ok(PartitionPolicy::Balanced);
        }
        s.strip_prefix("random:")
            .or_else(|| s.strip_prefix("random("))
            .map(|rest| rest.trim_end_matches(')'))
            .and_then(|seed| seed.parse().ok())
            .map(PartitionPolicy::Random)
            .ok_or_else(|| Error::Config(format!("unknown partition policy '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TreeNode {
    Internal {
        task: BinaryTask,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
    },
}

/// Binary hierarchy over the classes. Nodes are stored in pre-order with the
/// root at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTree {
    nodes: Vec<TreeNode>,
    classes: Vec<usize>,
    policy: PartitionPolicy,
}

pub fn tree_task_id(left: &[usize], right: &[usize]) -> String {
    let join = |cs: &[usize]| {
        let mut cs = cs.to_vec();
        cs.sort_unstable();
        cs.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
    };
    format!("dt-{}-{}", join(left), join(right))
}

pub fn ceil_log2(k: usize) -> usize {
    if k <= 1 {
        0
    } else {
        (usize::BITS - (k - 1).leading_zeros()) as usize
    }
}

/// Recursively splits `classes` until every leaf holds one class.
pub fn build_tree(classes: &[usize], policy: PartitionPolicy) -> Result<ClassTree> {
    if classes.len() < 2 {
        return Err(Error::Usage(format!(
            "a class tree needs at least 2 classes, got {}",
            classes.len()
        )));
    }
    let unique: BTreeSet<usize> = classes.iter().copied().collect();
    if unique.len() != classes.len() {
        return Err(Error::Usage(format!("duplicate classes in {classes:?}")));
    }
    let mut order = classes.to_vec();
    if let PartitionPolicy::Random(seed) = policy {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut nodes = Vec::with_capacity(2 * classes.len() - 1);
    grow(&order, &mut nodes)?;
    Ok(ClassTree {
        nodes,
        classes: classes.to_vec(),
        policy,
    })
}

fn grow(classes: &[usize], nodes: &mut Vec<TreeNode>) -> Result<usize> {
    let at = nodes.len();
    if let [single] = classes {
        nodes.push(TreeNode::Leaf { class: *single });
        return Ok(at);
    }
    let (left, right) = classes.split_at(classes.len().div_ceil(2));
    nodes.push(TreeNode::Leaf { class: usize::MAX });
    let task = BinaryTask::new(tree_task_id(left, right), left.iter().copied(), right.iter().copied())?;
    let l = grow(left, nodes)?;
    let r = grow(right, nodes)?;
    nodes[at] = TreeNode::Internal {
        task,
        left: l,
        right: r,
    };
    Ok(at)
}

impl ClassTree {
    pub fn root(&self) -> usize {
        0
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Classes in the order they were supplied.
    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn policy(&self) -> PartitionPolicy {
        self.policy
    }

    pub fn root_task(&self) -> &BinaryTask {
        match &self.nodes[0] {
            TreeNode::Internal { task, .. } => task,
            TreeNode::Leaf { .. } => unreachable!("trees have at least two classes"),
        }
    }

    /// Internal node tasks in pre-order.
    pub fn tasks(&self) -> Vec<&BinaryTask> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Internal { task, .. } => Some(task),
                TreeNode::Leaf { .. } => None,
            })
            .collect()
    }

    pub fn internal_count(&self) -> usize {
        self.tasks().len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.len() - self.internal_count()
    }

    /// Largest number of internal nodes on any root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Internal { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf labels below node `i`.
    pub fn subtree_classes(&self, i: usize) -> BTreeSet<usize> {
        match &self.nodes[i] {
            TreeNode::Leaf { class } => BTreeSet::from([*class]),
            TreeNode::Internal { left, right, .. } => {
                let mut s = self.subtree_classes(*left);
                s.extend(self.subtree_classes(*right));
                s
            }
        }
    }

    /// Checks the structural invariants: one leaf per class, `K − 1`
    /// internal nodes, and each task's sides equal to its subtrees' leaves.
    pub fn validate(&self) -> Result<()> {
        let k = self.classes.len();
        let leaves: BTreeSet<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                TreeNode::Leaf { class } => Some(*class),
                _ => None,
            })
            .collect();
        let expected: BTreeSet<usize> = self.classes.iter().copied().collect();
        if leaves != expected || self.leaf_count() != k {
            return Err(Error::Config(format!(
                "tree leaves {leaves:?} do not match classes {expected:?}"
            )));
        }
        if self.internal_count() != k - 1 {
            return Err(Error::Config(format!(
                "tree has {} internal nodes, expected {}",
                self.internal_count(),
                k - 1
            )));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let TreeNode::Internal { task, left, right } = n {
                if task.zero_classes != self.subtree_classes(*left) || task.one_classes != self.subtree_classes(*right)
                {
                    return Err(Error::Config(format!(
                        "node {i} task {} disagrees with its subtrees",
                        task.id
                    )));
                }
            }
        }
        Ok(())
    }
}
