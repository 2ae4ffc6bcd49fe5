use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// A relabeling of the original classes into a binary problem.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct BinaryTask {
    /// Stable identifier; also the key of the trained model.
    pub id: String,
    /// Original classes mapped to label 0.
    pub zero_classes: BTreeSet<usize>,
    /// Original classes mapped to label 1.
    pub one_classes: BTreeSet<usize>,
}

impl BinaryTask {
    pub fn new(
        id: impl Into<String>,
        zero_classes: impl IntoIterator<Item = usize>,
        one_classes: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        let task = Self {
            id: id.into(),
            zero_classes: zero_classes.into_iter().collect(),
            one_classes: one_classes.into_iter().collect(),
        };
        if task.zero_classes.is_empty() || task.one_classes.is_empty() {
            return Err(Error::Usage(format!("task {} has an empty side", task.id)));
        }
        if let Some(c) = task.zero_classes.intersection(&task.one_classes).next() {
            return Err(Error::Usage(format!("task {} puts class {c} on both sides", task.id)));
        }
        Ok(task)
    }

    /// Binary label of an original class, or `None` when the task ignores it.
    pub fn label_of(&self, class: usize) -> Option<f64> {
        if self.zero_classes.contains(&class) {
            Some(0.0)
        } else if self.one_classes.contains(&class) {
            Some(1.0)
        } else {
            None
        }
    }

    /// Canonical text of the relabeling, e.g. `0.1v2`; independent of the id.
    pub fn signature(&self) -> String {
        let join = |s: &BTreeSet<usize>| s.iter().map(usize::to_string).collect::<Vec<_>>().join(".");
        format!("{}v{}", join(&self.zero_classes), join(&self.one_classes))
    }

    /// Classes seen by this task, either side.
    pub fn classes(&self) -> BTreeSet<usize> {
        self.zero_classes.union(&self.one_classes).copied().collect()
    }
}

impl fmt::Display for BinaryTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:?} vs {:?})", self.id, self.zero_classes, self.one_classes)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        Err(Error::Usage(format!("at least 2 classes are needed, got {k}")))
    } else {
        Ok(())
    }
}

pub fn ovo_key(a: usize, b: usize) -> String {
    format!("ovo-{a}-{b}")
}

pub fn ovr_key(k: usize) -> String {
    format!("ovr-{k}")
}

/// One task per pair `k < k'`, class `k` → 0 and `k'` → 1, in lexicographic order.
pub fn build_ovo_tasks(k: usize) -> Result<Vec<BinaryTask>> {
    check_k(k)?;
    let mut tasks = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            tasks.push(BinaryTask::new(ovo_key(a, b), [a], [b])?);
        }
    }
    Ok(tasks)
}

/// Task `k` maps class `k` → 1 and every other class → 0.
pub fn build_ovr_tasks(k: usize) -> Result<Vec<BinaryTask>> {
    check_k(k)?;
    (0..k)
        .map(|c| BinaryTask::new(ovr_key(c), (0..k).filter(|&o| o != c), [c]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ovo_two_classes() {
        let t = build_ovo_tasks(2).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].label_of(0), Some(0.0));
        assert_eq!(t[0].label_of(1), Some(1.0));
    }

    #[test]
    fn ovo_counts_and_order() {
        assert_eq!(build_ovo_tasks(6).unwrap().len(), 15);
        let pairs: Vec<(usize, usize)> = build_ovo_tasks(4)
            .unwrap()
            .iter()
            .map(|t| (*t.zero_classes.first().unwrap(), *t.one_classes.first().unwrap()))
            .collect();
        assert_eq!(pairs, vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn ovr_tasks() {
        let two = build_ovr_tasks(2).unwrap();
        assert_eq!(two[0].one_classes, BTreeSet::from([0]));
        assert_eq!(two[0].zero_classes, BTreeSet::from([1]));
        assert_eq!(two[1].one_classes, BTreeSet::from([1]));
        assert_eq!(two[1].zero_classes, BTreeSet::from([0]));
        assert_eq!(build_ovr_tasks(6).unwrap().len(), 6);
        let t1 = &build_ovr_tasks(3).unwrap()[1];
        assert_eq!(t1.zero_classes, BTreeSet::from([0, 2]));
        assert_eq!(t1.one_classes, BTreeSet::from([1]));
        assert_eq!(t1.label_of(3), None);
    }

    #[test]
    fn signatures() {
        assert_eq!(build_ovr_tasks(3).unwrap()[1].signature(), "0.2v1");
        assert_eq!(build_ovo_tasks(2).unwrap()[0].signature(), "0v1");
    }

    #[test]
    fn too_few_classes() {
        assert!(build_ovo_tasks(1).is_err());
        assert!(build_ovr_tasks(0).is_err());
    }

    #[test]
    fn invalid_tasks() {
        assert!(BinaryTask::new("x", [0, 1], [1]).is_err());
        assert!(BinaryTask::new("x", [], [1]).is_err());
    }
}
