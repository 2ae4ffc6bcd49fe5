use std::fmt;
use std::str::FromStr;

use super::tree::ceil_log2;
use crate::error::{Error, Result};

/// Number of root models (or trees) in the ensemble strategies.
pub const ENSEMBLE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum Strategy {
    #[serde(rename = "ovo")]
    Ovo,
    #[serde(rename = "ovr")]
    Ovr,
    #[serde(rename = "dt")]
    Dt,
    #[serde(rename = "dt-root-ensemble")]
    DtRootEnsemble,
    #[serde(rename = "dt-tree-ensemble")]
    DtTreeEnsemble,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Ovo,
        Strategy::Ovr,
        Strategy::Dt,
        Strategy::DtRootEnsemble,
        Strategy::DtTreeEnsemble,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Ovo => "ovo",
            Strategy::Ovr => "ovr",
            Strategy::Dt => "dt",
            Strategy::DtRootEnsemble => "dt-root-ensemble",
            Strategy::DtTreeEnsemble => "dt-tree-ensemble",
        }
    }

    pub fn is_tree(self) -> bool {
        matches!(self, Strategy::Dt | Strategy::DtRootEnsemble | Strategy::DtTreeEnsemble)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown strategy '{s}' (expected ovo, ovr, dt, dt-root-ensemble or dt-tree-ensemble)"
                ))
            })
    }
}

/// Model count and evaluation count for one multinomial predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CostLedger {
    pub strategy: Strategy,
    pub k: usize,
    pub models_total: usize,
    /// Binary evaluations needed per input in the worst case.
    pub worst_case_evals: usize,
    /// Evaluations actually performed; `None` for a static estimate.
    pub observed_evals: Option<usize>,
}

impl CostLedger {
    pub(crate) fn observed(mut self, evals: usize) -> Self {
        self.observed_evals = Some(evals);
        self
    }
}

impl fmt::Display for CostLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "strategy={} K={} models_total={} worst_case_evals={}",
            self.strategy, self.k, self.models_total, self.worst_case_evals
        )?;
        if let Some(o) = self.observed_evals {
            write!(f, " observed_evals={o}")?;
        }
        Ok(())
    }
}

/// Worst-case cost of a strategy at `k` classes.
///
/// Every partition policy splits balanced after an optional shuffle, so the
/// tree depth is `⌈log₂K⌉` regardless of policy.
pub fn inference_cost(strategy: Strategy, k: usize) -> Result<CostLedger> {
    if k < 2 {
        return Err(Error::Usage(format!("at least 2 classes are needed, got {k}")));
    }
    let depth = ceil_log2(k);
    let (models_total, worst_case_evals) = match strategy {
        Strategy::Ovo => (k * (k - 1) / 2, k * (k - 1) / 2),
        Strategy::Ovr => (k, k),
        Strategy::Dt => (k - 1, depth),
        Strategy::DtRootEnsemble => (k - 1 + ENSEMBLE_SIZE - 1, depth + ENSEMBLE_SIZE - 1),
        Strategy::DtTreeEnsemble => (ENSEMBLE_SIZE * (k - 1), ENSEMBLE_SIZE * depth),
    };
    Ok(CostLedger {
        strategy,
        k,
        models_total,
        worst_case_evals,
        observed_evals: None,
    })
}
