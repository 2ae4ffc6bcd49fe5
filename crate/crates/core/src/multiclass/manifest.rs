//! Text manifest listing the model files of one multinomial predictor.
//!
//! ```text
//! MULTIBIN-MANIFEST v1
//! strategy dt
//! k 6
//! policy balanced
//! seed 42
//! tree 0 balanced
//! status complete
//! model dt-0.1.2-3.4.5 models/dt-0.1.2-3.4.5.model
//! ```
//!
//! Relative model paths are resolved against the manifest's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::cost::Strategy;
use super::plan::TrainingPlan;
use super::tree::PartitionPolicy;
use crate::error::{Error, Result};

pub const MANIFEST_MAGIC: &str = "MULTIBIN-MANIFEST v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub strategy: Strategy,
    pub k: usize,
    pub policy: PartitionPolicy,
    pub seed: u64,
    pub tree_policies: Vec<PartitionPolicy>,
    pub complete: bool,
    pub models: BTreeMap<String, PathBuf>,
}

impl Manifest {
    pub fn for_plan(plan: &TrainingPlan, seed: u64) -> Self {
        Self {
            strategy: plan.strategy,
            k: plan.k,
            policy: plan.policy,
            seed,
            tree_policies: plan.tree_policies.clone(),
            complete: false,
            models: BTreeMap::new(),
        }
    }

    pub fn plan(&self) -> Result<TrainingPlan> {
        TrainingPlan::with_tree_policies(self.strategy, self.k, self.policy, self.tree_policies.clone())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MANIFEST_MAGIC}");
        let _ = writeln!(s, "strategy {}", self.strategy);
        let _ = writeln!(s, "k {}", self.k);
        let _ = writeln!(s, "policy {}", self.policy);
        let _ = writeln!(s, "seed {}", self.seed);
        for (i, p) in self.tree_policies.iter().enumerate() {
            let _ = writeln!(s, "tree {i} {p}");
        }
        let _ = writeln!(s, "status {}", if self.complete { "complete" } else { "incomplete" });
        for (key, path) in &self.models {
            let _ = writeln!(s, "model {key} {}", path.display());
        }
        s
    }

    /// Writes through a temporary file so a reader never sees a torn manifest.
    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.render()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn parse(text: &str, name: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim() == MANIFEST_MAGIC => {}
            _ => return Err(Error::parse(name, 1, format!("missing '{MANIFEST_MAGIC}' header"))),
        }
        let mut strategy = None;
        let mut k = None;
        let mut policy = None;
        let mut seed = None;
        let mut complete = None;
        let mut tree_policies = Vec::new();
        let mut models = BTreeMap::new();
        for (i, line) in lines {
            let line_no = i as u64 + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |m: String| Error::parse(name, line_no, m);
            let (field, rest) = line
                .split_once(' ')
                .ok_or_else(|| bad(format!("malformed line '{line}'")))?;
            let rest = rest.trim();
            match field {
                "strategy" => strategy = Some(rest.parse::<Strategy>().map_err(|e| bad(e.to_string()))?),
                "k" => k = Some(rest.parse::<usize>().map_err(|_| bad(format!("bad K '{rest}'")))?),
                "policy" => policy = Some(rest.parse::<PartitionPolicy>().map_err(|e| bad(e.to_string()))?),
                "seed" => seed = Some(rest.parse::<u64>().map_err(|_| bad(format!("bad seed '{rest}'")))?),
                "status" => {
                    complete = Some(match rest {
                        "complete" => true,
                        "incomplete" => false,
                        other => return Err(bad(format!("unknown status '{other}'"))),
                    })
                }
                "tree" => {
                    let (idx, p) = rest
                        .split_once(' ')
                        .ok_or_else(|| bad("tree line needs an index and a policy".into()))?;
                    if idx.parse::<usize>().ok() != Some(tree_policies.len()) {
                        return Err(bad(format!("tree index {idx} out of order")));
                    }
                    tree_policies.push(p.parse::<PartitionPolicy>().map_err(|e| bad(e.to_string()))?);
                }
                "model" => {
                    let (key, path) = rest
                        .split_once(' ')
                        .ok_or_else(|| bad("model line needs a key and a path".into()))?;
                    if models.insert(key.to_string(), PathBuf::from(path.trim())).is_some() {
                        return Err(bad(format!("duplicate model key '{key}'")));
                    }
                }
                other => return Err(bad(format!("unknown field '{other}'"))),
            }
        }
        let need = |what: &str| Error::parse(name, 0, format!("manifest has no {what} line"));
        Ok(Self {
            strategy: strategy.ok_or_else(|| need("strategy"))?,
            k: k.ok_or_else(|| need("k"))?,
            policy: policy.ok_or_else(|| need("policy"))?,
            seed: seed.ok_or_else(|| need("seed"))?,
            tree_policies,
            complete: complete.ok_or_else(|| need("status"))?,
            models,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Model paths with relative entries resolved against `base`.
    pub fn resolved_models(&self, base: &Path) -> BTreeMap<String, PathBuf> {
        self.models
            .iter()
            .map(|(k, p)| (k.clone(), if p.is_absolute() { p.clone() } else { base.join(p) }))
            .collect()
    }

    /// Checks the manifest is marked complete, lists exactly the plan's
    /// models, and every file exists.
    pub fn validate(&self, base: &Path) -> Result<TrainingPlan> {
        if !self.complete {
            return Err(Error::Config("manifest is marked incomplete; rerun training".into()));
        }
        let plan = self.plan()?;
        let missing: Vec<&str> = plan.keys().filter(|k| !self.models.contains_key(*k)).collect();
        if !missing.is_empty() {
            return Err(Error::Config(format!("manifest lacks models: {}", missing.join(", "))));
        }
        let expected: std::collections::BTreeSet<&str> = plan.keys().collect();
        if let Some(extra) = self.models.keys().find(|k| !expected.contains(k.as_str())) {
            return Err(Error::Config(format!("manifest lists unexpected model '{extra}'")));
        }
        for (key, path) in self.resolved_models(base) {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "model file for {key} not found at {}",
                    path.display()
                )));
            }
        }
        Ok(plan)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(strategy: Strategy) -> (Manifest, TrainingPlan) {
        let plan = TrainingPlan::new(strategy, 4, PartitionPolicy::Balanced, 9).unwrap();
        let mut m = Manifest::for_plan(&plan, 9);
        for key in plan.keys() {
            m.models
                .insert(key.to_string(), PathBuf::from(format!("models/{key}.model")));
        }
        m.complete = true;
        (m, plan)
    }

    #[test]
    fn text_round_trip() {
        for s in Strategy::ALL {
            let (m, plan) = sample(s);
            let back = Manifest::parse(&m.render(), "mem").unwrap();
            assert_eq!(back, m);
            assert_eq!(back.plan().unwrap(), plan);
        }
    }

    #[test]
    fn validate_checks_files_and_status() {
        let dir = tempfile::tempdir().unwrap();
        let (mut m, _) = sample(Strategy::Dt);
        assert!(m.validate(dir.path()).unwrap_err().to_string().contains("not found"));
        std::fs::create_dir_all(dir.path().join("models")).unwrap();
        for p in m.resolved_models(dir.path()).values() {
            std::fs::write(p, b"x").unwrap();
        }
        let plan = m.validate(dir.path()).unwrap();
        assert_eq!(plan.entries.len(), 3);
        m.models.remove("dt-0-1");
        assert!(m.validate(dir.path()).unwrap_err().to_string().contains("dt-0-1"));
        m.complete = false;
        assert!(m.validate(dir.path()).unwrap_err().to_string().contains("incomplete"));
    }

    #[test]
    fn malformed_manifests() {
        assert!(Manifest::parse("hello\n", "m").is_err());
        let (m, _) = sample(Strategy::Ovo);
        let text = m.render().replace("status complete", "status maybe");
        assert!(matches!(Manifest::parse(&text, "m"), Err(Error::Parse { .. })));
        let text = m.render().replace("k 4\n", "");
        assert!(Manifest::parse(&text, "m")
            .unwrap_err()
            .to_string()
            .contains("no k line"));
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run/manifest.txt");
        let (m, _) = sample(Strategy::DtTreeEnsemble);
        m.write(&path).unwrap();
        assert_eq!(Manifest::read(&path).unwrap(), m);
    }
}
