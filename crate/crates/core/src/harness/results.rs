use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use super::experiment::ExperimentResult;
use crate::error::{Error, Result};

pub const RESULTS_CSV: &str = "results.csv";

#[derive(Debug, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct ResultRow {
    pub dataset: String,
    pub model_kind: String,
    pub strategy: String,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub batch: usize,
    pub seed: u64,
    pub macro_accuracy_pct: f64,
    pub models_total: usize,
    pub worst_case_evals: usize,
    pub mean_observed_evals: f64,
    pub wall_s: f64,
}

impl From<&ExperimentResult> for ResultRow {
    fn from(r: &ExperimentResult) -> Self {
        Self {
            dataset: r.dataset.clone(),
            model_kind: r.train.kind.to_string(),
            strategy: r.strategy.to_string(),
            k: r.k,
            m: r.train.hidden,
            batch: r.train.batch_size,
            seed: r.train.seed,
            macro_accuracy_pct: r.macro_accuracy_pct,
            models_total: r.ledger.models_total,
            worst_case_evals: r.ledger.worst_case_evals,
            mean_observed_evals: r.mean_observed_evals,
            wall_s: r.wall_s,
        }
    }
}

pub fn sidecar_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join("results").join(format!("{id}.json"))
}

/// The stored record of a previous run, if any.
pub fn existing_result(out_dir: &Path, id: &str) -> Result<Option<ExperimentResult>> {
    let path = sidecar_path(out_dir, id);
    if !path.is_file() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::parse(path.display().to_string(), e.column() as u64, e.to_string()))
}

/// Appends a CSV row (writing the header for a new file) and writes the
/// JSON sidecar with recalls and training curves.
pub fn record_result(out_dir: &Path, result: &ExperimentResult) -> Result<()> {
    let sidecar = sidecar_path(out_dir, &result.id);
    let dir = sidecar.parent().expect("sidecar has a parent");
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json = serde_json::to_string_pretty(result).map_err(|e| Error::Data(format!("cannot encode result: {e}")))?;
    std::fs::write(&sidecar, json).map_err(|e| Error::io(&sidecar, e))?;

    let csv_path = out_dir.join(RESULTS_CSV);
    let is_new = !csv_path.is_file();
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&csv_path)
        .map_err(|e| Error::io(&csv_path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(is_new).from_writer(file);
    w.serialize(ResultRow::from(result))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| Error::Data(format!("cannot write {}: {e}", csv_path.display())))
}

pub fn read_results(out_dir: &Path) -> Result<Vec<ResultRow>> {
    let path = out_dir.join(RESULTS_CSV);
    let mut r =
        csv::Reader::from_path(&path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()
        .map_err(|e| Error::Data(format!("bad row in {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TrainConfig;
    use crate::multiclass::{inference_cost, Strategy};
    use std::collections::BTreeMap;

    fn result(id: &str) -> ExperimentResult {
        ExperimentResult {
            id: id.into(),
            dataset: "mnist".into(),
            strategy: Strategy::Ovr,
            k: 3,
            policy: "balanced".into(),
            train: TrainConfig::default(),
            per_class_recall: vec![1.0, 0.5, 0.75],
            macro_accuracy_pct: 75.0,
            random_guess_pct: 100.0 / 3.0,
            ledger: inference_cost(Strategy::Ovr, 3).unwrap(),
            mean_observed_evals: 3.0,
            max_observed_evals: 3,
            wall_s: 1.5,
            histories: BTreeMap::new(),
            predictions: vec![],
        }
    }

    #[test]
    fn csv_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        assert!(existing_result(dir.path(), "a").unwrap().is_none());
        record_result(dir.path(), &result("a")).unwrap();
        record_result(dir.path(), &result("b")).unwrap();
        let rows = read_results(dir.path()).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].models_total, 3);
        assert_eq!(rows[1].macro_accuracy_pct, 75.0);
        let header = std::fs::read_to_string(dir.path().join(RESULTS_CSV)).unwrap();
        assert!(header.starts_with(
            "dataset,model_kind,strategy,K,M,batch,seed,macro_accuracy_pct,models_total,worst_case_evals,mean_observed_evals,wall_s\n"
        ));
        assert_eq!(existing_result(dir.path(), "a").unwrap().unwrap(), result("a"));
    }
}
