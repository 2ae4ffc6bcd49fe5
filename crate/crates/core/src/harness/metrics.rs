use crate::error::{Error, Result};

/// Recall of each class `0..k`. Every class must occur in `labels`.
pub fn per_class_recall(predictions: &[usize], labels: &[usize], k: usize) -> Result<Vec<f64>> {
    if predictions.len() != labels.len() {
        return Err(Error::Shape {
            context: "predictions vs labels",
            expected: labels.len(),
            actual: predictions.len(),
        });
    }
    let mut hits = vec![0usize; k];
    let mut totals = vec![0usize; k];
    for (&p, &y) in predictions.iter().zip(labels) {
        if y >= k {
            return Err(Error::Usage(format!("label {y} outside 0..{k}")));
        }
        totals[y] += 1;
        hits[y] += usize::from(p == y);
    }
    if let Some(c) = totals.iter().position(|&t| t == 0) {
        return Err(Error::Usage(format!(
            "class {c} has no samples; macro accuracy is undefined"
        )));
    }
    Ok(hits.iter().zip(&totals).map(|(&h, &t)| h as f64 / t as f64).collect())
}

/// Mean of per-class recalls, in percent.
pub fn macro_accuracy(predictions: &[usize], labels: &[usize], k: usize) -> Result<f64> {
    let recall = per_class_recall(predictions, labels, k)?;
    Ok(100.0 * recall.iter().sum::<f64>() / k as f64)
}

/// Expected macro accuracy of a uniform random guess.
pub fn random_guess_pct(k: usize) -> f64 {
    100.0 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_correct() {
        assert_eq!(macro_accuracy(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap(), 100.0);
    }

    #[test]
    fn imbalance_does_not_matter() {
        let labels = [0, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let preds = [0; 10];
        assert_eq!(macro_accuracy(&preds, &labels, 2).unwrap(), 50.0);
    }

    #[test]
    fn confusion_table() {
        // class 0: 3 of 4 right, class 1: 1 of 2, class 2: 0 of 1
        let labels = [0, 0, 0, 0, 1, 1, 2];
        let preds = [0, 0, 1, 0, 1, 0, 1];
        let r = per_class_recall(&preds, &labels, 3).unwrap();
        assert_eq!(r, vec![0.75, 0.5, 0.0]);
        let m = macro_accuracy(&preds, &labels, 3).unwrap();
        assert!((m - 125.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn absent_class_is_an_error() {
        assert!(matches!(macro_accuracy(&[0, 0], &[0, 0], 2), Err(Error::Usage(m)) if m.contains("class 1")));
        assert!(macro_accuracy(&[0], &[0, 1], 2).is_err());
    }

    #[test]
    fn random_predictor_hits_one_over_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in [2, 4, 7, 10] {
            let labels: Vec<usize> = (0..10_000).map(|i| i % k).collect();
            let preds: Vec<usize> = (0..10_000).map(|_| rng.random_range(0..k)).collect();
            let m = macro_accuracy(&preds, &labels, k).unwrap();
            assert!((m - random_guess_pct(k)).abs() <= 2.0, "K={k}: {m}");
        }
    }

    #[test]
    fn random_row() {
        let row: Vec<String> = (2..=10).map(|k| format!("{:.1}", random_guess_pct(k))).collect();
        assert_eq!(
            row,
            ["50.0", "33.3", "25.0", "20.0", "16.7", "14.3", "12.5", "11.1", "10.0"]
        );
    }
}
