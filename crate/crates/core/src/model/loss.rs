/// Scores are clamped to `[BCE_EPS, 1 - BCE_EPS]` before taking logarithms.
pub const BCE_EPS: f64 = 1e-12;

/// Numerically stable logistic function.
pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy `-[y ln s + (1 - y) ln(1 - s)]`.
pub fn bce_loss(score: f64, label: f64) -> f64 {
    let s = score.clamp(BCE_EPS, 1.0 - BCE_EPS);
    -(label * s.ln() + (1.0 - label) * (1.0 - s).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn coin_flip_costs_ln2() {
        assert_abs_diff_eq!(bce_loss(0.5, 1.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(0.5, 0.0), std::f64::consts::LN_2, epsilon = 1e-15);
    }

    #[test]
    fn confident_mistake() {
        assert_abs_diff_eq!(bce_loss(0.9, 0.0), 2.302_585_092_994_045_5, epsilon = 1e-12);
    }

    #[test]
    fn perfect_prediction_limit() {
        assert!(bce_loss(1.0 - 1e-9, 1.0) < 1e-8);
        assert!(bce_loss(1e-9, 0.0) < 1e-8);
        // exact hits are clamped rather than producing ln(0)
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert!(bce_loss(1.0, 0.0).is_finite());
    }

    #[test]
    fn sigmoid_is_symmetric_and_bounded() {
        for t in [-800.0, -30.0, -1.0, 0.0, 1.0, 30.0, 800.0] {
            let s = sigmoid(t);
            assert!((0.0..=1.0).contains(&s));
            assert_abs_diff_eq!(s + sigmoid(-t), 1.0, epsilon = 1e-15);
        }
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
