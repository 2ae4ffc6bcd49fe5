//! Reference implementations used by the property and acceptance suites.
//! Each is written independently of the library's predictors.
#![allow(dead_code)]

use std::collections::BTreeMap;

use multibin::model::{bce_loss, sigmoid, QuantumShallowModel};
use multibin::multiclass::ClassTree;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counts the votes of every pair and scans for the first maximum.
pub fn ovo_tally(k: usize, scores: &BTreeMap<(usize, usize), f64>) -> usize {
    let mut votes = vec![0usize; k];
    for (&(a, b), &s) in scores {
        votes[if s < 0.5 { a } else { b }] += 1;
    }
    let top = *votes.iter().max().unwrap();
    votes.iter().position(|&v| v == top).unwrap()
}

pub fn ovr_scan(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// The class that every task containing it routes towards itself, and how
/// many tasks contain it. Does not walk the tree.
pub fn route_by_consistency(tree: &ClassTree, scores: &BTreeMap<String, f64>) -> (usize, usize) {
    let tasks = tree.tasks();
    let consistent: Vec<(usize, usize)> = tree
        .classes()
        .iter()
        .filter_map(|&c| {
            let mut touched = 0;
            for t in &tasks {
                let s = scores[&t.id];
                if t.zero_classes.contains(&c) {
                    if s >= 0.5 {
                        return None;
                    }
                    touched += 1;
                } else if t.one_classes.contains(&c) {
                    if s < 0.5 {
                        return None;
                    }
                    touched += 1;
                }
            }
            Some((c, touched))
        })
        .collect();
    assert_eq!(consistent.len(), 1, "exactly one class survives every split");
    consistent[0]
}

pub fn plurality_oracle(leaves: [usize; 3]) -> usize {
    let count = |x: usize| leaves.iter().filter(|&&l| l == x).count();
    leaves.into_iter().find(|&l| count(l) >= 2).unwrap_or(leaves[0])
}

/// Random feasible model plus a unit-norm sample and a label.
pub fn random_instance(seed: u64, relaxed: bool) -> (QuantumShallowModel, Array1<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=8);
    let n = rng.random_range(1..=12);
    let mut model = QuantumShallowModel::init(&mut rng, m, n, relaxed).unwrap();
    model.output_weights = Array1::from_shape_fn(m, |_| rng.random_range(0.05..1.0));
    model.bias = rng.random_range(-2.0..2.0);
    model.project_constraints(&mut rng);
    let mut x: Array1<f64> = Array1::from_shape_fn(n, |_| rng.random_range(-1.0..1.0));
    let norm = x.dot(&x).sqrt();
    x.mapv_inplace(|v| v / norm);
    let y = f64::from(rng.random_range(0..2u8));
    (model, x, y)
}

fn loss_at(model: &QuantumShallowModel, x: &Array1<f64>, y: f64) -> f64 {
    let act = model.hidden_weights.dot(x).mapv(|z| z * z);
    bce_loss(sigmoid(model.output_weights.dot(&act) + model.bias), y)
}

/// Largest relative gap between the analytic gradient and central
/// differences with step `h`, over every parameter. Entries below `floor`
/// in magnitude are compared against `floor`.
pub fn worst_gradient_gap(model: &QuantumShallowModel, x: &Array1<f64>, y: f64, h: f64, floor: f64) -> f64 {
    let xs = x.clone().insert_axis(ndarray::Axis(0));
    let g = model.gradient(xs.view(), &[y]).unwrap();
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(floor);
    let mut worst: f64 = 0.0;
    let (m, n) = model.hidden_weights.dim();
    let probe = |f: &dyn Fn(&mut QuantumShallowModel, f64)| {
        let mut plus = model.clone();
        f(&mut plus, h);
        let mut minus = model.clone();
        f(&mut minus, -h);
        (loss_at(&plus, x, y) - loss_at(&minus, x, y)) / (2.0 * h)
    };
    for i in 0..m {
        for j in 0..n {
            let fd = probe(&|q, d| q.hidden_weights[[i, j]] += d);
            worst = worst.max(rel(g.hidden_weights[[i, j]], fd));
        }
        let fd = probe(&|q, d| q.output_weights[i] += d);
        worst = worst.max(rel(g.output_weights[i], fd));
    }
    worst.max(rel(g.bias, probe(&|q, d| q.bias += d)))
}

pub fn score_grid(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((rows, cols), |_| rng.random::<f64>())
}
