mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use multibin::data::{batches, parse_idx_images, parse_idx_labels, preprocess, RawDataset, Split};
use multibin::model::{OptimizerState, ParamSlot, QuantumShallowModel, SgdConfig};
use multibin::multiclass::{
    build_tree, ceil_log2, plurality_first_wins, predict_ovo, predict_ovr, predict_tree, ClassTree, PartitionPolicy,
    TrainedTree, TreeNode,
};
use multibin::synthetic::{idx_images_bytes, idx_labels_bytes};
use ndarray::{array, Array1, Array2};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NO_INPUT: [f64; 1] = [0.0];

fn x0() -> ndarray::ArrayView1<'static, f64> {
    ndarray::ArrayView1::from(&NO_INPUT)
}

fn policy_strategy() -> impl Strategy<Value = PartitionPolicy> {
    prop_oneof![
        Just(PartitionPolicy::Balanced),
        any::<u64>().prop_map(PartitionPolicy::Random)
    ]
}

fn tree_scores(tree: &ClassTree, values: &[f64]) -> BTreeMap<String, f64> {
    tree.tasks()
        .iter()
        .zip(values)
        .map(|(t, &s)| (t.id.clone(), s))
        .collect()
}

/// Scores on a 0.25 grid so exact 0.5 boundaries and exact ties show up.
fn coarse_score() -> impl Strategy<Value = f64> {
    prop_oneof![(0u8..=4).prop_map(|q| f64::from(q) / 4.0), 0.0..=1.0]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn ovo_matches_tally(k in 2usize..=6, raw in prop::collection::vec(coarse_score(), 15)) {
        let mut scores = BTreeMap::new();
        let mut it = raw.iter();
        for a in 0..k {
            for b in a + 1..k {
                scores.insert((a, b), *it.next().unwrap());
            }
        }
        let p = predict_ovo(&scores, k, x0()).unwrap();
        prop_assert_eq!(p.label, common::ovo_tally(k, &scores));
        prop_assert_eq!(p.ledger.observed_evals, Some(k * (k - 1) / 2));
    }

    #[test]
    fn tree_structure(k in 2usize..=16, policy in policy_strategy()) {
        let classes: Vec<usize> = (0..k).collect();
        let tree = build_tree(&classes, policy).unwrap();
        prop_assert_eq!(tree.leaf_count(), k);
        prop_assert_eq!(tree.internal_count(), k - 1);
        prop_assert_eq!(tree.depth(), ceil_log2(k));
        let leaves: BTreeSet<usize> = tree
            .nodes()
            .iter()
            .filter_map(|n| match n { TreeNode::Leaf { class } => Some(*class), _ => None })
            .collect();
        prop_assert_eq!(leaves, classes.iter().copied().collect::<BTreeSet<_>>());
        for (i, node) in tree.nodes().iter().enumerate() {
            if let TreeNode::Internal { task, left, right } = node {
                prop_assert_eq!(&task.zero_classes, &tree.subtree_classes(*left));
                prop_assert_eq!(&task.one_classes, &tree.subtree_classes(*right));
                let mut union = task.zero_classes.clone();
                union.extend(&task.one_classes);
                prop_assert_eq!(union, tree.subtree_classes(i));
            }
        }
        prop_assert_eq!(build_tree(&classes, policy).unwrap(), tree);
    }

    #[test]
    fn tree_routing_matches_consistency_oracle(
        k in 2usize..=10,
        policy in policy_strategy(),
        raw in prop::collection::vec(coarse_score(), 9),
    ) {
        let classes: Vec<usize> = (0..k).collect();
        let tree = build_tree(&classes, policy).unwrap();
        let scores = tree_scores(&tree, &raw);
        let trained = TrainedTree::new(tree.clone(), scores.clone()).unwrap();
        let p = predict_tree(&trained, x0()).unwrap();
        let (label, evals) = common::route_by_consistency(&tree, &scores);
        prop_assert_eq!(p.label, label);
        prop_assert_eq!(p.ledger.observed_evals, Some(evals));
        prop_assert!(evals <= ceil_log2(k));
    }

    #[test]
    fn raising_off_path_scores_changes_nothing(
        k in 3usize..=10,
        raw in prop::collection::vec(0.0f64..1.0, 9),
        bumps in prop::collection::vec(0.0f64..1.0, 9),
    ) {
        let classes: Vec<usize> = (0..k).collect();
        let tree = build_tree(&classes, PartitionPolicy::Balanced).unwrap();
        let scores = tree_scores(&tree, &raw);
        let before = predict_tree(&TrainedTree::new(tree.clone(), scores.clone()).unwrap(), x0()).unwrap().label;
        let raised: BTreeMap<String, f64> = tree
            .tasks()
            .iter()
            .zip(&bumps)
            .map(|(t, &b)| {
                let s = scores[&t.id];
                let on_path = t.classes().contains(&before);
                (t.id.clone(), if on_path { s } else { s + b * (1.0 - s) })
            })
            .collect();
        let after = predict_tree(&TrainedTree::new(tree, raised).unwrap(), x0()).unwrap().label;
        prop_assert_eq!(before, after);
    }

    #[test]
    fn ovr_relabeling(scores in prop::collection::vec(coarse_score(), 2..=10), seed in any::<u64>()) {
        let k = scores.len();
        let mut perm: Vec<usize> = (0..k).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(seed));
        let models: BTreeMap<usize, f64> = scores.iter().copied().enumerate().collect();
        let moved: BTreeMap<usize, f64> = scores.iter().enumerate().map(|(i, &s)| (perm[i], s)).collect();
        let p = predict_ovr(&models, k, x0()).unwrap();
        prop_assert_eq!(p.label, common::ovr_scan(&scores));
        let top = scores.iter().copied().fold(f64::MIN, f64::max);
        let expected = (0..k).filter(|&i| scores[i] == top).map(|i| perm[i]).min().unwrap();
        prop_assert_eq!(predict_ovr(&moved, k, x0()).unwrap().label, expected);
    }

    #[test]
    fn plurality_matches_oracle(a in 0usize..4, b in 0usize..4, c in 0usize..4) {
        prop_assert_eq!(plurality_first_wins(&[a, b, c]), common::plurality_oracle([a, b, c]));
    }
}

fn raw_model() -> impl Strategy<Value = (Array2<f64>, Array1<f64>, f64, bool)> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(m, n)| {
        (
            prop::collection::vec(prop_oneof![-5.0f64..5.0, Just(0.0), -1e-14f64..1e-14], m * n)
                .prop_map(move |v| Array2::from_shape_vec((m, n), v).unwrap()),
            prop::collection::vec(prop_oneof![-3.0f64..3.0, Just(0.0)], m).prop_map(Array1::from),
            -3.0f64..3.0,
            any::<bool>(),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn projection_is_idempotent((w, p, b, relaxed) in raw_model(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut once = QuantumShallowModel::from_raw(w, p, b, relaxed).unwrap();
        once.project_constraints(&mut rng);
        once.validate().unwrap();
        let mut twice = once.clone();
        prop_assert_eq!(twice.project_constraints(&mut rng), 0);
        for (a, b) in once.hidden_weights.iter().zip(twice.hidden_weights.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for (a, b) in once.output_weights.iter().zip(twice.output_weights.iter()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert_eq!(once.bias, twice.bias);
    }

    #[test]
    fn forward_stays_in_unit_interval(seed in any::<u64>(), bias in -20.0f64..20.0, scale in 1e-3f64..1e3) {
        let (mut model, x, _) = common::random_instance(seed, false);
        model.bias = bias;
        let s = model.forward(x.view()).unwrap();
        prop_assert!(s > 0.0 && s < 1.0, "{}", s);
        let wide = x.mapv(|v| v * scale);
        let s = model.forward(wide.view()).unwrap();
        prop_assert!((0.0..=1.0).contains(&s), "{}", s);
    }

    #[test]
    fn relaxed_output_is_scaled_mixture(seed in any::<u64>(), scale in 0.01f64..20.0) {
        let (mut model, x, _) = common::random_instance(seed, true);
        model.output_weights.mapv_inplace(|q| q * scale);
        let c = model.l1_constant();
        let normalized = model.output_weights.mapv(|q| q / c);
        let act = model.hidden_activations(x.view()).unwrap();
        let expected = c * normalized.dot(&act) + model.bias;
        let got = model.pre_activation(x.view()).unwrap();
        prop_assert!((got - expected).abs() <= 1e-12 * expected.abs().max(1.0));
    }

    #[test]
    fn step_then_project_keeps_constraints(seed in any::<u64>(), lr in 1e-3f64..10.0, relaxed in any::<bool>()) {
        let (mut model, x, y) = common::random_instance(seed, relaxed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let (m, n) = model.hidden_weights.dim();
        let config = SgdConfig { learning_rate: lr, ..SgdConfig::default() };
        let mut opt = OptimizerState::new(config, &[m * n, m, 1]).unwrap();
        let xs = x.insert_axis(ndarray::Axis(0));
        for _ in 0..5 {
            let g = model.gradient(xs.view(), &[y]).unwrap();
            let hidden_grad = g.hidden_weights.as_standard_layout().into_owned();
            let bias_grad = [g.bias];
            let mut bias = [model.bias];
            opt.step(&mut [
                ParamSlot::new(model.hidden_weights.as_slice_mut().unwrap(), hidden_grad.as_slice().unwrap(), true),
                ParamSlot::new(model.output_weights.as_slice_mut().unwrap(), g.output_weights.as_slice().unwrap(), true),
                ParamSlot::new(&mut bias, &bias_grad, false),
            ]).unwrap();
            model.bias = bias[0];
            model.project_constraints(&mut rng);
            for row in model.hidden_weights.rows() {
                prop_assert!((row.dot(&row).sqrt() - 1.0).abs() <= 1e-6);
            }
            prop_assert!(model.output_weights.iter().all(|&p| p >= 0.0));
            if !relaxed {
                prop_assert!((model.l1_constant() - 1.0).abs() <= 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>(), relaxed in any::<bool>()) {
        let (model, x, y) = common::random_instance(seed, relaxed);
        let gap = common::worst_gradient_gap(&model, &x, y, 1e-5, 1e-3);
        prop_assert!(gap <= 1e-4, "relative gap {}", gap);
    }

    #[test]
    fn preprocessed_rows_are_unit_norm(
        count in 1usize..12,
        channels in prop_oneof![Just(1usize), Just(3usize)],
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let len = count * 4 * 4 * channels;
        let px: Vec<u8> = (0..len).map(|_| rand::Rng::random(&mut rng)).collect();
        let labels: Vec<u8> = (0..count).map(|i| (i % 10) as u8).collect();
        let train = RawDataset::new(px.clone(), labels.clone(), 4, 4, channels, Split::Train).unwrap();
        let test = RawDataset::new(px.iter().rev().copied().collect(), labels, 4, 4, channels, Split::Test).unwrap();
        let (tr, te, _) = preprocess(&train, &test).unwrap();
        prop_assert!(Arc::ptr_eq(&tr.stats, &te.stats));
        for row in tr.features.rows().into_iter().chain(te.features.rows()) {
            prop_assert!((row.dot(&row).sqrt() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn idx_round_trip(count in 0usize..20, rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let px: Vec<u8> = (0..count * rows * cols).map(|_| rand::Rng::random(&mut rng)).collect();
        let labels: Vec<u8> = (0..count).map(|_| rand::Rng::random_range(&mut rng, 0..10)).collect();
        let (c, r, w, back) = parse_idx_images(&idx_images_bytes(&px, count, rows, cols), "x").unwrap();
        prop_assert_eq!((c, r, w), (count, rows, cols));
        prop_assert_eq!(back, px);
        prop_assert_eq!(parse_idx_labels(&idx_labels_bytes(&labels), "y").unwrap(), labels);
    }

    #[test]
    fn batches_cover_every_index(n in 1usize..300, bs in 1usize..64, seed in any::<u64>(), epoch in 0u64..5) {
        let mut all: Vec<usize> = batches(n, bs, seed, epoch).concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn scalar_hidden_row_normalizes_to_sign() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let m = QuantumShallowModel::init(&mut rng, 1, 1, false).unwrap();
    assert_eq!(m.hidden_weights[[0, 0]].abs(), 1.0);
    assert_eq!(m.output_weights, array![1.0]);
}
