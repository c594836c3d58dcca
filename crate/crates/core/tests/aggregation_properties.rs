use hurst_core::aggregation::{
    arithmetic_aggregate, hyperparam_search, mlp_train, weighted_mean, weighted_median, Activation,
    ArithmeticKind, SearchRanges, TrainConfig, WeightedCandidates,
};
use hurst_core::estimators::Method;
use hurst_core::harness::{build_training_matrix, ExperimentConfig};
use proptest::prelude::*;

fn candidates() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..30).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..2.0, n),
            prop::collection::vec(1e-3f64..1e3, n),
        )
    })
}

fn ids(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (3, 4 + i)).collect()
}

proptest! {
    #[test]
    fn weights_sum_to_one((h, w) in candidates()) {
        let c = WeightedCandidates::new(h.clone(), w, ids(h.len())).unwrap();
        let total: f64 = c.weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(c.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn aggregates_stay_within_candidates((h, w) in candidates()) {
        let c = WeightedCandidates::new(h.clone(), w, ids(h.len())).unwrap();
        let lo = h.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in [weighted_mean(&c), weighted_median(&c)] {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }

    #[test]
    fn equal_weights_give_arithmetic_aggregates(h in prop::collection::vec(-1.0f64..2.0, 1..30)) {
        let c = WeightedCandidates::uniform(h.clone()).unwrap();
        let mean = arithmetic_aggregate(&h, ArithmeticKind::Mean).unwrap();
        let median = arithmetic_aggregate(&h, ArithmeticKind::Median).unwrap();
        prop_assert!((weighted_mean(&c) - mean).abs() <= 1e-12);
        prop_assert!((weighted_median(&c) - median).abs() <= 1e-12);
    }

    #[test]
    fn order_of_candidates_is_irrelevant((h, w) in candidates(), rot in 0usize..30) {
        let n = h.len();
        let id = ids(n);
        let k = rot % n;
        let rotate = |v: &[f64]| { let mut v = v.to_vec(); v.rotate_left(k); v };
        let mut id2 = id.clone();
        id2.rotate_left(k);
        let a = WeightedCandidates::new(h.clone(), w.clone(), id).unwrap();
        let b = WeightedCandidates::new(rotate(&h), rotate(&w), id2).unwrap();
        prop_assert_eq!(weighted_median(&a), weighted_median(&b));
        prop_assert!((weighted_mean(&a) - weighted_mean(&b)).abs() <= 1e-12);
    }
}

#[test]
fn search_beats_hand_picked_baselines() {
    let config = ExperimentConfig {
        noise_grid: vec![0.0],
        replicates: 50,
        base_seed: 41,
        ..ExperimentConfig::default()
    };
    let data = build_training_matrix(&config, 0, Method::Alphee, None).unwrap();
    assert_eq!(data.features.dim(), (400, 78));

    let base = TrainConfig {
        seed: 17,
        ..TrainConfig::default()
    };
    let baselines = [
        (vec![32, 32], Activation::Relu, 1e-3, 32, 1e-5),
        (vec![64, 64, 64], Activation::Tanh, 3e-3, 64, 1e-6),
        (vec![128, 16], Activation::LeakyRelu, 1e-2, 16, 1e-4),
    ];
    let best_baseline = baselines
        .into_iter()
        .map(|(hidden, act, lr, batch, wd)| {
            let c = TrainConfig {
                hidden_layers: hidden,
                activation: act,
                learning_rate: lr,
                batch_size: batch,
                weight_decay: wd,
                ..base.clone()
            };
            mlp_train(data.features.view(), &data.targets, &c)
                .unwrap()
                .1
                .mean_cv_mse
        })
        .fold(f64::INFINITY, f64::min);

    let out = hyperparam_search(
        data.features.view(),
        &data.targets,
        20,
        3,
        &base,
        &SearchRanges::default(),
    )
    .unwrap();
    assert!(
        out.report.mean_cv_mse <= best_baseline,
        "search {} vs baseline {best_baseline}",
        out.report.mean_cv_mse
    );
}
