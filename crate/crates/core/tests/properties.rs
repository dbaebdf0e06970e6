use proptest::prelude::*;

use pfr::dataset::{
    drop_columns, min_max_scale, one_hot_encode, oversample_minority, split, ColumnData, ColumnSchema,
    EncodedMatrix, TabularDataset,
};
use pfr::metrics::{auc_roc, disparate_impact_average, disparate_impact_binary, tau_default};
use pfr::model::{
    log_likelihood_gradient, most_important_feature, penalized_log_likelihood, train_logistic,
    train_logistic_with_summary, LogisticModel, Solver, TrainConfig,
};
use pfr::pfr::{pfr_run, recheck, PfrConfig, SensitiveLabels};

fn brute_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Scores drawn from a small grid so ties are common, labels with both classes.
fn scored_labels(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_n)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..20).prop_map(|k| f64::from(k) / 19.0), n),
                prop::collection::vec(0u8..=1, n),
            )
        })
        .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
}

fn matrix(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), n)
}

fn ids(d: usize) -> Vec<String> {
    (0..d).map(|j| format!("x{j}")).collect()
}

fn encoded(rows: &[Vec<f64>]) -> EncodedMatrix {
    let names = ids(rows[0].len());
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    EncodedMatrix::from_rows(&names, rows).unwrap()
}

/// Rows and labels for a learnable problem with label noise.
fn problem(max_n: usize, max_d: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<u8>)> {
    (8..=max_n, 1..=max_d)
        .prop_flat_map(|(n, d)| (matrix(n, d), prop::collection::vec(0u8..=1, n)))
        .prop_filter("both classes", |(_, y)| y.iter().filter(|&&v| v == 1).count() >= 2 && y.iter().filter(|&&v| v == 0).count() >= 2)
}

proptest! {
    #[test]
    fn auc_matches_pair_counting((scores, labels) in scored_labels(200)) {
        let auc = auc_roc(&scores, &labels).unwrap();
        prop_assert!((auc - brute_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_invariant_under_increasing_transform((scores, labels) in scored_labels(120)) {
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auc_roc(&scores, &labels).unwrap(), auc_roc(&transformed, &labels).unwrap());
    }

    #[test]
    fn auc_of_flipped_labels_is_complement((scores, labels) in scored_labels(120)) {
        let flipped: Vec<u8> = labels.iter().map(|&y| 1 - y).collect();
        let sum = auc_roc(&scores, &labels).unwrap() + auc_roc(&scores, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn tau_default_is_the_majority_share(values in prop::collection::vec(0u8..=1, 1..300)) {
        let tau = tau_default(&values);
        prop_assert!((0.5..=1.0).contains(&tau));
        let ones = values.iter().filter(|&&v| v == 1).count();
        prop_assert_eq!(tau == 0.5, 2 * ones == values.len());
    }

    #[test]
    fn independent_predictions_give_unit_di(
        block in prop::collection::vec(0u8..=1, 1..20),
        copies_priv in 1usize..5,
        copies_unpriv in 1usize..5,
    ) {
        // every group sees the same prediction block, so rates match exactly
        prop_assume!(block.contains(&1));
        let mut pred = Vec::new();
        let mut groups = Vec::new();
        for _ in 0..copies_priv {
            pred.extend_from_slice(&block);
            groups.extend(std::iter::repeat_n(1u32, block.len()));
        }
        for _ in 0..copies_unpriv {
            pred.extend_from_slice(&block);
            groups.extend(std::iter::repeat_n(0u32, block.len()));
        }
        prop_assert!((disparate_impact_binary(&pred, &groups, 1).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn average_di_with_singletons_equals_binary(
        pred in prop::collection::vec(0u8..=1, 4..60),
        groups in prop::collection::vec(0u32..=1, 4..60),
    ) {
        let n = pred.len().min(groups.len());
        let (pred, groups) = (&pred[..n], &groups[..n]);
        prop_assume!(groups.contains(&0) && groups.contains(&1));
        let b = disparate_impact_binary(pred, groups, 1).unwrap();
        let a = disparate_impact_average(pred, groups, &[1], &[0]).unwrap();
        prop_assert!(a == b || (a.is_nan() && b.is_nan()));
    }

    #[test]
    fn gradient_matches_finite_differences(
        (rows, labels) in problem(50, 10),
        seed in any::<u64>(),
    ) {
        let m = encoded(&rows);
        let d = m.n_cols();
        let mut state = seed;
        let mut draw = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 4.0 - 2.0
        };
        let weights: Vec<f64> = (0..d).map(|_| draw()).collect();
        let intercept = draw();
        let l2 = 1e-4;
        let model = LogisticModel::new(ids(d), weights.clone(), intercept).unwrap();
        let analytic = log_likelihood_gradient(&model, &m, &labels, l2).unwrap();

        let h = 1e-5;
        let f = |w: &[f64], b: f64| {
            penalized_log_likelihood(&LogisticModel::new(ids(d), w.to_vec(), b).unwrap(), &m, &labels, l2).unwrap()
        };
        let mut numeric = Vec::with_capacity(d + 1);
        for j in 0..d {
            let mut up = weights.clone();
            let mut down = weights.clone();
            up[j] += h;
            down[j] -= h;
            numeric.push((f(&up, intercept) - f(&down, intercept)) / (2.0 * h));
        }
        numeric.push((f(&weights, intercept + h) - f(&weights, intercept - h)) / (2.0 * h));

        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        prop_assert!(diff / scale < 1e-5, "relative error {}", diff / scale);
    }

    #[test]
    fn training_is_bitwise_deterministic((rows, labels) in problem(60, 6)) {
        let m = encoded(&rows);
        let cfg = TrainConfig::default();
        let a = train_logistic(&m, &labels, &cfg).unwrap();
        let b = train_logistic(&m, &labels, &cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn objective_never_decreases(
        (rows, labels) in problem(60, 6),
        gradient in any::<bool>(),
    ) {
        let m = encoded(&rows);
        let cfg = TrainConfig {
            solver: if gradient { Solver::GradientAscent } else { Solver::Newton },
            max_iterations: 300,
            ..TrainConfig::default()
        };
        let (_, summary) = train_logistic_with_summary(&m, &labels, &cfg, None).unwrap();
        for w in summary.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{} then {}", w[0], w[1]);
        }
    }

    #[test]
    fn permuting_columns_permutes_weights(
        (rows, labels) in problem(60, 6),
        rotate in 0usize..6,
    ) {
        let m = encoded(&rows);
        let d = m.n_cols();
        let perm: Vec<usize> = (0..d).map(|j| (j + rotate) % d).collect();
        let permuted_rows: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let names: Vec<String> = perm.iter().map(|&j| format!("x{j}")).collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let pm = EncodedMatrix::from_rows(&names, &permuted_rows).unwrap();

        let cfg = TrainConfig::default();
        let a = train_logistic(&m, &labels, &cfg).unwrap();
        let b = train_logistic(&pm, &labels, &cfg).unwrap();
        for (k, &j) in perm.iter().enumerate() {
            prop_assert!((a.weights()[j] - b.weights()[k]).abs() < 1e-6);
        }
        prop_assert!((a.intercept() - b.intercept()).abs() < 1e-6);
    }

    #[test]
    fn importance_ignores_positive_scaling(
        weights in prop::collection::vec(-5.0f64..5.0, 1..12),
        c in 1e-3f64..1e3,
    ) {
        let d = weights.len();
        let scaled: Vec<f64> = weights.iter().map(|w| w * c).collect();
        let a = LogisticModel::new(ids(d), weights, 0.3).unwrap();
        let b = LogisticModel::new(ids(d), scaled, 0.3 * c).unwrap();
        prop_assert_eq!(most_important_feature(&a).unwrap(), most_important_feature(&b).unwrap());
    }

    #[test]
    fn disjoint_drops_commute(rows in matrix(5, 8), mask in prop::collection::vec(0u8..3, 8)) {
        let m = encoded(&rows);
        let first: Vec<String> = (0..8).filter(|&j| mask[j] == 1).map(|j| format!("x{j}")).collect();
        let second: Vec<String> = (0..8).filter(|&j| mask[j] == 2).map(|j| format!("x{j}")).collect();
        let ab = drop_columns(&drop_columns(&m, &first).unwrap(), &second).unwrap();
        let ba = drop_columns(&drop_columns(&m, &second).unwrap(), &first).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn scaled_fit_data_lies_in_unit_interval(
        rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 4), 1..40),
        extra in prop::collection::vec(-2e6f64..2e6, 4),
    ) {
        let scaled = min_max_scale(&encoded(&rows)).unwrap();
        prop_assert!(scaled.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let params = scaled.scaling().unwrap();
        for (p, &x) in params.iter().zip(&extra) {
            prop_assert!(p.apply(x).is_finite());
        }
    }

    #[test]
    fn oversampling_only_duplicates_rows(
        (rows, labels) in problem(40, 3),
        seed in any::<u64>(),
    ) {
        let m = encoded(&rows);
        let (om, ol) = oversample_minority(&m, &labels, seed).unwrap();
        let ones = ol.iter().filter(|&&y| y == 1).count();
        prop_assert_eq!(2 * ones, ol.len());
        let original: Vec<&[f64]> = (0..m.n_rows()).map(|i| m.row(i)).collect();
        for i in 0..om.n_rows() {
            prop_assert!(original.contains(&om.row(i)));
        }
        for r in &original {
            prop_assert!((0..om.n_rows()).any(|i| om.row(i) == *r));
        }
        let again = oversample_minority(&m, &labels, seed).unwrap();
        prop_assert_eq!((om, ol), again);
    }

    #[test]
    fn split_is_a_pure_function_of_seed((rows, labels) in problem(60, 2), seed in any::<u64>()) {
        let m = encoded(&rows);
        let (a, b) = split(&m, &labels, 0.7, seed).unwrap();
        let (c, d) = split(&m, &labels, 0.7, seed).unwrap();
        prop_assert_eq!(&a.rows, &c.rows);
        prop_assert_eq!(&b.rows, &d.rows);
        let mut all: Vec<usize> = a.rows.iter().chain(&b.rows).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..m.n_rows()).collect::<Vec<_>>());
    }

    #[test]
    fn one_hot_sets_exactly_one_indicator(
        cells in prop::collection::vec((0u32..4, 0u32..3, -10.0f64..10.0), 2..30),
    ) {
        let n = cells.len();
        let schema = vec![
            ColumnSchema::categorical("a", ["p", "q", "r", "s"]),
            ColumnSchema::categorical("b", ["u", "v", "w"]),
            ColumnSchema::numeric("x"),
        ];
        let columns = vec![
            ColumnData::Categorical(cells.iter().map(|c| c.0).collect()),
            ColumnData::Categorical(cells.iter().map(|c| c.1).collect()),
            ColumnData::Numeric(cells.iter().map(|c| c.2).collect()),
        ];
        let target: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let ds = TabularDataset::new(schema, columns, target, vec![]).unwrap();
        let m = one_hot_encode(&ds);
        for i in 0..n {
            for attr in ["a", "b"] {
                let hot = m
                    .columns()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.source_attribute == attr && c.source_category.is_some())
                    .filter(|&(j, _)| m.get(i, j) == 1.0)
                    .count();
                prop_assert_eq!(hot, 1);
            }
        }
    }
}

/// Two noisy proxies of different strength plus pure noise columns.
fn proxy_problem(n: usize, seed: u64) -> (EncodedMatrix, Vec<u8>) {
    let mut state = seed | 1;
    let mut unif = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut rows = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        let v = u8::from(unif() < 0.35);
        let strong = f64::from(v ^ u8::from(unif() < 0.1));
        let weak = (0.3 * f64::from(v) + 0.7 * unif()).min(1.0);
        rows.push(vec![strong, weak, unif(), unif()]);
        s.push(v);
    }
    let m = EncodedMatrix::from_rows(&["strong", "weak", "n1", "n2"], &rows).unwrap();
    (min_max_scale(&m).unwrap(), s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // tau stays above the in-sample AUC that pure noise columns reach, where
    // a reseeded retrain can land beyond the slack
    #[test]
    fn loop_trace_replays_and_holds(seed in any::<u64>(), tau in 0.6f64..0.9) {
        let (m, s) = proxy_problem(1000, seed);
        let labels = SensitiveLabels::binary("s", &s);
        let cfg = PfrConfig { seed, ..PfrConfig::default() };
        match pfr_run(&m, &labels, tau, &cfg) {
            Ok((residual, trace)) => {
                prop_assert!(trace.steps.len() < m.n_cols());
                prop_assert!(trace.final_auc <= tau);
                prop_assert_eq!(&trace.replay(&m).unwrap(), &residual);
                for step in &trace.steps {
                    prop_assert!(step.auc_before > tau);
                }
                let again = pfr_run(&m, &labels, tau, &cfg).unwrap();
                prop_assert_eq!(&again.1, &trace);
                if residual.n_cols() > 0 {
                    let audit = recheck(&residual, std::slice::from_ref(&labels), &cfg).unwrap();
                    prop_assert!(audit["s"] <= tau + cfg.auc_slack, "recheck {} tau {}", audit["s"], tau);
                }
            }
            Err(pfr::PfrError::ExhaustedFeatures { trace: Some(t), .. }) => {
                prop_assert!(t.truncated);
                prop_assert_eq!(t.steps.len(), m.n_cols() - 1);
            }
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn higher_tau_removes_a_prefix(seed in any::<u64>(), lo in 0.55f64..0.75, gap in 0.01f64..0.2) {
        let (m, s) = proxy_problem(400, seed);
        let labels = SensitiveLabels::binary("s", &s);
        let cfg = PfrConfig { seed, ..PfrConfig::default() };
        let removed = |tau: f64| match pfr_run(&m, &labels, tau, &cfg) {
            Ok((_, t)) => t.removed_ids().into_iter().map(String::from).collect::<Vec<_>>(),
            Err(pfr::PfrError::ExhaustedFeatures { trace: Some(t), .. }) => {
                t.removed_ids().into_iter().map(String::from).collect()
            }
            Err(e) => panic!("{e}"),
        };
        let strict = removed(lo);
        let loose = removed((lo + gap).min(1.0));
        prop_assert!(loose.len() <= strict.len());
        prop_assert_eq!(&strict[..loose.len()], &loose[..]);
    }
}
