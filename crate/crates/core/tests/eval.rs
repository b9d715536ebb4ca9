use chrono::NaiveDate;
use ndarray::{Array2, Array3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nocturne::eval::report::{cells_csv, parse_summary_csv, summary_csv, text_table, TableMetric};
use nocturne::eval::{
    auroc, chronological_split, f1_at_threshold, run_experiment, run_transfer, stratified_kfold,
    EvalError, ExperimentConfig, Scorer, TransferConfig,
};
use nocturne::features::DesignMatrix;
use nocturne::models::{ModelKind, NetConfig, TrainConfig, TransferPlan};
use nocturne::DesignMatrix64;

/// Pairwise count of concordant positive/negative pairs, ties counting half.
fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..scores.len() {
        for j in 0..scores.len() {
            if labels[i] && !labels[j] {
                den += 1.0;
                if scores[i] > scores[j] {
                    num += 1.0;
                } else if scores[i] == scores[j] {
                    num += 0.5;
                }
            }
        }
    }
    num / den
}

fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
    (2usize..=100).prop_flat_map(|n| {
        (
            prop::collection::vec((0u8..6).prop_map(|v| v as f64 / 5.0), n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, y)| {
                y.iter().any(|&b| b) && y.iter().any(|&b| !b)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auroc_matches_pairwise((scores, labels) in scored_labels()) {
        let a = auroc(&scores, &labels).unwrap();
        prop_assert!((a - brute_auroc(&scores, &labels)).abs() <= 1e-12);
        let transformed: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auroc(&transformed, &labels).unwrap(), a);
    }
}

proptest! {
    #[test]
    fn f1_identity(scores in prop::collection::vec(0.0f64..1.0, 1..60), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let labels: Vec<bool> = scores.iter().map(|_| rng.gen()).collect();
        let m = f1_at_threshold(&scores, &labels, 0.5);
        prop_assert_eq!(m.tp + m.fp + m.tn + m.fn_, scores.len());
        let den = m.precision + m.recall;
        let expect = if den > 0.0 { 2.0 * m.precision * m.recall / den } else { 0.0 };
        prop_assert!((m.f1 - expect).abs() < 1e-15);
        prop_assert!((0.0..=1.0).contains(&m.f1));
    }

    #[test]
    fn kfold_partitions_and_stratifies(n_pos in 5usize..40, n_neg in 5usize..80, seed in any::<u64>()) {
        let mut y = vec![true; n_pos];
        y.extend(vec![false; n_neg]);
        let folds = stratified_kfold(&y, 5, seed).unwrap();
        let mut seen = vec![0usize; y.len()];
        for f in &folds {
            for &i in &f.test_indices {
                seen[i] += 1;
            }
            prop_assert_eq!(f.train_indices.len() + f.test_indices.len(), y.len());
            let pos = f.test_indices.iter().filter(|&&i| y[i]).count() as f64;
            prop_assert!((pos - n_pos as f64 / 5.0).abs() < 1.0);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        prop_assert_eq!(stratified_kfold(&y, 5, seed).unwrap(), folds);
    }
}

#[test]
fn eleven_and_forty_nine() {
    let y: Vec<bool> = (0..60).map(|i| i < 11).collect();
    let folds = stratified_kfold(&y, 5, 9).unwrap();
    let pos: Vec<usize> = folds
        .iter()
        .map(|f| f.test_indices.iter().filter(|&&i| y[i]).count())
        .collect();
    assert!(pos.iter().all(|&p| p == 2 || p == 3), "{pos:?}");
    assert_eq!(pos.iter().sum::<usize>(), 11);
    let sizes: Vec<usize> = folds.iter().map(|f| f.test_indices.len()).collect();
    assert_eq!(sizes, vec![12; 5]);
}

/// Two temporal channels and three statics; positives get a shifted first
/// static column so models have something to find.
fn toy_matrix(n: usize, n_pos: usize, seed: u64) -> DesignMatrix64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y: Vec<bool> = (0..n).map(|i| i < n_pos).collect();
    let xt = Array3::from_shape_fn((n, 48, 2), |_| rng.gen_range(-1.0..1.0));
    let xs = Array2::from_shape_fn((n, 3), |(r, j)| {
        let shift = if j == 0 && y[r] { 1.5 } else { 0.0 };
        shift + rng.gen_range(-1.0..1.0)
    });
    let date = NaiveDate::from_ymd_opt(2021, 7, 5).unwrap();
    DesignMatrix {
        x_temporal: xt,
        x_static: xs,
        static_defined: Array2::from_elem((n, 3), true),
        y,
        night_keys: (0..n)
            .map(|i| {
                (
                    format!("P{:03}", i % 8 + 1),
                    date + chrono::Days::new(i as u64 / 8),
                )
            })
            .collect(),
        temporal_names: vec!["glucose".into(), "heart_rate".into()],
        static_names: vec!["a".into(), "b".into(), "c".into()],
    }
}

fn fast_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.forest.n_trees = 40;
    cfg.net = NetConfig {
        hidden: 4,
        dense: 4,
        conv_filters: 4,
        ..NetConfig::default()
    };
    cfg.train = TrainConfig {
        max_epochs: 4,
        patience: 2,
        ..TrainConfig::default()
    };
    cfg
}

#[test]
fn diagnostic_scorers() {
    let dm = toy_matrix(60, 12, 1);
    let cfg = fast_config();
    let c = run_experiment(&dm, "toy", Scorer::Constant, &cfg).unwrap();
    assert_eq!((c.mean_auroc, c.std_auroc), (0.5, 0.0));
    assert_eq!(c.cells.len(), 15);
    let o = run_experiment(&dm, "toy", Scorer::LabelOracle, &cfg).unwrap();
    assert_eq!((o.mean_auroc, o.std_auroc), (1.0, 0.0));
    assert_eq!((o.mean_f1, o.std_f1), (1.0, 0.0));
}

#[test]
fn summary_recomputes_from_cells() {
    let dm = toy_matrix(60, 12, 2);
    let r = run_experiment(&dm, "toy", Scorer::Model(ModelKind::Rfc), &fast_config()).unwrap();
    let a: Vec<f64> = r.cells.iter().map(|c| c.report.auroc).collect();
    let m = a.iter().sum::<f64>() / a.len() as f64;
    let s = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    assert!((r.mean_auroc - m).abs() <= 1e-12 && (r.std_auroc - s).abs() <= 1e-12);
    assert!(
        r.mean_auroc > 0.7,
        "forest should find the shifted column: {}",
        r.mean_auroc
    );
    assert!(r
        .cells
        .iter()
        .all(|c| c.n_synthetic_test == 0 && c.n_synthetic_train > 0));
}

#[test]
fn every_model_kind_runs_and_is_deterministic() {
    let dm = toy_matrix(40, 10, 3);
    let mut cfg = fast_config();
    cfg.seeds = vec![5];
    for kind in ModelKind::ALL {
        let a = run_experiment(&dm, "toy", Scorer::Model(kind), &cfg).unwrap();
        let b = run_experiment(&dm, "toy", Scorer::Model(kind), &cfg).unwrap();
        assert_eq!(a, b, "{kind}");
        assert_eq!(a.cells.len(), 5);
    }
}

#[test]
fn leaky_balance_reaches_test_folds() {
    let dm = toy_matrix(60, 12, 4);
    let mut cfg = fast_config();
    cfg.leaky_balance = true;
    let r = run_experiment(&dm, "toy", Scorer::Constant, &cfg).unwrap();
    assert!(r.cells.iter().map(|c| c.n_synthetic_test).sum::<usize>() > 0);
}

#[test]
fn group_mode_keeps_patients_apart() {
    let dm = toy_matrix(64, 16, 5);
    let mut cfg = fast_config();
    cfg.group_by_patient = true;
    cfg.k_folds = 4;
    let r = run_experiment(&dm, "toy", Scorer::Model(ModelKind::Rfc), &cfg).unwrap();
    assert!(r.cells.iter().all(|c| c.n_test == 16));
}

#[test]
fn stratification_error_names_the_cell_context() {
    let dm = toy_matrix(30, 3, 6);
    let err = run_experiment(&dm, "toy", Scorer::Constant, &fast_config()).unwrap_err();
    assert_eq!(
        err,
        EvalError::StratificationImpossible {
            positive: true,
            count: 3,
            k: 5
        }
    );
}

#[test]
fn reports_round_trip() {
    let dm = toy_matrix(60, 12, 7);
    let cfg = fast_config();
    let results: Vec<_> = [Scorer::Constant, Scorer::LabelOracle]
        .into_iter()
        .map(|s| run_experiment(&dm, "toy", s, &cfg).unwrap())
        .collect();
    let csv = cells_csv(&results);
    assert!(csv.starts_with("model,feature_set,seed,fold,auroc,f1,"));
    assert_eq!(csv.lines().count(), 1 + 30);
    let rows = parse_summary_csv(&summary_csv(&results)).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].mean_auroc, 1.0);
    let table = text_table(&rows, TableMetric::Auroc);
    assert!(
        table.contains("0.50 ± 0.00") && table.contains("1.00 ± 0.00"),
        "{table}"
    );
}

#[test]
fn chronological_split_per_patient() {
    let dm = toy_matrix(40, 8, 8);
    let (train, val) = chronological_split(&dm, 0.8);
    assert_eq!(train.len(), 32);
    for &v in &val {
        let (p, d) = &dm.night_keys[v];
        assert!(train
            .iter()
            .all(|&t| dm.night_keys[t].0 != *p || dm.night_keys[t].1 < *d));
    }
}

#[test]
fn transfer_keeps_backbone_frozen() {
    let source = toy_matrix(48, 16, 9);
    let target = toy_matrix(40, 10, 10);
    let mut exp = fast_config();
    exp.seeds = vec![1, 2];
    let cfg = TransferConfig {
        pretrain_net: NetConfig {
            hidden: 4,
            ..NetConfig::default()
        },
        pretrain_train: TrainConfig {
            max_epochs: 3,
            patience: 2,
            ..TrainConfig::default()
        },
        plan: TransferPlan {
            head_features: vec!["glucose".into(), "heart_rate".into()],
            branch_units: 3,
            head_dense: 4,
            ..TransferPlan::default()
        },
        compare_scratch: true,
        ..TransferConfig::default()
    };
    let r = run_transfer(&source, None, &target, "toy", &cfg, &exp).unwrap();
    assert_eq!(r.transfer.cells.len(), 10);
    assert_eq!(r.frozen.len(), 10);
    assert!(r.frozen_intact());
    assert_ne!(r.pretrain[0].frozen_checksum, r.pretrain[1].frozen_checksum);
    assert_eq!(r.scratch.as_ref().unwrap().cells.len(), 10);
}
