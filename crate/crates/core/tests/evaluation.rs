mod common;

use patchblur::eval::{cross_validate, make_folds, roc_auc};
use patchblur::gbdt::TrainParams;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

#[test]
fn auc_matches_pair_oracle_exactly() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let n = rng.random_range(2..80);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        // Coarse scores force plenty of ties.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..12u8)) / 11.0).collect();
        assert_eq!(roc_auc(&scores, &labels).unwrap(), common::auc_pairs(&scores, &labels));
    }
}

#[test]
fn separable_blobs_cross_validate_cleanly() {
    let (rows, labels) = common::blob_fixture(100, 9);
    let plan = make_folds(&labels, 5, 5, 1).unwrap();
    let report = cross_validate(&rows, &labels, "blobs", &TrainParams::default(), &plan).unwrap();
    assert_eq!(report.per_run.len(), 25);
    assert!(report.accuracy.mean >= 0.99, "{}", report.accuracy.mean);
    let again = cross_validate(&rows, &labels, "blobs", &TrainParams::default(), &plan).unwrap();
    assert_eq!(report, again);
    for r in &report.per_run {
        for m in [r.accuracy, r.auc, r.f1_blur, r.f1_sharp] {
            assert!((0.0..=1.0).contains(&m));
        }
    }
    let order: Vec<(usize, usize)> = report.per_run.iter().map(|r| (r.shuffle, r.fold)).collect();
    let mut sorted = order.clone();
    sorted.sort();
    assert_eq!(order, sorted);
    assert!(report.to_table().contains(" ± "));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folds_partition_and_stratify(labels in prop::collection::vec(0u8..2, 10..200), k in 2usize..7, seed: u64) {
        let pos = labels.iter().filter(|&&l| l == 1).count();
        let neg = labels.len() - pos;
        prop_assume!(pos >= k && neg >= k);
        let plan = make_folds(&labels, 3, k, seed).unwrap();
        for s in 0..3 {
            let mut seen = vec![0usize; labels.len()];
            for f in 0..k {
                let (train, valid) = plan.split(s, f);
                prop_assert_eq!(train.len() + valid.len(), labels.len());
                for &i in &valid {
                    seen[i] += 1;
                }
                for (class, total) in [(0u8, neg), (1u8, pos)] {
                    let c = valid.iter().filter(|&&i| labels[i] == class).count() as f64;
                    prop_assert!((c - total as f64 / k as f64).abs() <= 1.0);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn auc_complements_and_is_rank_based(
        raw in prop::collection::vec((-1e3f64..1e3, 0u8..2), 2..60)
    ) {
        let (scores, labels): (Vec<f64>, Vec<u8>) = raw.into_iter().unzip();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[0] < w[1]));
        let auc = roc_auc(&scores, &labels).unwrap();
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((auc + roc_auc(&neg, &labels).unwrap() - 1.0).abs() < 1e-12);
        let squashed: Vec<f64> = scores.iter().map(|s| (s / 100.0).tanh() * 3.0 + 1.0).collect();
        let mut sq_sorted = squashed.clone();
        sq_sorted.sort_by(f64::total_cmp);
        prop_assume!(sq_sorted.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(auc, roc_auc(&squashed, &labels).unwrap());
    }
}
