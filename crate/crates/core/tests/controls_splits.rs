use std::collections::BTreeSet;

use proptest::prelude::*;
use qprobe::baselines::{fit_dummy, predict_dummy};
use qprobe::runner::{derive_seed, evaluate, make_splits};
use qprobe::selectivity::{
    control_permutation, label_variants, make_controls, mean_selectivity, selectivity_cls, selectivity_reg,
    SelectivityScore,
};
use qprobe::TaskKind;

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

proptest! {
    #[test]
    fn controls_are_permutations_of_the_real_labels(
        labels in proptest::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..1.0f64], 1..80),
        seeds in proptest::collection::btree_set(any::<u64>(), 1..5),
    ) {
        let seeds: Vec<u64> = seeds.into_iter().collect();
        let controls = make_controls(&labels, &seeds).unwrap();
        prop_assert_eq!(controls.len(), seeds.len());
        for (c, &seed) in controls.iter().zip(&seeds) {
            prop_assert_eq!(sorted(&c.labels), sorted(&labels));
            let perm = control_permutation(labels.len(), seed);
            prop_assert_eq!(perm.iter().copied().collect::<BTreeSet<_>>().len(), labels.len());
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(c.labels[i], labels[p]);
            }
            prop_assert_eq!(c.control_seed, Some(seed));
        }
        let variants = label_variants(&labels, &seeds).unwrap();
        prop_assert_eq!(&variants[0].labels, &labels);
        prop_assert_eq!(variants[0].name(), "real");
    }

    #[test]
    fn splits_partition_the_index_range(n in 3usize..400, seed in any::<u64>(), stratify in any::<bool>()) {
        let labels: Vec<f64> = (0..n).map(|i| f64::from((i * 7 % 3 == 0) as u8)).collect();
        let s = make_splits(n, seed, stratify.then_some(labels.as_slice())).unwrap();
        prop_assert_eq!(s.train.len(), n * 70 / 100);
        prop_assert_eq!(s.val.len(), n * 15 / 100);
        prop_assert_eq!(s.len(), n);
        let all: BTreeSet<usize> = s.all().copied().collect();
        prop_assert_eq!(all, (0..n).collect::<BTreeSet<_>>());
        prop_assert_eq!(make_splits(n, seed, stratify.then_some(labels.as_slice())).unwrap(), s);
    }

    #[test]
    fn stratified_splits_keep_class_shares(n in 40usize..400, seed in any::<u64>()) {
        let labels: Vec<f64> = (0..n).map(|i| f64::from((i % 4 == 0) as u8)).collect();
        let s = make_splits(n, seed, Some(&labels)).unwrap();
        let share = |idx: &[usize]| idx.iter().filter(|&&i| labels[i] == 1.0).count() as f64 / idx.len() as f64;
        let overall = share(&(0..n).collect::<Vec<_>>());
        for part in [&s.train, &s.val, &s.test] {
            // interleaving by rank keeps each split within one item of the overall share
            prop_assert!((share(part) - overall).abs() <= 1.0 / part.len() as f64 + 1e-12);
        }
    }

    #[test]
    fn selectivity_signs(real in 50.0..100.0f64, ctrl in 1.0..50.0f64) {
        prop_assert!(selectivity_cls(real, ctrl).unwrap() > 0.0);
        prop_assert!(selectivity_reg(ctrl / 100.0, real / 100.0).unwrap() > 0.0);
        let s = SelectivityScore::compute(TaskKind::Classification, real, &[ctrl, ctrl]).unwrap();
        prop_assert!((s.mean - selectivity_cls(real, ctrl).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn hundred_items_split_70_15_15() {
    let s = make_splits(100, 42, None).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (70, 15, 15));
    assert_ne!(make_splits(100, 43, None).unwrap().train, s.train);
}

#[test]
fn derived_seeds_are_stable_and_key_dependent() {
    assert_eq!(derive_seed(42, "a"), derive_seed(42, "a"));
    assert_ne!(derive_seed(42, "a"), derive_seed(42, "b"));
    assert_ne!(derive_seed(42, "a"), derive_seed(43, "a"));
}

#[test]
fn dummy_on_balanced_labels_scores_fifty() {
    let train: Vec<f64> = (0..100).map(|i| f64::from((i % 2) as u8)).collect();
    let test: Vec<f64> = (0..30).map(|i| f64::from((i % 2) as u8)).collect();
    let model = fit_dummy(&train, TaskKind::Classification).unwrap();
    assert_eq!(evaluate(&predict_dummy(&model, test.len()), &test, TaskKind::Classification).unwrap(), 50.0);
}

#[test]
fn undefined_selectivity_is_an_error() {
    assert!(selectivity_cls(90.0, 0.0).is_err());
    assert!(selectivity_reg(0.1, 0.0).is_err());
    assert!(mean_selectivity(&[]).is_err());
    assert!(make_controls(&[1.0, 0.0], &[11, 11]).is_err());
    assert!(make_controls(&[], &[11]).is_err());
}
