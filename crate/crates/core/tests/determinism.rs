mod common;

use std::collections::BTreeSet;

use common::run_artifacts;
use flowpix::dataset::{
    make_balanced_subset, stratified_sample, synth_fixture, synth_fixture_sized, FixtureShape, Quota, SubsetPlan,
};
use flowpix::layout::{permute_layout, LayoutManifest};
use flowpix::pipeline::{train, ClassifierKind, PipelineConfig, Task};
use flowpix::schema::{infer_schema, SchemaOptions};
use proptest::prelude::*;

#[test]
fn worker_count_does_not_change_any_artifact() {
    let shape = FixtureShape::unsw_like().with_separation(1.5);
    let train_t = synth_fixture(1, 40, 5, &shape).unwrap();
    let test_t = synth_fixture(2, 20, 5, &shape).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let one = run_artifacts(&train_t, &test_t, &SchemaOptions::unsw(), 1, a.path());
    let eight = run_artifacts(&train_t, &test_t, &SchemaOptions::unsw(), 8, b.path());
    assert_eq!(one.index_csv, eight.index_csv);
    assert_eq!(one.png_bytes, eight.png_bytes);
    assert_eq!(one.model_digests, eight.model_digests);
    assert_eq!(one.reports, eight.reports);
}

#[test]
fn different_seeds_give_different_forests() {
    let t = synth_fixture(0, 40, 3, &FixtureShape::small().with_separation(1.0)).unwrap();
    let digest = |seed| {
        let mut c = PipelineConfig::new(ClassifierKind::Forest, Task::Multiclass).with_seed(seed);
        c.schema = SchemaOptions::new(["proto", "service"], "attack_cat");
        c.forest.n_trees = 5;
        train(&t, &c).unwrap().model.digest()
    };
    assert_eq!(digest(1), digest(1));
    assert_ne!(digest(1), digest(2));
}

#[test]
fn layout_permutation_is_a_seeded_bijection() {
    let t = synth_fixture(0, 5, 2, &FixtureShape::unsw_like()).unwrap();
    let schema = infer_schema(&t.records, &SchemaOptions::unsw()).unwrap();
    let base = LayoutManifest::for_schema(&schema).unwrap();
    let p = permute_layout(&base, 7);
    assert_eq!(p, permute_layout(&base, 7));
    assert_ne!(p, permute_layout(&base, 8));
    assert_eq!(p.pad_count(), base.pad_count());
    let names = |m: &LayoutManifest| m.column_names().into_iter().collect::<BTreeSet<_>>();
    assert_eq!(names(&p), names(&base));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn balanced_subset_is_disjoint_capped_and_stratified(seed in any::<u64>(), cap in 1usize..60) {
        let sizes = [90, 3, 1, 40, 70];
        let t = synth_fixture_sized(seed % 1000, &sizes, &FixtureShape::small()).unwrap();
        let s = make_balanced_subset(&t, &SubsetPlan::new(cap, 0.2, seed).unwrap()).unwrap();
        let ids = |tab: &flowpix::dataset::LabeledTable| {
            tab.records.iter().map(|r| r.record_id.clone()).collect::<BTreeSet<_>>()
        };
        let (tr, ho) = (ids(&s.train), ids(&s.holdout));
        prop_assert!(tr.is_disjoint(&ho));
        prop_assert_eq!(tr.len() + ho.len(), s.total());
        for (k, class) in t.class_names.iter().enumerate() {
            let kept = sizes[k].min(cap);
            let n_hold = s.holdout.class_counts().get(class);
            prop_assert_eq!(s.train.class_counts().get(class) + n_hold, kept);
            if kept >= 2 {
                let want = ((0.2 * kept as f64).round() as usize).clamp(1, kept - 1);
                prop_assert_eq!(n_hold, want);
            } else {
                prop_assert_eq!(n_hold, 0);
                prop_assert!(s.flagged.contains(class));
            }
        }
        let again = make_balanced_subset(&t, &SubsetPlan::new(cap, 0.2, seed).unwrap()).unwrap();
        prop_assert_eq!(again, s);
    }

    #[test]
    fn stratified_sample_meets_quota_without_repeats(seed in any::<u64>(), q in 1usize..50) {
        let t = synth_fixture_sized(3, &[60, 20, 5], &FixtureShape::small()).unwrap();
        let s = stratified_sample(&t, &Quota::PerClass(q), seed).unwrap();
        let ids: BTreeSet<_> = s.records.iter().map(|r| r.record_id.clone()).collect();
        prop_assert_eq!(ids.len(), s.len());
        for (class, n) in [("Normal", 60), ("Analysis", 20), ("Backdoor", 5)] {
            prop_assert_eq!(s.class_counts().get(class), q.min(n));
        }
    }
}
