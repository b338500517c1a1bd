use oaprog::labeling::ProgressionClass;
use oaprog::select::{conventional_decision, knee_passes, ml_prob_select, selection_report, ConventionalInputs, ConventionalOutcome, KneeInputs};
use proptest::prelude::*;

fn probs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..150usize).prop_flat_map(|n| {
        // coarse grid so that ties are common
        let p = proptest::collection::vec((0..20u32).prop_map(|v| f64::from(v) / 20.0), n);
        (p.clone(), p)
    })
}

proptest! {
    #[test]
    fn ml_p_hits_the_target((pp, ps) in probs(), frac in 0.0..1.0f64) {
        let n = pp.len();
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:04}")).collect();
        let target = (frac * n as f64) as usize;
        let mask = ml_prob_select(&pp, &ps, &ids, target).unwrap();
        prop_assert_eq!(mask.iter().filter(|&&m| m).count(), target);
    }

    #[test]
    fn ml_p_is_permutation_invariant((pp, ps) in probs(), frac in 0.0..1.0f64, rot in 0..150usize) {
        let n = pp.len();
        let ids: Vec<String> = (0..n).map(|i| format!("id{i:04}")).collect();
        let target = (frac * n as f64) as usize;
        let base = ml_prob_select(&pp, &ps, &ids, target).unwrap();
        let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
        let pp2: Vec<f64> = perm.iter().map(|&i| pp[i]).collect();
        let ps2: Vec<f64> = perm.iter().map(|&i| ps[i]).collect();
        let ids2: Vec<String> = perm.iter().map(|&i| ids[i].clone()).collect();
        let m2 = ml_prob_select(&pp2, &ps2, &ids2, target).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            prop_assert_eq!(m2[j], base[i]);
        }
    }

    #[test]
    fn report_shares_and_recalls(mask in proptest::collection::vec(any::<bool>(), 1..100), seed in 0..4usize) {
        let truth: Vec<ProgressionClass> = (0..mask.len()).map(|i| ProgressionClass::from_index((i + seed) % 4)).collect();
        let r = selection_report(&mask, &truth).unwrap();
        prop_assert_eq!(r.selected, mask.iter().filter(|&&m| m).count());
        if r.selected > 0 {
            prop_assert!((r.per_class.iter().map(|c| c.share).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        prop_assert!(r.per_class.iter().all(|c| (0.0..=1.0).contains(&c.recall)));
        prop_assert!((0.0..=1.0).contains(&r.progressive_recall));
    }

    #[test]
    fn missing_age_never_selects(stiff in proptest::option::of(0.0..60.0f64), pain in proptest::option::of(0.0..100.0f64)) {
        let knee = KneeInputs { knee_pain: Some(true), crepitus: Some(true), osteophytes: Some(true), kl_grade: Some(2), womac_pain: pain };
        let inputs = ConventionalInputs { age: None, stiffness_minutes: stiff, knees: [knee, knee] };
        prop_assert_eq!(knee_passes(None, stiff, &knee), None);
        prop_assert_eq!(conventional_decision(&inputs), ConventionalOutcome::Unevaluable);
    }
}
