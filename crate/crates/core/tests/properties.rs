mod common;

use mas_core::distance::d_as;
use mas_core::exact::{random_projection_mas, verify_mas};
use mas_core::index::{build_index, BuildOptions};
use mas_core::lab::{run_separation_experiment, ExperimentConfig};
use mas_core::masnet::{hinge_loss_with, Architecture, ContainmentPair, LossKind, MasNet, Outer, Split, Variant};
use mas_core::multiset::{is_subset, is_subset_real, Multiset};
use mas_core::seed::with_threads;
use mas_core::RealMultiset;
use proptest::prelude::*;

fn points(n: std::ops::Range<usize>, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, d), n)
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::ReluMas), Just(Variant::HatMas), Just(Variant::TriMas)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adding_a_point_never_decreases_the_output(s in points(0..6, 3), x in points(1..2, 3), v in variant(), seed in any::<u64>()) {
        let arch = Architecture::new(3, 5, v).with_outer(Outer::Monotone { hidden: vec![4], out_dim: 3 });
        let net = MasNet::new(arch, seed).unwrap();
        let small = RealMultiset::new(3, s.clone()).unwrap();
        let mut big = s;
        big.extend(x);
        let big = RealMultiset::new(3, big).unwrap();
        let (a, b) = (net.forward(&small).unwrap(), net.forward(&big).unwrap());
        prop_assert!(a.iter().zip(&b).all(|(p, q)| p <= q));
    }

    #[test]
    fn loss_ignores_point_order(s in points(1..5, 2), t in points(1..6, 2), y in any::<bool>(), seed in any::<u64>()) {
        let net = MasNet::new(Architecture::new(2, 4, Variant::HatMas), seed).unwrap();
        let pair = |s: Vec<Vec<f64>>, t: Vec<Vec<f64>>| ContainmentPair {
            index: 0,
            s: RealMultiset::new(2, s).unwrap(),
            t: RealMultiset::new(2, t).unwrap(),
            y,
            noise_std: 0.0,
            split: Split::Train,
        };
        let (mut rs, mut rt) = (s.clone(), t.clone());
        rs.reverse();
        rt.rotate_left(1);
        for kind in [LossKind::Verbatim, LossKind::Separating] {
            let a = hinge_loss_with(&net, &pair(s.clone(), t.clone()), 0.1, kind).unwrap();
            let b = hinge_loss_with(&net, &pair(rs.clone(), rt.clone()), 0.1, kind).unwrap();
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn d_as_matches_brute_force(s in points(0..4, 2), t in points(4..6, 2)) {
        let s = RealMultiset::new(2, s).unwrap();
        let t = RealMultiset::new(2, t).unwrap();
        prop_assert!((d_as(&s, &t).unwrap() - common::brute_force_d_as(&s, &t)).abs() <= 1e-9);
    }

    #[test]
    fn d_as_vanishes_on_sub_multisets(t in points(1..7, 3), mask in prop::collection::vec(any::<bool>(), 7)) {
        let s: Vec<Vec<f64>> = t.iter().zip(&mask).filter(|(_, m)| **m).map(|(p, _)| p.clone()).collect();
        let (s, t) = (RealMultiset::new(3, s).unwrap(), RealMultiset::new(3, t).unwrap());
        prop_assert!(is_subset_real(&s, &t, 0.0).unwrap());
        prop_assert_eq!(d_as(&s, &t).unwrap(), 0.0);
    }

    #[test]
    fn subset_agrees_with_counts(a in prop::collection::vec(0usize..4, 0..6), b in prop::collection::vec(0usize..4, 0..6)) {
        let (s, t) = (Multiset::from_elements(4, &a).unwrap(), Multiset::from_elements(4, &b).unwrap());
        let by_counts = (0..4).all(|e| a.iter().filter(|&&x| x == e).count() <= b.iter().filter(|&&x| x == e).count());
        prop_assert_eq!(is_subset(&s, &t).unwrap(), by_counts);
    }
}

#[test]
fn random_projections_verify() {
    for seed in 0..10 {
        let (e, _) = random_projection_mas(5, 2, mas_core::exact::projection_dim(5, 2), seed, 20).unwrap();
        assert!(verify_mas(&e, 2).unwrap().is_mas);
    }
}

#[test]
fn separation_report_is_thread_independent() {
    let cfg = ExperimentConfig { num_pairs: 4, num_controls: 2, num_param_draws: 2000, ..Default::default() };
    let one = with_threads(1, || serde_json::to_string(&run_separation_experiment(&cfg).unwrap()).unwrap());
    let four = with_threads(4, || serde_json::to_string(&run_separation_experiment(&cfg).unwrap()).unwrap());
    assert_eq!(one, four);
}

#[test]
fn controls_always_fail_to_separate() {
    let cfg = ExperimentConfig { num_pairs: 2, num_controls: 4, num_param_draws: 500, ..Default::default() };
    let r = run_separation_experiment(&cfg).unwrap();
    for p in r.pairs.iter().filter(|p| p.control) {
        assert!(p.decay.iter().all(|d| d.p_hat == 1.0));
        assert_eq!(p.e_plus, 0.0);
    }
}

#[test]
fn index_never_misses_sub_multisets_of_targets() {
    let mut rng = mas_core::seed::rng_from_seed(5);
    let net = MasNet::new(Architecture::new(2, 8, Variant::ReluMas), 1).unwrap();
    let corpus: Vec<(String, RealMultiset)> = (0..50).map(|i| (format!("{i}"), common::random_set(&mut rng, 6, 2))).collect();
    let index = build_index(&net, &corpus, BuildOptions::default()).unwrap();
    for (id, t) in &corpus {
        for len in 0..=t.len() {
            let s = RealMultiset::new(2, t.points()[..len].to_vec()).unwrap();
            let hits = index.query(&net, &s, 0.0, Some(0.0)).unwrap();
            assert!(hits.iter().any(|h| &h.id == id));
        }
    }
}
