use proptest::prelude::*;

use chansel::analysis::{anova_oneway, choose_final_subset, selection_frequency, CandidateResult, RunResult};
use chansel::classify::{evaluate, train, ClassifierConfig};
use chansel::features::{mrmr_select, FeatureMatrix};
use chansel::montage::Montage;
use chansel::objectives::{repair, ChannelMask, ObjectiveContext, ObjectiveVector};
use chansel::optim::{single_point_crossover, Algorithm};
use chansel::pareto::{
    crowding_distances, dominates, hypervolume_2d, nd_sort_objectives, GridConfig, ParetoArchive, ScoredSolution,
};
use chansel::pipeline::{decode_trialfile, encode_trialfile};
use chansel::rng_from_seed;
use chansel::signal::{welch_psd, TimeWindow, TrialSet, WelchConfig};
use ndarray::{Array2, Array3};

fn objs() -> impl Strategy<Value = Vec<ObjectiveVector>> {
    prop::collection::vec((-50i32..50, -50i32..50), 1..40).prop_map(|v| {
        v.into_iter()
            .map(|(a, b)| ObjectiveVector::new(a as f64, b as f64))
            .collect()
    })
}

fn mask(n: usize) -> impl Strategy<Value = ChannelMask> {
    prop::collection::vec(any::<bool>(), n).prop_map(ChannelMask::from_bits)
}

proptest! {
    #[test]
    fn fronts_partition_and_respect_dominance(o in objs()) {
        let fronts = nd_sort_objectives(&o);
        let mut all: Vec<usize> = fronts.iter().flatten().copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..o.len()).collect::<Vec<_>>());
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                // nothing in the same or a later front dominates i
                for g in &fronts[r..] {
                    prop_assert!(g.iter().all(|&j| !dominates(&o[j], &o[i])));
                }
                // something in the previous front does
                if r > 0 {
                    prop_assert!(fronts[r - 1].iter().any(|&j| dominates(&o[j], &o[i])));
                }
            }
        }
    }

    #[test]
    fn crowding_is_translation_and_scale_invariant(o in objs(), s1 in 0.1f64..10.0, s2 in 0.1f64..10.0, t in -5.0f64..5.0) {
        let moved: Vec<ObjectiveVector> = o.iter().map(|v| ObjectiveVector::new(s1 * v.f1 + t, s2 * v.f2 - t)).collect();
        let (a, b) = (crowding_distances(&o), crowding_distances(&moved));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.is_infinite() && y.is_infinite()) || (x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn hypervolume_grows_with_points(o in objs(), extra in (-60i32..0, -60i32..0)) {
        let r = ObjectiveVector::new(60.0, 60.0);
        let mut more = o.clone();
        more.push(ObjectiveVector::new(extra.0 as f64, extra.1 as f64));
        prop_assert!(hypervolume_2d(&more, r) >= hypervolume_2d(&o, r) - 1e-9);
    }

    #[test]
    fn repair_enforces_cardinality(m in mask(20), l in 1usize..20, seed in any::<u64>()) {
        let r = repair(&m, l, &mut rng_from_seed(seed));
        prop_assert!((1..=l).contains(&r.count()));
        if m.count() > l {
            prop_assert!(r.is_subset_of(&m));
        } else if m.count() > 0 {
            prop_assert_eq!(r, m);
        }
    }

    #[test]
    fn crossover_conserves_bits(a in mask(16), b in mask(16), seed in any::<u64>()) {
        let (c1, c2) = single_point_crossover(&a, &b, 1.0, &mut rng_from_seed(seed));
        for i in 0..16 {
            let before = a.get(i) as u8 + b.get(i) as u8;
            prop_assert_eq!(before, c1.get(i) as u8 + c2.get(i) as u8);
        }
    }

    #[test]
    fn objectives_are_additive(a in mask(10), b in mask(10)) {
        let sp: Vec<f64> = (0..10).map(|i| 0.1 + i as f64 / 10.0).collect();
        let disc: Vec<f64> = (0..10).map(|i| (i * 7 % 10) as f64).collect();
        let ctx = ObjectiveContext::new(sp, disc, 10).unwrap();
        let only_b = ChannelMask::from_bits((0..10).map(|i| b.get(i) && !a.get(i)).collect());
        prop_assume!(a.count() > 0 && only_b.count() > 0);
        let whole = ctx.evaluate(&a.union(&only_b)).unwrap();
        let parts = ctx.evaluate(&a).unwrap() + ctx.evaluate(&only_b).unwrap();
        prop_assert!((whole.f1 - parts.f1).abs() < 1e-12 && (whole.f2 - parts.f2).abs() < 1e-12);
    }

    #[test]
    fn archive_stays_non_dominated_and_bounded(o in objs(), cap in 1usize..10, seed in any::<u64>()) {
        let mut arch = ParetoArchive::new(cap);
        let mut rng = rng_from_seed(seed);
        for (i, v) in o.iter().enumerate() {
            let m = ChannelMask::from_indices(64, &[i]).unwrap();
            arch.insert(ScoredSolution::new(m, *v), &GridConfig::default(), &mut rng);
        }
        prop_assert!(arch.len() <= cap);
        let members = arch.members();
        for a in members {
            prop_assert!(members.iter().all(|b| !dominates(&b.obj, &a.obj)));
        }
    }

    #[test]
    fn anova_is_shift_invariant(groups in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 2..8), 2..5), c in -100.0f64..100.0) {
        let shifted: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|v| v + c).collect()).collect();
        if let (Ok(a), Ok(b)) = (anova_oneway(&groups), anova_oneway(&shifted)) {
            prop_assert!(a.f >= 0.0 && a.p > 0.0 && a.p <= 1.0);
            prop_assert!((a.f - b.f).abs() <= 1e-9 * a.f.max(1.0), "{} vs {}", a.f, b.f);
        }
    }

    #[test]
    fn final_subset_is_a_candidate(accs in prop::collection::vec(0.0f64..1.0, 1..10), masks in prop::collection::vec(mask(8), 10)) {
        let cands: Vec<(ChannelMask, f64)> = accs
            .iter()
            .zip(&masks)
            .map(|(&a, m)| (if m.count() == 0 { ChannelMask::from_indices(8, &[0]).unwrap() } else { m.clone() }, a))
            .collect();
        let i = choose_final_subset(&cands, &[2, 5]).unwrap();
        prop_assert!(i < cands.len());
        let has_ref = |m: &ChannelMask| m.get(2) || m.get(5);
        if cands.iter().any(|(m, _)| has_ref(m)) {
            prop_assert!(has_ref(&cands[i].0));
        }
    }

    #[test]
    fn selection_counts_sum_to_popcounts(masks in prop::collection::vec(prop::collection::btree_set(0usize..64, 1..8), 0..6)) {
        let montage = Montage::builtin("physionet64").unwrap();
        let results: Vec<RunResult> = masks
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let idx: Vec<usize> = s.iter().copied().collect();
                RunResult {
                    subject: format!("s{k}"),
                    algorithm: Algorithm::Nsga2,
                    candidates: vec![CandidateResult {
                        mask: ChannelMask::from_indices(64, &idx).unwrap(),
                        objectives: None,
                        acc_all: 0.5,
                        acc_sel: 0.5,
                    }],
                    chosen: 0,
                }
            })
            .collect();
        let f = selection_frequency(&results, &montage).unwrap();
        let total: usize = f.counts.iter().sum();
        prop_assert_eq!(total, masks.iter().map(|s| s.len()).sum::<usize>());
        prop_assert!(f.counts.iter().all(|&c| c <= results.len()));
    }

    #[test]
    fn welch_is_scale_equivariant(x in prop::collection::vec(-100.0f64..100.0, 300..600), c in 0.01f64..100.0) {
        let cfg = WelchConfig { segment_len: 128, ..Default::default() };
        let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
        let (a, b) = (welch_psd(&x, 160.0, &cfg).unwrap(), welch_psd(&scaled, 160.0, &cfg).unwrap());
        for (p, q) in a.density.iter().zip(&b.density) {
            prop_assert!((q - c * c * p).abs() <= 1e-9 * (c * c * p).abs().max(1e-300));
        }
    }

    #[test]
    fn trialfile_round_trips(nt in 1usize..5, nc in 1usize..4, ns in 2usize..30, seed in any::<u64>()) {
        use rand::Rng as _;
        let mut rng = rng_from_seed(seed);
        let data = Array3::from_shape_fn((nt, nc, ns), |_| rng.random_range(-100.0f32..100.0) as f64);
        let labels = (0..nt).map(|k| (k % 2) as u8).collect();
        let names = (0..nc).map(|i| format!("ch{i}")).collect();
        // fs and window edges exact in f32, the on-disk precision
        let half = (ns / 2) as f64 / 128.0;
        let end = ns as f64 / 128.0;
        let set = TrialSet::new(data, labels, 128.0, TimeWindow::new(0.0, half), TimeWindow::new(half, end), names).unwrap();
        let bytes = encode_trialfile(&set).unwrap();
        let back = decode_trialfile(&bytes, "mem".as_ref()).unwrap();
        prop_assert_eq!(&back, &set);
        prop_assert_eq!(encode_trialfile(&back).unwrap(), bytes);
    }

    #[test]
    fn mrmr_picks_distinct_columns(seed in any::<u64>(), d in 1usize..12, k in 0usize..12) {
        use rand::Rng as _;
        prop_assume!(k <= d);
        let mut rng = rng_from_seed(seed);
        let x = Array2::from_shape_fn((30, d), |_| rng.random::<f64>());
        let labels: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let s = mrmr_select(x.view(), &labels, k, 10).unwrap();
        let mut sel = s.selected.clone();
        sel.sort();
        sel.dedup();
        prop_assert_eq!(sel.len(), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Standardisation absorbs any per-column affine map fitted on the
    /// training data, so predictions do not change.
    #[test]
    fn classifier_ignores_affine_rescaling(seed in any::<u64>(), scale in 0.1f64..50.0, shift in -20.0f64..20.0) {
        use rand::Rng as _;
        let mut rng = rng_from_seed(seed);
        let n = 60;
        let labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let x = Array2::from_shape_fn((n, 3), |(i, j)| labels[i] as f64 * (j as f64) + rng.random::<f64>());
        let names: Vec<String> = (0..3).map(|j| format!("f{j}")).collect();
        let fm = FeatureMatrix::new(names.clone(), x.clone()).unwrap();
        let fm2 = FeatureMatrix::new(names, x.mapv(|v| scale * v + shift)).unwrap();
        let cfg = ClassifierConfig { c_grid: vec![1.0], ..Default::default() };
        let (m1, m2) = (train(&fm, &labels, &cfg).unwrap(), train(&fm2, &labels, &cfg).unwrap());
        let (p1, p2) = (m1.predict(fm.data.view()), m2.predict(fm2.data.view()));
        prop_assert_eq!(p1, p2);
        prop_assert_eq!(evaluate(&m1, &fm, &labels).unwrap(), evaluate(&m2, &fm2, &labels).unwrap());
    }
}
