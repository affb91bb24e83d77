use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use rfmpos::builder::{build, neighborhood, spatial_median_filter, BuilderConfig};
use rfmpos::dissim::{mji, softmax_weights, weighted_cdm, WeightVector};
use rfmpos::eval::{ecdf, ecdf_at, loop_diameters, opt_errors, radial_errors};
use rfmpos::model::{
    ExtendedRfm, FeatureId, Fingerprint, InitMode, Location, PositionEstimate, PositioningConfig, RawRfm, Rect,
    ReferencePoint, RfmEntry, TerminationFlag, WeightForm,
};
use rfmpos::positioner::{detect_termination, iterate_locate, knn_locate, Termination};

fn fid(i: u8) -> FeatureId {
    FeatureId::from(format!("f{i:02}").as_str())
}

fn roi() -> Rect {
    Rect::new(0.0, 0.0, 10.0, 10.0).unwrap()
}

/// Random located records over a 10 m square, features drawn from a small pool.
fn raw_records() -> impl Strategy<Value = Vec<Fingerprint>> {
    prop::collection::vec(
        (
            (0.0..10.0f64, 0.0..10.0f64),
            prop::collection::btree_map(0..4u8, -100.0..-30.0f64, 1..4),
        ),
        1..40,
    )
    .prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, ((x, y), f))| {
                Fingerprint::new(i as u64, Some(Location::new(x, y)), f.into_iter().map(|(a, v)| (fid(a), v))).unwrap()
            })
            .collect()
    })
}

fn rfm_strategy() -> impl Strategy<Value = ExtendedRfm> {
    prop::collection::vec(
        (
            (0.0..30.0f64, 0.0..20.0f64),
            prop::collection::btree_map(0..6u8, (-100.0..-30.0f64, 0.5..8.0f64), 0..6),
        ),
        1..25,
    )
    .prop_filter_map("duplicate location", |v| {
        let points = v
            .into_iter()
            .map(|((x, y), f)| ReferencePoint {
                location: Location::new(x, y),
                entries: f
                    .into_iter()
                    .map(|(a, (value, sigma))| RfmEntry {
                        feature: fid(a),
                        value,
                        sigma,
                    })
                    .collect(),
            })
            .collect();
        ExtendedRfm::new(points, BuilderConfig::default()).ok()
    })
}

fn query_strategy() -> impl Strategy<Value = Fingerprint> {
    prop::collection::btree_map(0..8u8, -109.0..-25.0f64, 1..7)
        .prop_map(|f| Fingerprint::new(0, None, f.into_iter().map(|(a, v)| (fid(a), v))).unwrap())
}

fn cfg_strategy() -> impl Strategy<Value = PositioningConfig> {
    (1..4usize, 0.1..10.0f64, any::<bool>(), prop::option::of(any::<u64>())).prop_map(|(k, beta, paper, seed)| {
        PositioningConfig {
            k,
            beta,
            weight_form: if paper {
                WeightForm::PaperVerbatim
            } else {
                WeightForm::PrecisionSoftmax
            },
            init_mode: seed.map_or(InitMode::Knn, InitMode::Random),
            ..Default::default()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn median_filter_stays_within_neighborhood_range(recs in raw_records()) {
        let raw = RawRfm::new(recs, roi()).unwrap();
        let cfg = BuilderConfig::default();
        let filtered = spatial_median_filter(&raw, &cfg).unwrap();
        for (loc, out) in raw.locations().iter().zip(filtered.records()) {
            let nb = neighborhood(&raw, loc, &cfg).unwrap();
            for (a, v) in out.features() {
                let vals: Vec<f64> = nb.members.iter().filter_map(|m| m.fingerprint.get(a)).collect();
                prop_assert!(!vals.is_empty());
                let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(*v >= lo && *v <= hi);
            }
        }
    }

    #[test]
    fn median_filter_breakdown(clean in prop::collection::vec(-80.0..-60.0f64, 3..20), frac in 0.0..0.49f64) {
        // all records at one spot so every neighborhood is the whole set
        let n = clean.len();
        let bad = ((n as f64 * frac).floor() as usize).min((n - 1) / 2);
        let make = |vals: &[f64]| {
            let recs = vals
                .iter()
                .enumerate()
                .map(|(i, v)| Fingerprint::new(i as u64, Some(Location::new(5.0, 5.0)), [(fid(0), *v)]).unwrap())
                .collect();
            RawRfm::new(recs, roi()).unwrap()
        };
        let cfg = BuilderConfig::default();
        let before = spatial_median_filter(&make(&clean), &cfg).unwrap().records()[0].get(&fid(0)).unwrap();
        let mut dirty = clean.clone();
        for v in dirty.iter_mut().take(bad) {
            *v += 100.0;
        }
        let after = spatial_median_filter(&make(&dirty), &cfg).unwrap().records()[0].get(&fid(0)).unwrap();
        let spread = clean.iter().copied().fold(f64::NEG_INFINITY, f64::max)
            - clean.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((after - before).abs() <= spread + 1e-9);
    }

    #[test]
    fn sigma_never_below_floor(recs in raw_records(), floor in 0.1..3.0f64) {
        let raw = RawRfm::new(recs, roi()).unwrap();
        let cfg = BuilderConfig { sigma_floor: floor, ..Default::default() };
        let rfm = build(&raw, &cfg).unwrap();
        prop_assert!(rfm.points().iter().flat_map(|p| &p.entries).all(|e| e.sigma >= floor));
        for p in rfm.points() {
            prop_assert!(rfm.query(&p.location).iter().all(|e| e.sigma >= floor - 1e-12));
        }
    }

    #[test]
    fn sigma_translation_invariant(recs in raw_records(), shift in -20.0..20.0f64) {
        let raw = RawRfm::new(recs.clone(), roi()).unwrap();
        let shifted: Vec<Fingerprint> = recs
            .iter()
            .map(|r| {
                let f = r.features().iter().map(|(a, v)| (a.clone(), if *a == fid(0) { v + shift } else { *v }));
                Fingerprint::new(r.id, r.location, f).unwrap()
            })
            .collect();
        let raw2 = RawRfm::new(shifted, roi()).unwrap();
        let a = build(&raw, &BuilderConfig::default()).unwrap();
        let b = build(&raw2, &BuilderConfig::default()).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            for (e, f) in p.entries.iter().zip(&q.entries) {
                prop_assert!((e.sigma - f.sigma).abs() <= 1e-9, "{} vs {}", e.sigma, f.sigma);
                let expect = if e.feature == fid(0) { e.value + shift } else { e.value };
                prop_assert!((f.value - expect).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn query_paths_agree(rfm in rfm_strategy(), (x, y) in (0.0..30.0f64, 0.0..20.0f64)) {
        let q = Location::new(x, y);
        let all = rfm.query(&q);
        for e in &all {
            prop_assert_eq!(rfm.query_feature(&q, &e.feature), Some(e.clone()));
        }
        // a reference point with no other point within the cutoff returns its own entries
        for p in rfm.points() {
            let isolated = rfm.points().iter().all(|o| o.location == p.location || o.location.distance(&p.location) > 3.0);
            if isolated {
                prop_assert_eq!(&rfm.query(&p.location), &p.entries);
            }
        }
    }

    #[test]
    fn mji_relabeling_invariant(a in prop::collection::btree_set(0..12u8, 1..8), b in prop::collection::btree_set(0..12u8, 0..8), perm in Just((0..12u8).collect::<Vec<_>>()).prop_shuffle()) {
        let set = |s: &BTreeSet<u8>, relabel: bool| -> BTreeSet<FeatureId> {
            s.iter().map(|i| fid(if relabel { perm[*i as usize] } else { *i })).collect()
        };
        let before = mji(&set(&a, false), &set(&b, false)).unwrap();
        let after = mji(&set(&a, true), &set(&b, true)).unwrap();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn uniform_softmax_scales_plain_cdm(q in query_strategy(), rfm in rfm_strategy(), sigma in 0.5..8.0f64) {
        let cfg = PositioningConfig::default();
        let flat = rfm.with_uniform_sigma(sigma).unwrap();
        for p in flat.points() {
            let wv = softmax_weights(&p.entries, cfg.beta, cfg.weight_form);
            let n = p.entries.len().max(1) as f64;
            let plain = weighted_cdm(&q, &p.entries, &WeightVector::uniform(), &cfg).unwrap();
            let weighted = weighted_cdm(&q, &p.entries, &wv, &cfg).unwrap();
            prop_assert!((weighted - plain / n).abs() <= 1e-9 * plain.max(1.0));
        }
    }

    #[test]
    fn iterate_terminates_with_consistent_state(q in query_strategy(), rfm in rfm_strategy(), cfg in cfg_strategy()) {
        let est = iterate_locate(&q, &rfm, &cfg).unwrap();
        prop_assert!(est.iterations <= cfg.max_iterations);
        prop_assert_eq!(est.path.len(), est.iterations + 1);
        match est.tf {
            TerminationFlag::Converging => {
                let n = est.path.len();
                prop_assert_eq!(est.location, est.path[n - 1]);
                prop_assert!(n >= 2 && est.path[n - 1].distance(&est.path[n - 2]) < cfg.d_min);
            }
            TerminationFlag::Max => prop_assert!(est.path.contains(&est.location)),
            TerminationFlag::Looping => prop_assert!(est.loop_points.is_some()),
        }
        prop_assert_eq!(iterate_locate(&q, &rfm, &cfg).unwrap(), est);
    }

    #[test]
    fn constant_sigma_iterate_equals_cdm(q in query_strategy(), rfm in rfm_strategy(), sigma in 0.5..8.0f64, k in 1..4usize) {
        let flat = rfm.with_uniform_sigma(sigma).unwrap();
        let cfg = PositioningConfig { k, ..Default::default() };
        let est = iterate_locate(&q, &flat, &cfg).unwrap();
        prop_assert_eq!(est.location, knn_locate(&q, &flat, &cfg, None).unwrap());
        prop_assert_eq!(est.tf, TerminationFlag::Converging);
        prop_assert!(est.iterations <= 2);
    }

    #[test]
    fn termination_detection_matches_definition(pts in prop::collection::vec((0..4u8, 0..4u8), 1..12)) {
        let cfg = PositioningConfig { max_iterations: 8, ..Default::default() };
        let path: Vec<Location> = pts.iter().map(|(x, y)| Location::new(*x as f64, *y as f64)).collect();
        let t = path.len() - 1;
        let got = detect_termination(&path, &cfg);
        let want = if t == 0 {
            Termination::Continue
        } else if path[t] == path[t - 1] {
            Termination::Converging
        } else if let Some(m) = (0..t.saturating_sub(1)).find(|m| path[*m] == path[t]) {
            Termination::Looping { matched: m }
        } else if t >= cfg.max_iterations {
            Termination::Max
        } else {
            Termination::Continue
        };
        prop_assert_eq!(got, want);
    }

    #[test]
    fn ecdf_matches_sort_and_count(errs in prop::collection::vec(0.0..20.0f64, 1..60), x in 0.0..25.0f64) {
        let steps = ecdf(&errs).unwrap();
        let count = errs.iter().filter(|e| **e <= x).count() as f64 / errs.len() as f64;
        prop_assert_eq!(ecdf_at(&steps, x), count);
        prop_assert_eq!(steps.last().unwrap().1, 1.0);
    }

    #[test]
    fn eval_recomputation_oracles(pairs in prop::collection::vec(((-50.0..50.0f64, -50.0..50.0f64), (-50.0..50.0f64, -50.0..50.0f64)), 1..30), extra in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 0..6)) {
        let est: Vec<PositionEstimate> = pairs
            .iter()
            .map(|((x, y), _)| {
                let mut e = PositionEstimate::single(Location::new(*x, *y));
                e.path = extra.iter().map(|(a, b)| Location::new(*a, *b)).chain([e.location]).collect();
                e.loop_points = Some(e.path.clone());
                e
            })
            .collect();
        let truth: Vec<Location> = pairs.iter().map(|(_, (x, y))| Location::new(*x, *y)).collect();
        let errs = radial_errors(&est, &truth).unwrap();
        let opt = opt_errors(&est, &truth).unwrap();
        for ((e, t), (r, o)) in est.iter().zip(&truth).zip(errs.iter().zip(&opt)) {
            let d = ((e.location.x - t.x).powi(2) + (e.location.y - t.y).powi(2)).sqrt();
            prop_assert!((r - d).abs() <= 1e-12);
            prop_assert!(o <= r);
        }
        for (e, d) in est.iter().zip(loop_diameters(&est)) {
            let pts = e.loop_points.as_ref().unwrap();
            let mut brute = 0.0f64;
            for a in pts {
                for b in pts {
                    brute = brute.max(((a.x - b.x).powi(2) + (a.y - b.y).powi(2)).sqrt());
                }
            }
            prop_assert!((d - brute).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_init_is_a_reference_location(q in query_strategy(), rfm in rfm_strategy(), seed in any::<u64>()) {
        let cfg = PositioningConfig { init_mode: InitMode::Random(seed), ..Default::default() };
        let est = iterate_locate(&q, &rfm, &cfg).unwrap();
        prop_assert!(rfm.locations().contains(&est.path[0]));
    }
}

#[test]
fn random_init_covers_every_reference() {
    let points: Vec<ReferencePoint> = (0..200)
        .map(|i| ReferencePoint {
            location: Location::new((i % 20) as f64, (i / 20) as f64),
            entries: vec![RfmEntry {
                feature: fid(0),
                value: -60.0,
                sigma: 1.0,
            }],
        })
        .collect();
    let rfm = ExtendedRfm::new(points, BuilderConfig::default()).unwrap();
    let mut seen = BTreeMap::new();
    for id in 0..10_000u64 {
        let q = Fingerprint::new(id, None, [(fid(0), -60.0)]).unwrap();
        let cfg = PositioningConfig {
            init_mode: InitMode::Random(7),
            ..Default::default()
        };
        let l = rfmpos::positioner::initial_location(&q, &rfm, &cfg).unwrap();
        *seen.entry((l.x.to_bits(), l.y.to_bits())).or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 200);
}
