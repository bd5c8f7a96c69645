use std::sync::Arc;

use super::*;
use crate::patterns::{
    ap3_translational, isosceles_functional, isosceles_parabola, parabola, periodize,
    violation_scan, Ratio, RoughPattern, SurfacePattern, TranslationalPattern,
};
use crate::torus::wrap;
use proptest::prelude::*;

#[test]
fn radius_examples() {
    assert!((derive_radius(100, 0.5).unwrap() - 1e-4).abs() < 1e-16);
    assert_eq!(derive_radius(2, 1.0).unwrap(), 0.5);
    assert_eq!(derive_radius(10, 0.0).unwrap_err().exit_code(), 2);
    assert!(derive_radius(10, -1.0).is_err());
}

proptest! {
    #[test]
    fn radius_rechecks(m in 2usize..100_000, lambda in 0.05f64..2.0) {
        let r = derive_radius(m, lambda).unwrap();
        let back = r.powf(-lambda);
        prop_assert!(back >= m as f64 - 1.0 && back <= m as f64 * (1.0 + 1e-12));
    }
}

#[test]
fn wilson_interval_brackets_estimate() {
    let (lo, hi) = wilson_interval(20, 100);
    assert!(lo < 0.2 && 0.2 < hi);
    assert!((lo - 0.1333).abs() < 1e-3 && (hi - 0.2888).abs() < 1e-3);
    assert!(wilson_interval(0, 50).0 < 1e-12);
}

#[test]
fn point_streams_are_independent_of_order() {
    let a = sample_stratum(9, 2, 64, 2, uniform_point);
    let b: Vec<f64> = (0..64)
        .flat_map(|k| {
            let mut x = [0.0; 2];
            uniform_point(&mut point_rng(9, 2, k), &mut x);
            x
        })
        .collect();
    assert_eq!(a, b);
    assert_ne!(a, sample_stratum(9, 3, 64, 2, uniform_point));
}

#[test]
fn rough_with_empty_pattern_keeps_everything() {
    let z = RoughPattern::empty(3, 1, 16).unwrap();
    let cfg = build_rough(&ConstructionParams::new(300, 0.4, 1), &z).unwrap();
    assert_eq!(cfg.len(), 300);
    assert_eq!(cfg.removed_count(), 0);
    assert!(cfg.weights().iter().all(|&w| w == 1.0));
    cfg.check_hypotheses(0.4).unwrap();
}

#[test]
fn rough_with_full_pattern_fails() {
    let z = RoughPattern::full(2, 1, 4).unwrap();
    match build_rough(&ConstructionParams::new(64, 0.4, 1), &z) {
        Err(crate::Error::Construction { diagnostics, .. }) => {
            assert_eq!(diagnostics.removed, 64);
            assert_eq!(diagnostics.retained, 0);
        }
        other => panic!("expected construction failure, got {other:?}"),
    }
}

#[test]
fn rough_diagonal_band_is_avoided() {
    // cells (i, i) and their neighbours on a 4096 grid: pairs closer than ~4e-4
    let g = 4096u64;
    let cells = (0..g)
        .flat_map(|i| [(i, i), (i, (i + 1) % g), ((i + 1) % g, i)])
        .map(|(a, b)| a * g + b);
    let z = RoughPattern::new(2, 1, g, cells, 1.0).unwrap();
    let params = ConstructionParams::new(256, 0.5, 7);
    let cfg = build_rough(&params, &z).unwrap();
    assert!(cfg.removed_count() > 0);
    let r = cfg.radius();
    let margin = 2f64.sqrt() * r;
    // every ordered pair of retained points stays clear of the band
    for i in 0..cfg.len() {
        for j in 0..cfg.len() {
            if i != j {
                assert!(!z.contains_within(&[cfg.point(i)[0], cfg.point(j)[0]], margin));
            }
        }
    }
}

#[test]
fn surface_constant_map_far_away_removes_nothing() {
    let cubes: Vec<TorusCube> = [0.1, 0.4, 0.7]
        .iter()
        .map(|&c| TorusCube::new(TorusPoint::new(vec![c]).unwrap(), 0.02).unwrap())
        .collect();
    let p = SurfacePattern::new(3, 1, cubes, Arc::new(|_: &[f64]| vec![0.25]), 0.0).unwrap();
    let cfg = build_surface(&ConstructionParams::new(200, 0.45, 3), &p).unwrap();
    assert_eq!(cfg.removed_count(), 0);
    assert_eq!(cfg.len(), 800);
    assert!((cfg.weight_sum() - 800.0).abs() < 1e-9);
    cfg.check_hypotheses(0.45).unwrap();
}

#[test]
fn surface_two_point_shift_outside_target_removes_nothing() {
    let cubes: Vec<TorusCube> = [0.2, 0.7]
        .iter()
        .map(|&c| TorusCube::new(TorusPoint::new(vec![c]).unwrap(), 0.02).unwrap())
        .collect();
    // identity displaced by 0.25 sends 2R_1 nowhere near 2R_2
    let p = SurfacePattern::new(
        2,
        1,
        cubes,
        Arc::new(|x: &[f64]| vec![wrap(x[0] + 0.25)]),
        1.0,
    )
    .unwrap();
    let cfg = build_surface(&ConstructionParams::new(500, 0.45, 3), &p).unwrap();
    assert_eq!(cfg.removed_count(), 0);
}

#[test]
fn surface_strata_follow_partition() {
    let cubes: Vec<TorusCube> = [0.2, 0.7]
        .iter()
        .map(|&c| TorusCube::new(TorusPoint::new(vec![c]).unwrap(), 0.02).unwrap())
        .collect();
    let p =
        SurfacePattern::new(2, 1, cubes.clone(), Arc::new(|_: &[f64]| vec![0.45]), 0.0).unwrap();
    let cfg = build_surface(&ConstructionParams::new(400, 0.45, 8), &p).unwrap();
    for (k, &s) in cfg.strata().iter().enumerate() {
        let x = cfg.point(k);
        if s == 0 {
            assert!(partition_weight(&cubes, 0, x) > 0.0);
        } else {
            assert!(cubes[s as usize - 1].scaled(2.0).contains(x));
        }
    }
    let raw = &cfg.provenance.stratum_weights;
    assert!((raw[1] - (1.75f64 * 0.02)).abs() < 1e-15);
    assert!((raw.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn isosceles_construction_leaves_no_isosceles_triples() {
    let setup = isosceles_parabola().unwrap();
    let params = ConstructionParams::new(512, 0.25, 4);
    let cfg = build_surface(&params, &setup.pattern).unwrap();
    let cubes = setup.pattern.cubes();
    let pick = |i: usize| -> Vec<f64> {
        (0..cfg.len())
            .map(|k| cfg.point(k)[0])
            .filter(|x| cubes[i].contains(&[*x]))
            .collect()
    };
    let (apex, left, right) = (pick(0), pick(1), pick(2));
    assert!(!apex.is_empty() && !left.is_empty() && !right.is_empty());
    let mut min_f = f64::INFINITY;
    for &t2 in &apex {
        for &t3 in &left {
            for &t1 in &right {
                min_f = min_f.min(isosceles_functional(&parabola, t1, t2, t3).abs());
            }
        }
    }
    assert!(min_f > 0.0);
}

#[test]
fn isosceles_at_four_ninths_removes_too_much_at_m_512() {
    let setup = isosceles_parabola().unwrap();
    let err =
        build_surface(&ConstructionParams::new(512, 4.0 / 9.0, 4), &setup.pattern).unwrap_err();
    assert!(matches!(err, crate::Error::Construction { .. }));
}

fn empty_targets(n: usize, m: u32) -> TranslationalPattern {
    periodize(
        &TranslationalPattern::new(
            n,
            1,
            Ratio::integer(2),
            m,
            Arc::new(|_: &[f64]| Vec::new()),
            1.0,
            2.0,
        )
        .unwrap(),
    )
}

#[test]
fn translational_with_no_targets() {
    let cfg = build_translational(
        &ConstructionParams::new(256, 0.45, 2),
        &empty_targets(3, 16),
    )
    .unwrap();
    assert_eq!(cfg.removed_count(), 0);
    assert_eq!(cfg.provenance.removal_fraction, Some(0.0));
    assert_eq!(cfg.len(), 4 * 256);
    let raw = &cfg.provenance.stratum_weights;
    let q = 1.0 / 32.0;
    for w in &raw[1..] {
        assert!((w - q).abs() < 1e-15);
    }
    assert!((raw[0] - (1.0 - 3.0 * q)).abs() < 1e-15);
    cfg.check_hypotheses(0.45).unwrap();
}

#[test]
fn translational_requires_periodized_pattern() {
    let raw = TranslationalPattern::new(
        3,
        1,
        Ratio::integer(2),
        16,
        Arc::new(|h: &[f64]| vec![-h[0]]),
        1.0,
        2.0,
    )
    .unwrap();
    assert_eq!(
        build_translational(&ConstructionParams::new(64, 0.3, 0), &raw)
            .unwrap_err()
            .exit_code(),
        2
    );
}

#[test]
fn ap3_at_low_lambda_avoids_progressions() {
    let p = ap3_translational().unwrap();
    let params = ConstructionParams::new(2048, 0.3, 11);
    let cfg = build_translational(&params, &p).unwrap();
    assert!(cfg.len() >= 2048);
    assert!(cfg.provenance.removal_fraction.unwrap() < 0.05);
    let pat = PatternSpec::Translational(p);
    assert!(violation_scan(&cfg, &pat, params.separation_s, 0.0).is_empty());
    cfg.check_hypotheses(0.3).unwrap();
}

#[test]
fn ap3_at_default_lambda_fails_construction() {
    let p = ap3_translational().unwrap();
    let err = build_translational(&ConstructionParams::new(2048, 0.45, 11), &p).unwrap_err();
    match err {
        crate::Error::Construction { diagnostics, .. } => {
            assert!(diagnostics.removal_fraction > 0.5)
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn single_equation_removal_matches_bernoulli_model() {
    // x_2 - 2 x_1 ∈ {1/2}; 2 X_1 sweeps exactly one period 1/m of the targets,
    // so each (X_1, X_2) pair hits with probability 2 t m
    let m = crate::patterns::min_layout_period(2, 1, 2.0);
    let raw = TranslationalPattern::new(
        2,
        1,
        Ratio::integer(2),
        m,
        Arc::new(|_: &[f64]| vec![0.5]),
        0.0,
        1.0,
    )
    .unwrap();
    let p = periodize(&raw);
    let params = ConstructionParams::new(2048, 0.57, 5);
    let cfg = build_translational(&params, &p).unwrap();
    let t = cfg.provenance.threshold;
    let pair = 2.0 * t * m as f64;
    let expected = 1.0 - (1.0 - pair).powi(2048);
    let se = (expected * (1.0 - expected) / 2048.0).sqrt();
    let got = cfg.provenance.removal_fraction.unwrap();
    assert!(expected > 0.05 && expected < 0.5, "{expected}");
    assert!(
        (got - expected).abs() <= 3.0 * se,
        "P̂ {got} vs {expected} ± {se}"
    );
}

fn naive_incidence(
    coords: &[f64],
    dim: usize,
    slots: &[Vec<usize>],
    pattern: &PatternSpec,
    thr: f64,
) -> Vec<usize> {
    let n = slots.len();
    let mut hit = std::collections::BTreeSet::new();
    let mut idx = vec![0usize; n];
    let total: usize = slots.iter().map(|s| s.len()).product();
    for code in 0..total {
        let mut rem = code;
        for i in (0..n).rev() {
            idx[i] = slots[i][rem % slots[i].len()];
            rem /= slots[i].len();
        }
        let distinct = (0..n).all(|i| (i + 1..n).all(|j| idx[i] != idx[j]));
        let tuple: Vec<&[f64]> = idx
            .iter()
            .map(|&k| &coords[k * dim..(k + 1) * dim])
            .collect();
        if distinct && pattern.holds_within(&tuple, thr + crate::patterns::ROUNDING_SLACK) {
            hit.insert(idx[n - 1]);
        }
    }
    hit.into_iter().collect()
}

#[test]
fn incidence_matches_naive_on_small_inputs() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
    let cubes: Vec<TorusCube> = [0.1, 0.45, 0.8]
        .iter()
        .map(|&c| TorusCube::new(TorusPoint::new(vec![c]).unwrap(), 0.025).unwrap())
        .collect();
    let surface = PatternSpec::Surface(crate::patterns::ap3_surface(cubes).unwrap());
    let trans = PatternSpec::Translational(ap3_translational().unwrap());
    let mut nonempty = 0;
    for trial in 0..30 {
        let m = 4 + trial % 7;
        let coords: Vec<f64> = (0..3 * m).map(|_| rng.gen()).collect();
        let slots: Vec<Vec<usize>> = (0..3).map(|i| (i * m..(i + 1) * m).collect()).collect();
        let shared: Vec<Vec<usize>> = vec![(0..3 * m).collect(); 3];
        let cells: Vec<u64> = (0..512).filter(|_| rng.gen::<f64>() < 0.01).collect();
        let rough = PatternSpec::Rough(RoughPattern::new(3, 1, 8, cells, 1.0).unwrap());
        let thr = rng.gen::<f64>() * 0.05;
        for (p, s) in [(&surface, &slots), (&trans, &slots), (&rough, &shared)] {
            let want = naive_incidence(&coords, 1, s, p, thr);
            // a budget covering the prefixes but not the full product forces pruning
            let prefixes = (s[0].len() * s[1].len()) as u64;
            let fast = incidence_index_set(&coords, 1, s.clone(), p, thr, prefixes).unwrap();
            let full = incidence_index_set(&coords, 1, s.clone(), p, thr, u64::MAX).unwrap();
            assert_eq!(full, want);
            assert_eq!(fast, want);
            nonempty += usize::from(!want.is_empty());
        }
    }
    assert!(nonempty > 0);
}

#[test]
fn incidence_errors() {
    let p = PatternSpec::Translational(ap3_translational().unwrap());
    let coords: Vec<f64> = (0..30).map(|k| k as f64 / 30.0).collect();
    let slots: Vec<Vec<usize>> = (0..3).map(|i| (i * 10..(i + 1) * 10).collect()).collect();
    assert!(incidence_index_set(&coords, 1, slots.clone(), &p, 0.0, u64::MAX).is_err());
    let err = incidence_index_set(&coords, 1, slots.clone(), &p, 0.1, 50).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(incidence_index_set(&coords, 1, slots[..2].to_vec(), &p, 0.1, u64::MAX).is_err());
}

#[test]
fn incidence_tiny_threshold_is_empty() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let p = PatternSpec::Translational(ap3_translational().unwrap());
    let coords: Vec<f64> = (0..30).map(|_| rng.gen()).collect();
    let slots: Vec<Vec<usize>> = (0..3).map(|i| (i * 10..(i + 1) * 10).collect()).collect();
    assert!(incidence_index_set(&coords, 1, slots, &p, 1e-300, u64::MAX)
        .unwrap()
        .is_empty());
}

#[test]
fn incidence_handles_duplicate_candidates() {
    // the band around the diagonal catches two copies of one point
    let g = 64u64;
    let z = RoughPattern::new(2, 1, g, (0..g).map(|i| i * g + i), 1.0).unwrap();
    let coords = vec![0.3, 0.3, 0.9];
    let all = vec![vec![0, 1, 2]; 2];
    let hit = incidence_index_set(&coords, 1, all, &PatternSpec::Rough(z), 1e-6, u64::MAX).unwrap();
    assert_eq!(hit, vec![0, 1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn incidence_monotone_in_threshold(seed in any::<u64>(), t1 in 1e-4f64..0.02, extra in 0.0f64..0.02) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let p = PatternSpec::Translational(ap3_translational().unwrap());
        let coords: Vec<f64> = (0..60).map(|_| rng.gen()).collect();
        let slots: Vec<Vec<usize>> = (0..3).map(|i| (i * 20..(i + 1) * 20).collect()).collect();
        let small = incidence_index_set(&coords, 1, slots.clone(), &p, t1, u64::MAX).unwrap();
        let large = incidence_index_set(&coords, 1, slots, &p, t1 + extra, u64::MAX).unwrap();
        for k in small {
            prop_assert!(large.contains(&k));
        }
    }
}

#[test]
fn builds_are_identical_across_thread_counts() {
    let p = ap3_translational().unwrap();
    let params = ConstructionParams::new(1024, 0.3, 77);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| build_translational(&params, &p).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    assert_eq!(
        a.coords().iter().map(|c| c.to_bits()).collect::<Vec<_>>(),
        b.coords().iter().map(|c| c.to_bits()).collect::<Vec<_>>()
    );
}

#[test]
fn post_filter_margin_holds() {
    // retained translational tuples stay at least sqrt(n)(L+1)r from the relation
    let p = ap3_translational().unwrap();
    let params = ConstructionParams::new(1024, 0.3, 3);
    let cfg = build_translational(&params, &p).unwrap();
    let margin = 3f64.sqrt() * 2.0 * cfg.radius();
    let pat = PatternSpec::Translational(p);
    assert!(violation_scan(&cfg, &pat, params.separation_s, margin).is_empty());
}

#[test]
fn split_sums_reconstruct_the_output() {
    let p = ap3_translational().unwrap();
    let params = ConstructionParams::new(512, 0.3, 4);
    let set = translational_candidates(&params, &p).unwrap();
    let cfg = build_translational(&params, &p).unwrap();
    assert_eq!(set.removed.len(), cfg.removed_count());
    let scale = cfg.provenance.weight_scale;
    for k in [1i64, 7, -40, 1000, 123_457] {
        let xi = Frequency(vec![k]);
        let s = set.split_sums(&xi).unwrap();
        assert!((s.f - (s.g - s.h)).norm() < 1e-10);
        let direct = crate::expsum::weighted_exp_sum(&cfg, &xi).unwrap() * (cfg.len() as f64 / scale);
        assert!((direct - s.f).norm() < 1e-9, "{direct} vs {}", s.f);
    }
}

#[test]
fn split_sums_without_removals() {
    let p = empty_targets(3, 16);
    let set = translational_candidates(&ConstructionParams::new(128, 0.45, 2), &p).unwrap();
    assert!(set.removed.is_empty());
    let s = set.split_sums(&Frequency(vec![5])).unwrap();
    assert_eq!(s.h, Complex64::new(0.0, 0.0));
    assert_eq!(s.f, s.g);
}
