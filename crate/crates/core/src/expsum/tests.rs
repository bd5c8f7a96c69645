use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_config(n: usize, d: usize, seed: u64) -> WeightedConfiguration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.8)).collect();
    WeightedConfiguration::new(d, coords, weights, 1e-3).unwrap()
}

/// Exact phase of `ξ·x` in 64-bit fixed point, for `x ≥ 2^-11`.
fn fixed_point_phase(xi: &[i64], x: &[f64]) -> f64 {
    let mut acc: u64 = 0;
    for (&k, &c) in xi.iter().zip(x) {
        let scaled = c * 2f64.powi(64);
        assert_eq!(scaled.fract(), 0.0);
        let xs = scaled as u128 as u64;
        acc = acc.wrapping_add((k as u64).wrapping_mul(xs));
    }
    acc as f64 / 2f64.powi(64)
}

/// Independent reference: fixed-point phases, pairwise summation.
fn oracle_sum(cfg: &WeightedConfiguration, xi: &[i64]) -> Complex64 {
    fn pairwise(v: &[Complex64]) -> Complex64 {
        if v.len() <= 4 {
            return v.iter().sum();
        }
        let (a, b) = v.split_at(v.len() / 2);
        pairwise(a) + pairwise(b)
    }
    let terms: Vec<Complex64> = (0..cfg.len())
        .map(|k| {
            let t = fixed_point_phase(xi, cfg.point(k));
            let a = 2.0 * std::f64::consts::PI * t;
            Complex64::new(a.cos(), a.sin()) * cfg.weights()[k]
        })
        .collect();
    pairwise(&terms) / cfg.len() as f64
}

fn coarse_config(n: usize, d: usize, seed: u64) -> WeightedConfiguration {
    // coordinates on a 2^-40 lattice above 2^-11, so the fixed-point oracle is exact
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<f64> = (0..n * d)
        .map(|_| (rng.gen_range(1u64 << 29..1u64 << 40) as f64) / 2f64.powi(40))
        .collect();
    let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.8)).collect();
    WeightedConfiguration::new(d, coords, weights, 1e-3).unwrap()
}

#[test]
fn zero_frequency_unit_weights_is_one() {
    let cfg = WeightedConfiguration::uniform_weights(2, random_config(37, 2, 1).coords().to_vec(), 0.1).unwrap();
    let s = weighted_exp_sum(&cfg, &Frequency(vec![0, 0])).unwrap();
    assert_eq!(s, Complex64::new(1.0, 0.0));
}

#[test]
fn single_point_has_modulus_weight() {
    let cfg = WeightedConfiguration::new(1, vec![0.3172], vec![0.37], 0.1).unwrap();
    for k in [1, 7, -13, 100_003] {
        let s = weighted_exp_sum(&cfg, &Frequency(vec![k])).unwrap();
        assert!((s.norm() - 0.37).abs() < 1e-15);
    }
}

#[test]
fn matches_fixed_point_oracle() {
    for (seed, d) in [(1u64, 1usize), (2, 2), (3, 3)] {
        let cfg = coarse_config(300, d, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
        for _ in 0..20 {
            let xi: Vec<i64> = (0..d).map(|_| rng.gen_range(-(1i64 << 30)..1i64 << 30)).collect();
            let got = weighted_exp_sum(&cfg, &Frequency(xi.clone())).unwrap();
            let want = oracle_sum(&cfg, &xi);
            assert!((got - want).norm() < 1e-10, "ξ={xi:?}: {got} vs {want}");
        }
    }
}

#[test]
fn frac_dot_matches_fixed_point_for_large_frequencies() {
    let cfg = coarse_config(200, 2, 9);
    let xi = [(1i64 << 40) + 12345, -(1i64 << 39) - 777];
    for k in 0..cfg.len() {
        let got = frac_dot(&xi, cfg.point(k)).rem_euclid(1.0);
        let want = fixed_point_phase(&xi, cfg.point(k));
        let gap = (got - want).abs();
        assert!(gap.min(1.0 - gap) < 1e-15);
    }
}

#[test]
fn dimension_mismatch_is_an_error() {
    let cfg = random_config(5, 2, 1);
    assert!(weighted_exp_sum(&cfg, &Frequency(vec![1])).is_err());
}

#[test]
fn recurrence_runs_match_direct_sums() {
    for d in 1..=2 {
        let cfg = random_config(77, d, 5);
        let eval = ConfigEvaluator::new(&cfg, None);
        let mut start = vec![3i64; d];
        *start.last_mut().unwrap() = (1i64 << 35) + 17;
        let mut vals = Vec::new();
        eval.eval_run(&start, 256, &mut vals);
        for t in [0usize, 1, 100, 255] {
            let mut xi = start.clone();
            *xi.last_mut().unwrap() += t as i64;
            let want = weighted_exp_sum(&cfg, &Frequency(xi)).unwrap().norm();
            assert!((vals[t] - want).abs() < 1e-11, "d={d} t={t}");
        }
    }
}

#[test]
fn equally_spaced_points_cancel_except_at_multiples() {
    let n = 64;
    let coords: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
    let cfg = WeightedConfiguration::uniform_weights(1, coords, 0.01).unwrap();
    for xi in [1i64, 5, 63, 65, 127] {
        assert!(weighted_exp_sum(&cfg, &Frequency(vec![xi])).unwrap().norm() < 1e-13);
    }
    assert!((weighted_exp_sum(&cfg, &Frequency(vec![64])).unwrap().norm() - 1.0).abs() < 1e-13);

    let params = SweepParams {
        c: 1.0,
        ..Default::default()
    };
    let rep = sweep(&cfg, &params).unwrap();
    assert!(!rep.verdict);
    let bad: Vec<i64> = rep.violations.iter().map(|v| v.xi.0[0]).collect();
    assert_eq!(bad, vec![64, 128]);
    assert_eq!(rep.violation_count, 2);
}

#[test]
fn single_point_always_fails() {
    let cfg = WeightedConfiguration::new(1, vec![0.25], vec![1.0], 0.1).unwrap();
    let rep = sweep(&cfg, &SweepParams::default()).unwrap();
    assert!(!rep.verdict);
    assert_eq!(rep.violations.is_empty(), rep.verdict);
}

#[test]
fn sweep_rejects_nonpositive_constant() {
    let cfg = random_config(10, 1, 1);
    let p = SweepParams {
        c: 0.0,
        ..Default::default()
    };
    assert!(matches!(sweep(&cfg, &p), Err(Error::Input(_))));
}

#[test]
fn annuli_cover_the_range_without_gaps() {
    let cfg = random_config(200, 1, 3);
    let rep = sweep(&cfg, &SweepParams::default()).unwrap();
    let top = rep.xi_max.floor() as u64;
    assert_eq!(rep.annuli.first().unwrap().lo, 1.0);
    for w in rep.annuli.windows(2) {
        assert_eq!(w[0].hi, w[1].lo);
        assert_eq!(w[1].j, w[0].j + 1);
    }
    assert_eq!(rep.annuli.last().unwrap().hi, rep.xi_max);
    let scanned: u64 = rep.annuli.iter().map(|a| a.scanned).sum();
    assert_eq!(scanned, top);
    assert!(rep.annuli.iter().all(|a| a.exhaustive));
    assert!(rep.conjugate_symmetry_error < 1e-12);
}

#[test]
fn sweep_sup_matches_brute_force_in_one_dimension() {
    let cfg = coarse_config(90, 1, 4);
    let rep = sweep(&cfg, &SweepParams::default()).unwrap();
    let top = rep.xi_max.floor() as i64;
    for a in &rep.annuli {
        let lo = a.lo as i64;
        let hi = (a.hi.ceil() as i64 - 1).min(top);
        let (mut best, mut arg) = (0.0, 0);
        for k in lo..=hi {
            let v = oracle_sum(&cfg, &[k]).norm();
            if v > best {
                best = v;
                arg = k;
            }
        }
        assert!((a.sup - best).abs() < 1e-10, "annulus {}", a.j);
        assert_eq!(a.argmax.0, vec![arg]);
    }
}

#[test]
fn annulus_sup_matches_full_enumeration_in_two_dimensions() {
    let cfg = random_config(40, 2, 6);
    let opts = EnumerationOptions {
        exhaustive_radius: 1 << 20,
        ..Default::default()
    };
    for j in 0..=8u32 {
        let (sup, arg, exhaustive) = annulus_sup_with(SpectralSource::Config(&cfg), j, &opts).unwrap();
        assert!(exhaustive);
        let r = 1i64 << (j + 1);
        let mut best: f64 = 0.0;
        for a in -r..=r {
            for b in -r..=r {
                let n2 = a * a + b * b;
                if n2 >= 1 << (2 * j) && n2 < 1 << (2 * (j + 1)) {
                    best = best.max(weighted_exp_sum(&cfg, &Frequency(vec![a, b])).unwrap().norm());
                }
            }
        }
        assert!((sup - best).abs() < 1e-11, "j={j}: {sup} vs {best}");
        let at = weighted_exp_sum(&cfg, &arg).unwrap().norm();
        assert!((at - sup).abs() < 1e-11);
    }
}

#[test]
fn constant_grid_has_no_spectrum() {
    let g = GridMeasure::uniform(1, 256).unwrap();
    for j in 0..7 {
        let (s, _) = annulus_sup(SpectralSource::Grid(&g), j).unwrap();
        assert!(s < 1e-14, "j={j} sup {s}");
    }
    let g2 = GridMeasure::uniform(2, 64).unwrap();
    let (s, _) = annulus_sup(SpectralSource::Grid(&g2), 3).unwrap();
    assert!(s < 1e-14);
}

#[test]
fn one_cell_spike_is_flat_up_to_the_cell_factor() {
    let g = 2048;
    let mut dens = vec![0.0; g];
    dens[700] = 3.0 * g as f64;
    let mu = GridMeasure::new(1, g, dens).unwrap();
    for j in 0..5 {
        let (s, arg) = annulus_sup(SpectralSource::Grid(&mu), j).unwrap();
        // |sinc(πξ/G)| is largest at the inner edge
        let t = std::f64::consts::PI * arg.0[0] as f64 / g as f64;
        assert_eq!(arg.0[0].abs(), 1 << j);
        assert!((s - t.sin() / t).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-3);
    }
}

#[test]
fn grid_annulus_past_band_is_an_error() {
    let g = GridMeasure::uniform(1, 64).unwrap();
    assert!(annulus_sup(SpectralSource::Grid(&g), 4).is_ok());
    assert!(annulus_sup(SpectralSource::Grid(&g), 5).is_err());
}

#[test]
fn translation_leaves_annulus_sups_unchanged() {
    let cfg = random_config(120, 2, 8);
    let moved = cfg.translated(&[0.3141, 0.7777]);
    for j in 0..7 {
        let a = annulus_sup(SpectralSource::Config(&cfg), j).unwrap().0;
        let b = annulus_sup(SpectralSource::Config(&moved), j).unwrap().0;
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn rescaling_weights_and_constant_keeps_the_verdict() {
    let cfg = random_config(300, 1, 11);
    let scaled = WeightedConfiguration::new(
        1,
        cfg.coords().to_vec(),
        cfg.weights().iter().map(|w| w * 2.5).collect(),
        cfg.radius(),
    )
    .unwrap();
    for c in [0.2, 0.4, 0.8] {
        let p = SweepParams { c, ..Default::default() };
        let q = SweepParams { c: c * 2.5, ..Default::default() };
        let a = sweep(&cfg, &p).unwrap();
        let b = sweep(&scaled, &q).unwrap();
        assert_eq!(a.verdict, b.verdict);
        assert_eq!(a.violation_count, b.violation_count);
        for (x, y) in a.annuli.iter().zip(&b.annuli) {
            assert!((y.sup - 2.5 * x.sup).abs() < 1e-12);
        }
    }
}

#[test]
fn sampled_annuli_are_flagged() {
    let cfg = random_config(50, 2, 12);
    let opts = EnumerationOptions {
        exhaustive_radius: 16,
        samples: 500,
        ..Default::default()
    };
    let (_, _, ex) = annulus_sup_with(SpectralSource::Config(&cfg), 3, &opts).unwrap();
    assert!(ex);
    let (s, arg, ex) = annulus_sup_with(SpectralSource::Config(&cfg), 6, &opts).unwrap();
    assert!(!ex);
    let n2 = arg.norm_sq();
    assert!((1 << 12..1 << 14).contains(&n2));
    assert!((weighted_exp_sum(&cfg, &arg).unwrap().norm() - s).abs() < 1e-12);
}

#[test]
fn mollified_source_damps_high_frequencies() {
    let cfg = random_config(100, 1, 13);
    let r = 1.0 / 64.0;
    for j in 0..12 {
        let plain = annulus_sup(SpectralSource::Config(&cfg), j).unwrap().0;
        let (m, arg) = annulus_sup(SpectralSource::Mollified(&cfg, r), j).unwrap();
        assert!(m <= plain + 1e-15);
        let want = weighted_exp_sum(&cfg, &arg).unwrap().norm() * Mollifier::new(1).hat(&arg.0, r).abs();
        assert!((m - want).abs() < 1e-12);
    }
}

#[test]
fn pilot_constant_is_deterministic_quantile() {
    let a = pilot_constant(256, 1, 0.2, 10, 0.9, 42, &EnumerationOptions::default()).unwrap();
    let b = pilot_constant(256, 1, 0.2, 10, 0.9, 42, &EnumerationOptions::default()).unwrap();
    assert_eq!(a, b);
    let mut s = a.constants.clone();
    s.sort_by(f64::total_cmp);
    assert_eq!(a.c, s[8]);
    assert!(a.c > 0.0 && a.c < 4.0);
}

#[test]
fn report_serializes_with_one_csv_row_per_annulus() {
    let cfg = random_config(64, 2, 14);
    let rep = sweep(&cfg, &SweepParams::default()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&rep.to_json().unwrap()).unwrap();
    assert_eq!(json["N"], 64);
    assert_eq!(json["verdict"], rep.verdict);
    let mut buf = Vec::new();
    rep.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), rep.annuli.len() + 1);
    assert!(text.starts_with("j,lo,hi,scanned,exhaustive,sup,argmax_0,argmax_1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conjugate_symmetry(seed in 0u64..1000, a in -5000i64..5000, b in -5000i64..5000) {
        let cfg = random_config(40, 2, seed);
        let s = weighted_exp_sum(&cfg, &Frequency(vec![a, b])).unwrap();
        let t = weighted_exp_sum(&cfg, &Frequency(vec![-a, -b])).unwrap();
        prop_assert!((t - s.conj()).norm() < 1e-13);
    }

    #[test]
    fn modulus_bounded_by_mean_weight(seed in 0u64..1000, k in -100_000i64..100_000) {
        let cfg = random_config(30, 1, seed);
        let s = weighted_exp_sum(&cfg, &Frequency(vec![k])).unwrap();
        prop_assert!(s.norm() <= cfg.weight_sum() / cfg.len() as f64 + 1e-14);
    }

    #[test]
    fn translation_is_a_phase(seed in 0u64..1000, t in 0.0f64..1.0, k in -3000i64..3000) {
        let cfg = random_config(25, 1, seed);
        let moved = cfg.translated(&[t]);
        let a = weighted_exp_sum(&cfg, &Frequency(vec![k])).unwrap();
        let b = weighted_exp_sum(&moved, &Frequency(vec![k])).unwrap();
        prop_assert!((a.norm() - b.norm()).abs() < 1e-10);
        let phase = unit_phase((k as f64 * t).rem_euclid(1.0));
        prop_assert!((b - a * phase).norm() < 1e-9);
    }
}
