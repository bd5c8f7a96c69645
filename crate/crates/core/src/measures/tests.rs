use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::patterns::{ap3_translational, PatternSpec, RoughPattern};
use crate::sampler::{ConstructionParams, WeightedConfiguration};

fn random_measure(dim: usize, g: usize, seed: u64) -> GridMeasure {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GridMeasure::new(dim, g, (0..g.pow(dim as u32)).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

/// Slow reference: exact integral of the piecewise-constant density.
fn reference_transform(mu: &GridMeasure, xi: &[i64]) -> Complex64 {
    let g = mu.cells_per_axis();
    let mut total = Complex64::new(0.0, 0.0);
    for (flat, &v) in mu.density().iter().enumerate() {
        let mut rest = flat;
        let mut z = Complex64::new(v, 0.0);
        for a in (0..mu.dim()).rev() {
            let c = (rest % g) as f64;
            rest /= g;
            let k = xi[a] as f64;
            let (lo, hi) = (c / g as f64, (c + 1.0) / g as f64);
            z *= if xi[a] == 0 {
                Complex64::new(hi - lo, 0.0)
            } else {
                // ∫_lo^hi e^{-2πi k x} dx
                let w = -2.0 * std::f64::consts::PI * k;
                let e = |x: f64| Complex64::new(0.0, w * x).exp();
                (e(hi) - e(lo)) / Complex64::new(0.0, w)
            };
        }
        total += z;
    }
    total
}

#[test]
fn mollifier_has_unit_mass_and_transform_one_at_zero() {
    for (d, g, r) in [(1, 2048, 0.01), (1, 512, 0.1), (2, 256, 0.05)] {
        let phi = mollifier_density(d, r, g).unwrap();
        assert!((phi.mass() - 1.0).abs() < 1e-6, "mass {}", phi.mass());
        let z = phi.transform(&Frequency(vec![0; d])).unwrap();
        assert!((z.re - phi.mass()).abs() < 1e-12 && z.im.abs() < 1e-12);
    }
}

#[test]
fn mollifier_support_within_radius() {
    let (g, r) = (1024, 0.03);
    let phi = mollifier_density(1, r, g).unwrap();
    for (c, &v) in phi.density().iter().enumerate() {
        let x = phi.cell_center(c)[0];
        let dist = x.min(1.0 - x);
        if dist > r + 1.0 / g as f64 {
            assert_eq!(v, 0.0, "cell {c}");
        }
    }
}

#[test]
fn under_resolved_mollifier_is_rejected() {
    assert!(matches!(mollifier_density(1, 1.0 / 1024.0, 1024), Err(Error::Input(_))));
    assert!(mollifier_density(1, 1.5 / 1024.0, 1024).is_ok());
}

#[test]
fn grid_mollifier_transform_tracks_the_analytic_one() {
    let (g, r) = (4096, 1.0 / 64.0);
    let phi = mollifier_density(1, r, g).unwrap();
    let m = Mollifier::new(1);
    for k in [1i64, 10, 50, 100, 200] {
        let z = phi.transform(&Frequency(vec![k])).unwrap().norm();
        let t = std::f64::consts::PI * k as f64 / g as f64;
        // cell averaging multiplies by sinc and aliases images at ±G
        let want = m.hat(&[k], r).abs() * (t.sin() / t).powi(2);
        assert!((z - want).abs() < 1e-8, "k={k}: {z} vs {want}");
    }
}

#[test]
fn fast_and_direct_transforms_agree() {
    let mu = random_measure(2, 32, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let xi = Frequency(vec![rng.gen_range(-15..16), rng.gen_range(-15..16)]);
        let a = mu.transform(&xi).unwrap();
        let b = mu.transform_direct(&xi).unwrap();
        let c = reference_transform(&mu, &xi.0);
        assert!((a - b).norm() < 1e-9);
        assert!((a - c).norm() < 1e-9);
    }
}

#[test]
fn transform_outside_band_is_an_error() {
    let mu = GridMeasure::uniform(1, 64).unwrap();
    assert!(mu.transform(&Frequency(vec![31])).is_ok());
    assert!(mu.transform(&Frequency(vec![32])).is_err());
    assert!(mu.transform(&Frequency(vec![1, 2])).is_err());
}

#[test]
fn seminorm_of_uniform_is_zero() {
    let mu = GridMeasure::uniform(2, 64).unwrap();
    for lambda in [0.0, 0.5, 3.0] {
        assert!(seminorm(&mu, lambda, 31).unwrap().value < 1e-12);
    }
}

#[test]
fn seminorm_of_spike_is_about_one() {
    let g = 1024;
    let mut d = vec![0.0; g];
    d[17] = g as f64;
    let mu = GridMeasure::new(1, g, d).unwrap();
    let s = seminorm(&mu, 0.0, 5).unwrap();
    let t = std::f64::consts::PI / g as f64;
    assert!((s.value - t.sin() / t).abs() < 1e-12);
    assert!((s.value - 1.0).abs() < 1e-5);
}

#[test]
fn seminorm_matches_reference_maximum() {
    let mu = random_measure(1, 128, 5);
    let lambda = 0.7;
    let s = seminorm(&mu, lambda, 40).unwrap();
    let mut best: f64 = 0.0;
    for k in -40i64..=40 {
        if k != 0 {
            best = best.max(reference_transform(&mu, &[k]).norm() * (k.abs() as f64).powf(lambda / 2.0));
        }
    }
    assert!((s.value - best).abs() < 1e-10);
    let at = reference_transform(&mu, &s.argmax.0).norm() * s.argmax.norm().powf(lambda / 2.0);
    assert!((at - s.value).abs() < 1e-10);
}

#[test]
fn seminorm_box_limits() {
    let mu = random_measure(1, 64, 6);
    assert!(seminorm(&mu, 1.0, 31).is_ok());
    assert!(seminorm(&mu, 1.0, 32).is_err());
    assert!(seminorm(&mu, 1.0, 0).is_err());
}

#[test]
fn grid_file_round_trip() {
    let mu = random_measure(2, 16, 7);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mu.sfgm");
    mu.save(&path, serde_json::json!({"note": "test"})).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"SFGM");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 16);
    assert_eq!(bytes.len(), 12 + 8 * 256);
    assert_eq!(GridMeasure::load(&path).unwrap(), mu);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert!((side["mass"].as_f64().unwrap() - mu.mass()).abs() < 1e-15);

    std::fs::write(&path, b"NOPE0000000000").unwrap();
    assert!(GridMeasure::load(&path).is_err());
}

#[test]
fn negative_density_is_rejected() {
    assert!(GridMeasure::new(1, 4, vec![1.0, -0.1, 1.0, 1.0]).is_err());
    assert!(GridMeasure::new(1, 4, vec![1.0, 1.0]).is_err());
}

fn bump0(g: usize) -> GridMeasure {
    GridMeasure::bump(1, g, &[0.5], 0.3).unwrap()
}

#[test]
fn perturb_by_single_atom_localizes() {
    let g = 1024;
    let mu0 = bump0(g);
    let x0 = mu0.cell_center(512)[0];
    let cfg = WeightedConfiguration::new(1, vec![x0], vec![1.0], 0.02).unwrap();
    let (mu, diag) = perturb(&mu0, &cfg, &[0.5]).unwrap();
    // φ_r on the grid, shifted to the atom's cell, times μ₀, normalized
    let phi = mollifier_density(1, 0.02, g).unwrap();
    let shifted: Vec<f64> = (0..g).map(|c| phi.density()[(c + g - 512) % g] * mu0.density()[c]).collect();
    let mass: f64 = shifted.iter().sum::<f64>() / g as f64;
    assert!((diag.rho_mass - mass).abs() < 1e-9);
    for c in 0..g {
        assert!((mu.density()[c] - shifted[c] / mass).abs() < 1e-7, "cell {c}");
    }
    assert!((mu.mass() - 1.0).abs() < 1e-9);
}

#[test]
fn perturb_reports_consistent_seminorms() {
    let g = 2048;
    let mu0 = bump0(g);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let coords: Vec<f64> = (0..2000).map(|_| rng.gen::<f64>()).collect();
    let cfg = WeightedConfiguration::uniform_weights(1, coords, 0.005).unwrap();
    let (mu, diag) = perturb(&mu0, &cfg, &[0.3, 0.9]).unwrap();
    assert!((mu.mass() - 1.0).abs() < 1e-9);
    assert!(mu.density().iter().all(|&v| v >= 0.0));
    for s in &diag.seminorms {
        assert!(s.triangle_holds);
        assert!(s.k_ratio.is_finite() && s.k_ratio > 0.0);
        let again = field_difference(&mu, &mu0).unwrap().seminorm(s.gamma, diag.xi_max).unwrap();
        assert_eq!(again.value, s.mu_minus_mu0.value);
    }
}

#[test]
fn perturbation_shrinks_with_more_points() {
    let g = 2048;
    let mu0 = bump0(g);
    let mean = |n: usize| -> f64 {
        (0..4)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let coords: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
                let cfg = WeightedConfiguration::uniform_weights(1, coords, 0.004).unwrap();
                perturb(&mu0, &cfg, &[0.5]).unwrap().1.seminorms[0].mu_minus_mu0.value
            })
            .sum::<f64>()
            / 4.0
    };
    let (a, b, c) = (mean(256), mean(1024), mean(4096));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn disjoint_support_is_degenerate() {
    let g = 512;
    let mu0 = GridMeasure::bump(1, g, &[0.2], 0.1).unwrap();
    let cfg = WeightedConfiguration::uniform_weights(1, vec![0.7, 0.72], 0.02).unwrap();
    assert!(matches!(perturb(&mu0, &cfg, &[0.5]), Err(Error::DegenerateOverlap { .. })));
}

#[test]
fn perturbed_support_stays_near_config_and_mu0() {
    let g = 1024;
    let r = 0.01;
    let mu0 = bump0(g);
    let pts = [0.31, 0.5, 0.64, 0.9];
    let cfg = WeightedConfiguration::uniform_weights(1, pts.to_vec(), r).unwrap();
    let (mu, _) = perturb(&mu0, &cfg, &[0.5]).unwrap();
    let cell = 1.0 / g as f64;
    for (c, &v) in mu.density().iter().enumerate() {
        if v > 1e-9 * mu.mass() {
            let x = mu.cell_center(c)[0];
            let near = pts.iter().any(|&p| crate::torus::dist_sq(&[x], &[p]).sqrt() <= r + cell);
            assert!(near, "cell {c}");
            assert!(mu0.density()[c] > 0.0 || mu0.density()[(c + 1) % g] > 0.0 || mu0.density()[(c + g - 1) % g] > 0.0);
        }
    }
}

#[test]
fn support_distance_examples() {
    let g = 1024;
    let a = GridMeasure::bump(1, g, &[0.2], 0.05).unwrap();
    assert_eq!(support_distance(&a, &a, 1e-6).unwrap(), 0.0);
    let b = GridMeasure::bump(1, g, &[0.5], 0.05).unwrap();
    let d = support_distance(&a, &b, 1e-6).unwrap();
    assert!((d - 0.3).abs() <= 2.0 / g as f64, "{d}");
    let zero = GridMeasure::new(1, g, vec![0.0; g]).unwrap();
    assert!(support_distance(&a, &zero, 1e-6).is_err());
}

#[test]
fn support_distance_matches_brute_force_in_two_dimensions() {
    let g = 24;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let make = |rng: &mut ChaCha8Rng| {
            GridMeasure::new(2, g, (0..g * g).map(|_| if rng.gen::<f64>() < 0.05 { 1.0 } else { 0.0 }).collect()).unwrap()
        };
        let (a, b) = (make(&mut rng), make(&mut rng));
        let pts = |m: &GridMeasure| -> Vec<crate::torus::TorusPoint> {
            (0..g * g)
                .filter(|&c| m.density()[c] > 0.5 * m.mass())
                .map(|c| crate::torus::TorusPoint::new(m.cell_center(c)).unwrap())
                .collect()
        };
        let want = crate::torus::hausdorff_distance(&pts(&a), &pts(&b)).unwrap();
        let got = support_distance(&a, &b, 0.5).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn iteration_on_empty_pattern_keeps_probability_measures() {
    let z = RoughPattern::empty(3, 1, 8).unwrap();
    let base = ConstructionParams::new(64, 0.9, 1);
    let schedule = geometric_schedule(&base, 2, 8.0);
    let opts = IterationOptions::default();
    let out = salem_iterate(&PatternSpec::Rough(z), &schedule, 2048, &opts).unwrap();
    assert_eq!(out.len(), 2);
    for s in &out {
        let mu = s.measure.as_ref().unwrap();
        assert!((mu.mass() - 1.0).abs() < 1e-9);
        assert!(mu.density().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn iteration_on_ap3_at_default_lambda_fails_in_the_first_stage() {
    let p = PatternSpec::Translational(ap3_translational().unwrap());
    let schedule = geometric_schedule(&ConstructionParams::new(16, 0.45, 3), 3, 2.0);
    match salem_iterate(&p, &schedule, 2048, &IterationOptions::default()) {
        Err(Error::Stage { stage: 0, source }) => {
            assert!(matches!(*source, Error::Construction { .. }))
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn iteration_avoids_a_rough_pattern_at_every_stage() {
    // pairs at distance 1/2, rasterized
    let g = 1u64 << 14;
    let pts = (0..2 * g).map(|i| {
        let x = i as f64 / (2 * g) as f64;
        vec![x, x + 0.5]
    });
    let z = RoughPattern::rasterize(2, 1, g, pts, 1.0).unwrap();
    let p = PatternSpec::Rough(z);
    let schedule = geometric_schedule(&ConstructionParams::new(32, 0.4, 3), 3, 4.0);
    let grid = 1 << 20;
    let out = salem_iterate(&p, &schedule, grid, &IterationOptions::default()).unwrap();
    assert_eq!(out.len(), 3);
    let mut prev = GridMeasure::uniform(1, grid).unwrap();
    for s in &out {
        assert_eq!(s.violations, 0, "stage {}", s.stage);
        let mu = s.measure.as_ref().unwrap();
        assert!((mu.mass() - 1.0).abs() < 1e-9);
        assert!(mu.density().iter().all(|&v| v >= 0.0));
        // stage seminorms recompute from the stored grids
        let again = field_difference(mu, &prev).unwrap().seminorm(0.45, s.diagnostics.xi_max).unwrap();
        assert_eq!(again.value, s.diagnostics.seminorms[0].mu_minus_mu0.value);
        assert_eq!(s.within_delta0, again.value <= 1.0);
        prev = mu.clone();
    }
    let last = out.last().unwrap().measure.as_ref().unwrap();
    let first = out[0].measure.as_ref().unwrap();
    // supports are nested up to one cell
    let (lm, fm) = (1e-9 * last.mass(), 1e-9 * first.mass());
    let on = |m: &GridMeasure, level: f64, c: usize| m.density()[c % grid] > level;
    for c in 0..grid {
        if on(last, lm, c) {
            assert!((0..3).any(|k| on(first, fm, c + grid - 1 + k)), "cell {c}");
        }
    }
}

#[test]
fn schedule_must_shrink() {
    let z = RoughPattern::empty(3, 1, 8).unwrap();
    let p = ConstructionParams::new(64, 0.9, 1);
    let err = salem_iterate(&PatternSpec::Rough(z), &[p.clone(), p], 2048, &IterationOptions::default());
    assert!(matches!(err, Err(Error::Input(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn seminorm_monotone_in_box(seed in 0u64..500, lambda in 0.0f64..3.0, a in 1i64..20, b in 1i64..20) {
        let mu = random_measure(1, 64, seed);
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(seminorm(&mu, lambda, lo).unwrap().value <= seminorm(&mu, lambda, hi).unwrap().value);
    }

    #[test]
    fn fast_transform_matches_direct(seed in 0u64..500, k in -31i64..32) {
        let mu = random_measure(1, 64, seed);
        let xi = Frequency(vec![k]);
        prop_assert!((mu.transform(&xi).unwrap() - mu.transform_direct(&xi).unwrap()).norm() < 1e-9);
    }
}
