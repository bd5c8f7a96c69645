use rand::Rng;

use super::{
    assemble, construction_failure, incidence_index_set, sample_stratum_in, Region, uniform_in_cube,
    CandidateSet, ConstructionParams, Provenance, WeightedConfiguration,
};
use crate::error::Result;
use crate::patterns::{scan_coords, PatternSpec, SurfacePattern};
use crate::torus::TorusCube;

/// Smooth step from 0 at `t <= 0` to 1 at `t >= 1`, with `h(t) + h(1-t) = 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Tensor bump equal to 1 on `1.5 R`, 0 off `2 R`, smooth in between.
/// Integrates to `(1.75 s)^d` for sidelength `s`.
pub fn smooth_bump(cube: &TorusCube, x: &[f64]) -> f64 {
    let s = cube.side;
    x.iter()
        .zip(cube.center.coords())
        .map(|(&a, &c)| {
            let u = crate::torus::signed_gap(a, c).abs();
            smooth_step((s - u) / (0.25 * s))
        })
        .product()
}

/// `ψ_i(x)` for `i ≥ 1`, and the residual `ψ_0 = 1 - Σ ψ_i` for `i = 0`.
pub fn partition_weight(cubes: &[TorusCube], stratum: usize, x: &[f64]) -> f64 {
    if stratum == 0 {
        let s: f64 = cubes.iter().map(|q| smooth_bump(q, x)).sum();
        (1.0 - s).max(0.0)
    } else {
        smooth_bump(&cubes[stratum - 1], x)
    }
}

/// Stratified sampling from the partition of unity; stratum-`n` candidates
/// within `2 sqrt(n) (L+1) r` of `f` evaluated on the other strata are
/// dropped.
pub fn build_surface(
    params: &ConstructionParams,
    p: &SurfacePattern,
) -> Result<WeightedConfiguration> {
    build_surface_in(params, p, None)
}

pub(crate) fn build_surface_in(
    params: &ConstructionParams,
    p: &SurfacePattern,
    region: Option<Region>,
) -> Result<WeightedConfiguration> {
    let set = surface_candidates_in(params, p, region)?;
    let (n, d, m, r) = (p.arity(), p.dim(), params.m, set.radius);
    let threshold = set.threshold;
    let removed = set.removed.clone();
    let pattern = PatternSpec::Surface(p.clone());
    if m - removed.len() < m.div_ceil(2) {
        return Err(construction_failure(
            format!(
                "{} of {m} stratum-{n} candidates removed; fewer than M/2 remain",
                removed.len()
            ),
            m,
            removed.len(),
            r,
            threshold,
        ));
    }

    let prov = Provenance {
        pattern: "surface".into(),
        params: params.clone(),
        candidates: m,
        threshold,
        removal_fraction: Some(removed.len() as f64 / m as f64),
        removal_ci: Some(super::wilson_interval(removed.len(), m)),
        ..Default::default()
    };
    let cfg = assemble(d, set.strata, &removed, set.stratum_weights, r, prov);

    let margin = (n as f64).sqrt() * (p.lipschitz() + 1.0) * r;
    let leftover = scan_coords(
        cfg.coords(),
        d,
        &pattern,
        params.separation_s,
        margin,
        params.budget,
    );
    if !leftover.is_empty() {
        return Err(construction_failure(
            format!(
                "post-filter scan found {} tuples within the surface margin",
                leftover.len()
            ),
            m,
            removed.len(),
            r,
            threshold,
        ));
    }
    Ok(cfg)
}

/// The strata and incidence set behind [`build_surface`], whatever the
/// number of removals.
pub fn surface_candidates(params: &ConstructionParams, p: &SurfacePattern) -> Result<CandidateSet> {
    surface_candidates_in(params, p, None)
}

fn surface_candidates_in(
    params: &ConstructionParams,
    p: &SurfacePattern,
    region: Option<Region>,
) -> Result<CandidateSet> {
    params.validate()?;
    let (n, d, m) = (p.arity(), p.dim(), params.m);
    let r = params.radius()?;
    let cubes = p.cubes().to_vec();

    let mut strata = Vec::with_capacity(n + 1);
    strata.push(sample_stratum_in(params.seed, 0, m, d, region, |rng, x| loop {
        super::uniform_point(rng, x);
        if rng.gen::<f64>() < partition_weight(&cubes, 0, x) {
            return;
        }
    })?);
    for i in 1..=n {
        let q = cubes[i - 1].scaled(2.0);
        let cube = &cubes[i - 1];
        strata.push(sample_stratum_in(params.seed, i as u32, m, d, region, |rng, x| loop {
            uniform_in_cube(&q, rng, x);
            if rng.gen::<f64>() < smooth_bump(cube, x) {
                return;
            }
        })?);
    }

    let flat: Vec<f64> = strata[1..].concat();
    let slots: Vec<Vec<usize>> = (0..n).map(|i| (i * m..(i + 1) * m).collect()).collect();
    let threshold = 2.0 * (n as f64).sqrt() * (p.lipschitz() + 1.0) * r;
    let pattern = PatternSpec::Surface(p.clone());
    let removed: Vec<usize> =
        incidence_index_set(&flat, d, slots, &pattern, threshold, params.budget)?
            .into_iter()
            .map(|k| k - (n - 1) * m)
            .collect();

    let mut weights = vec![0.0; n + 1];
    let mut inner = 0.0;
    for i in 1..=n {
        weights[i] = (1.75 * cubes[i - 1].side).powi(d as i32);
        inner += weights[i];
    }
    weights[0] = 1.0 - inner;
    Ok(CandidateSet {
        dim: d,
        strata,
        removed,
        stratum_weights: weights,
        radius: r,
        threshold,
        cubes,
    })
}
