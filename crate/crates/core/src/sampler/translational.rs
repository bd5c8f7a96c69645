use super::{
    assemble, construction_failure, incidence_index_set, sample_stratum_in, Region, uniform_in_cube,
    wilson_interval, CandidateSet, ConstructionParams, Provenance, WeightedConfiguration,
};
use crate::error::{Error, Result};
use crate::patterns::{scan_coords, translational_layout, PatternSpec, TranslationalPattern};

/// Uniform strata on `Q_i = 2R_i` and on the complement of their union.
/// Stratum-`n` candidates whose offset `x_n - a x_{n-1}` lands within
/// `2 sqrt(n) (L+1) r` of the periodized targets are dropped. The removal
/// fraction `P̂` is common to all candidates by periodicity; strata
/// `0..n-1` carry `|Q_i| (1 - P̂)` and stratum `n` carries `|Q_n|`.
pub fn build_translational(
    params: &ConstructionParams,
    p: &TranslationalPattern,
) -> Result<WeightedConfiguration> {
    build_translational_in(params, p, None)
}

pub(crate) fn build_translational_in(
    params: &ConstructionParams,
    p: &TranslationalPattern,
    region: Option<Region>,
) -> Result<WeightedConfiguration> {
    let set = translational_candidates_in(params, p, region)?;
    let (n, d, m, r) = (p.arity(), p.dim(), params.m, set.radius);
    let threshold = set.threshold;
    let removed = set.removed.clone();
    let p_hat = set.removal_fraction();
    if p_hat > 0.5 {
        return Err(construction_failure(
            format!("removal fraction {p_hat:.4} exceeds 1/2"),
            m,
            removed.len(),
            r,
            threshold,
        ));
    }
    let cubes = set.cubes.clone();
    let weights = set.stratum_weights.clone();
    let strata = set.strata;
    let prov = Provenance {
        pattern: "translational".into(),
        params: params.clone(),
        candidates: m,
        threshold,
        removal_fraction: Some(p_hat),
        removal_ci: Some(wilson_interval(removed.len(), m)),
        ..Default::default()
    };
    let cfg = assemble(d, strata, &removed, weights, r, prov);

    let margin = (n as f64).sqrt() * (p.lipschitz() + 1.0) * r;
    let windowed = PatternSpec::Translational(p.clone().with_window(cubes)?);
    let leftover = scan_coords(
        cfg.coords(),
        d,
        &windowed,
        params.separation_s,
        margin,
        params.budget,
    );
    if !leftover.is_empty() {
        return Err(construction_failure(
            format!(
                "post-filter scan found {} tuples within the translational margin",
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

/// The strata and incidence set behind [`build_translational`], with the
/// stratum weights, whatever the removal fraction.
pub fn translational_candidates(
    params: &ConstructionParams,
    p: &TranslationalPattern,
) -> Result<CandidateSet> {
    translational_candidates_in(params, p, None)
}

fn translational_candidates_in(
    params: &ConstructionParams,
    p: &TranslationalPattern,
    region: Option<Region>,
) -> Result<CandidateSet> {
    params.validate()?;
    if !p.is_periodized() {
        return Err(Error::input(
            "translational builder needs a periodized pattern",
        ));
    }
    let (n, d, m) = (p.arity(), p.dim(), params.m);
    let r = params.radius()?;
    let cubes = match p.window() {
        Some(c) => c.to_vec(),
        None => translational_layout(n, d, p.coefficient().value(), p.period())?,
    };
    crate::patterns::check_cube_layout(&cubes, 10.0)?;
    let q: Vec<_> = cubes.iter().map(|c| c.scaled(2.0)).collect();

    let mut strata = Vec::with_capacity(n + 1);
    strata.push(sample_stratum_in(params.seed, 0, m, d, region, |rng, x| loop {
        super::uniform_point(rng, x);
        if !q.iter().any(|c| c.contains(x)) {
            return;
        }
    })?);
    for (i, qi) in q.iter().enumerate() {
        strata.push(sample_stratum_in(params.seed, i as u32 + 1, m, d, region, |rng, x| {
            uniform_in_cube(qi, rng, x)
        })?);
    }

    let flat: Vec<f64> = strata[1..].concat();
    let slots: Vec<Vec<usize>> = (0..n).map(|i| (i * m..(i + 1) * m).collect()).collect();
    let threshold = 2.0 * (n as f64).sqrt() * (p.lipschitz() + 1.0) * r;
    // the incidence search runs over the strata, not the scan window
    let pattern = PatternSpec::Translational(p.clone());
    let removed: Vec<usize> =
        incidence_index_set(&flat, d, slots, &pattern, threshold, params.budget)?
            .into_iter()
            .map(|k| k - (n - 1) * m)
            .collect();
    let p_hat = removed.len() as f64 / m as f64;

    let vol_q: Vec<f64> = q.iter().map(|c| c.volume()).collect();
    let complement = 1.0 - vol_q.iter().sum::<f64>();
    let mut weights = Vec::with_capacity(n + 1);
    weights.push(complement * (1.0 - p_hat));
    for v in &vol_q[..n - 1] {
        weights.push(v * (1.0 - p_hat));
    }
    weights.push(vol_q[n - 1]);
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
