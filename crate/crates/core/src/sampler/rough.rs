use super::{
    construction_failure, incidence_index_set, sample_stratum_in, uniform_point, ConstructionParams,
    Provenance, Region, WeightedConfiguration,
};
use crate::error::Result;
use crate::patterns::{scan_coords, PatternSpec, RoughPattern};

/// Uniform candidates with every `k_n` that closes a tuple within
/// `2 sqrt(n) r` of `Z` removed. Unit weights.
pub fn build_rough(params: &ConstructionParams, z: &RoughPattern) -> Result<WeightedConfiguration> {
    build_rough_in(params, z, None)
}

pub(crate) fn build_rough_in(
    params: &ConstructionParams,
    z: &RoughPattern,
    region: Option<Region>,
) -> Result<WeightedConfiguration> {
    params.validate()?;
    let (n, d, m) = (z.arity(), z.dim(), params.m);
    let r = params.radius()?;
    let mut warnings = Vec::new();
    let limit = ((d * n) as f64 - z.claimed_alpha) / (n as f64 - 0.5);
    if params.lambda >= limit {
        let msg = format!(
            "lambda {} is at or above (dn - alpha)/(n - 1/2) = {limit:.4}; removals may dominate",
            params.lambda
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let coords = sample_stratum_in(params.seed, 0, m, d, region, uniform_point)?;
    let pattern = PatternSpec::Rough(z.clone());
    let threshold = 2.0 * (n as f64).sqrt() * r;
    let all: Vec<usize> = (0..m).collect();
    let removed =
        incidence_index_set(&coords, d, vec![all; n], &pattern, threshold, params.budget)?;
    if m - removed.len() < m.div_ceil(2) {
        return Err(construction_failure(
            format!(
                "{} of {m} candidates removed; fewer than M/2 remain",
                removed.len()
            ),
            m,
            removed.len(),
            r,
            threshold,
        ));
    }

    let mut keep = vec![true; m];
    for &k in &removed {
        keep[k] = false;
    }
    let kept: Vec<f64> = coords
        .chunks_exact(d)
        .zip(&keep)
        .filter(|(_, &k)| k)
        .flat_map(|(x, _)| x.to_vec())
        .collect();

    let margin = (n as f64).sqrt() * r;
    let leftover = scan_coords(
        &kept,
        d,
        &pattern,
        params.separation_s,
        margin,
        params.budget,
    );
    if !leftover.is_empty() {
        return Err(construction_failure(
            format!(
                "post-filter scan found {} tuples within sqrt(n) r of Z",
                leftover.len()
            ),
            m,
            removed.len(),
            r,
            threshold,
        ));
    }

    let mut cfg = WeightedConfiguration::uniform_weights(d, kept, r)?;
    cfg.removed_count = removed.len();
    cfg.provenance = Provenance {
        pattern: "rough".into(),
        params: params.clone(),
        candidates: m,
        threshold,
        stratum_weights: vec![1.0],
        weight_scale: 1.0,
        removal_fraction: Some(removed.len() as f64 / m as f64),
        removal_ci: Some(super::wilson_interval(removed.len(), m)),
        warnings,
    };
    Ok(cfg)
}
