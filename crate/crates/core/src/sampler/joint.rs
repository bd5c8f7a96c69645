use super::{
    construction_failure, incidence_index_set, sample_stratum_in, uniform_point, ConstructionParams,
    Provenance, WeightedConfiguration,
};
use crate::error::{Error, Result};
use crate::patterns::{scan_coords, PatternSpec};

/// Uniform unit-weight candidates with every index that closes a
/// near-occurrence of any of `patterns` removed. Each pattern uses its own
/// threshold `2 sqrt(q) (L+1) r`, with `q` its arity.
pub fn build_avoiding_all(
    params: &ConstructionParams,
    patterns: &[PatternSpec],
) -> Result<WeightedConfiguration> {
    params.validate()?;
    let Some(first) = patterns.first() else {
        return Err(Error::input("no patterns to avoid"));
    };
    let (d, m) = (first.dim(), params.m);
    if let Some(p) = patterns.iter().find(|p| p.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: p.dim(),
        });
    }
    let r = params.radius()?;
    let coords = sample_stratum_in(params.seed, 0, m, d, None, uniform_point)?;
    let all: Vec<usize> = (0..m).collect();
    let mut keep = vec![true; m];
    let mut largest = 0.0f64;
    for p in patterns {
        let q = p.arity();
        let threshold = 2.0 * (q as f64).sqrt() * (lipschitz(p) + 1.0) * r;
        largest = largest.max(threshold);
        for k in incidence_index_set(&coords, d, vec![all.clone(); q], p, threshold, params.budget)? {
            keep[k] = false;
        }
    }
    let removed = keep.iter().filter(|&&k| !k).count();
    if m - removed < m.div_ceil(2) {
        return Err(construction_failure(
            format!("{removed} of {m} candidates removed; fewer than M/2 remain"),
            m,
            removed,
            r,
            largest,
        ));
    }
    let kept: Vec<f64> = coords
        .chunks_exact(d)
        .zip(&keep)
        .filter(|(_, &k)| k)
        .flat_map(|(x, _)| x.to_vec())
        .collect();
    for p in patterns {
        let margin = (p.arity() as f64).sqrt() * (lipschitz(p) + 1.0) * r;
        let left = scan_coords(&kept, d, p, params.separation_s, margin, params.budget);
        if !left.is_empty() {
            return Err(construction_failure(
                format!("post-filter scan found {} tuples within the margin", left.len()),
                m,
                removed,
                r,
                largest,
            ));
        }
    }
    let mut cfg = WeightedConfiguration::uniform_weights(d, kept, r)?;
    cfg.removed_count = removed;
    cfg.provenance = Provenance {
        pattern: format!("joint({})", patterns.len()),
        params: params.clone(),
        candidates: m,
        threshold: largest,
        stratum_weights: vec![1.0],
        weight_scale: 1.0,
        removal_fraction: Some(removed as f64 / m as f64),
        removal_ci: Some(super::wilson_interval(removed, m)),
        warnings: Vec::new(),
    };
    Ok(cfg)
}

fn lipschitz(p: &PatternSpec) -> f64 {
    match p {
        PatternSpec::Rough(_) => 0.0,
        PatternSpec::Surface(s) => s.lipschitz(),
        PatternSpec::Translational(t) => t.lipschitz(),
    }
}
