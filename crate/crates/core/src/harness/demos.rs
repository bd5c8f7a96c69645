use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Aggregate, TrialRow};
use crate::error::{Error, Result};
use crate::patterns::{
    isosceles_functional, isosceles_parabola, linear_equation_patterns, parabola, reflect_on_parabola,
    violation_scan, PatternSpec, RoughPattern, SurfacePattern,
};
use crate::sampler::{build_avoiding_all, build_within, ConstructionParams, WeightedConfiguration};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub demo: String,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
    pub details: serde_json::Value,
}

impl DemoReport {
    /// Every trial built and every scan came back empty.
    pub fn passed(&self) -> bool {
        self.aggregate.failed == 0 && self.aggregate.avoiding == self.aggregate.trials
    }
}

fn fresh_row(params: &ConstructionParams, t: usize) -> (ConstructionParams, TrialRow) {
    let mut p = params.clone();
    p.seed = params.seed.wrapping_add(t as u64);
    let row = TrialRow::new(t, p.seed);
    (p, row)
}

fn record_build(row: &mut TrialRow, c: &WeightedConfiguration) {
    row.ok = true;
    row.n_points = c.len();
    row.candidates = c.provenance.candidates;
    row.removed = c.removed_count();
    row.p_hat = c.provenance.removal_fraction;
}

/// Avoids `m_1 x_1 + ... + m_n x_n = s` for every nonzero integer vector with
/// `|m_i| ≤ coeff_bound` and every `s ∈ S`, then rescans each equation at
/// margin 0. `coeff_bound` is the finite truncation of the countable family.
pub fn demo_linear_equations(
    n: usize,
    dim: usize,
    coeff_bound: i64,
    set_s: &[Vec<f64>],
    params: &ConstructionParams,
    trials: usize,
) -> Result<DemoReport> {
    if trials == 0 {
        return Err(Error::input("trial count must be at least 1"));
    }
    let eqs = linear_equation_patterns(n, dim, coeff_bound, set_s)?;
    let specs: Vec<PatternSpec> = eqs.iter().map(|(_, p)| PatternSpec::Translational(p.clone())).collect();
    let results: Vec<(TrialRow, Vec<usize>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let (p, mut row) = fresh_row(params, t);
            let mut per_eq = vec![0; specs.len()];
            match build_avoiding_all(&p, &specs) {
                Ok(c) => {
                    record_build(&mut row, &c);
                    for (slot, spec) in per_eq.iter_mut().zip(&specs) {
                        *slot = violation_scan(&c, spec, p.separation_s, 0.0).len();
                    }
                    row.scan_violations = Some(per_eq.iter().sum());
                }
                Err(e) => row.fail(&e),
            }
            (row, per_eq)
        })
        .collect();
    let mut totals = vec![0usize; specs.len()];
    let mut rows = Vec::with_capacity(trials);
    for (row, per_eq) in results {
        for (t, v) in totals.iter_mut().zip(per_eq) {
            *t += v;
        }
        rows.push(row);
    }
    let violating: Vec<_> = eqs
        .iter()
        .zip(&totals)
        .filter(|(_, &v)| v > 0)
        .map(|((eq, _), &v)| json!({"coeffs": eq.coeffs, "s": eq.s, "violations": v}))
        .collect();
    let aggregate = Aggregate::from_rows(&rows);
    Ok(DemoReport {
        demo: "linear-eq".into(),
        rows,
        aggregate,
        details: json!({
            "n": n,
            "dim": dim,
            "coeff_bound": coeff_bound,
            "S": set_s,
            "equations": eqs.len(),
            "violating_equations": violating,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    /// `t -> (t, t^2)`.
    Parabola,
    /// `t -> (t, 0)`: every equally spaced triple is isosceles.
    Line,
}

impl Curve {
    pub fn point(self, t: f64) -> Vec<f64> {
        match self {
            Curve::Parabola => parabola(t),
            Curve::Line => vec![t, 0.0],
        }
    }

    /// The `t` on the far side of `apex` from `other` at the same distance
    /// along the curve's chord.
    pub fn reflect(self, apex: f64, other: f64) -> f64 {
        match self {
            Curve::Parabola => reflect_on_parabola(apex, other),
            Curve::Line => 2.0 * apex - other,
        }
    }

    fn lipschitz(self) -> f64 {
        match self {
            Curve::Parabola => 2.5,
            Curve::Line => 5f64.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IsoscelesRoute {
    /// Windowed surface solving for `t_1` from `(t_2, t_3)`.
    Surface,
    /// Zero set of the functional on `[0, ε]^3` rasterized at `resolution`
    /// cells per axis, avoided as a rough pattern.
    Rough { resolution: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IsoscelesOptions {
    pub params: ConstructionParams,
    pub trials: usize,
}

impl Default for IsoscelesOptions {
    fn default() -> Self {
        IsoscelesOptions {
            params: ConstructionParams::new(512, 4.0 / 9.0, 0),
            trials: 1,
        }
    }
}

/// Samples per cell side when rasterizing the zero set.
const RASTER_OVERSAMPLE: u64 = 8;

fn rough_zero_set(curve: Curve, epsilon: f64, resolution: u64) -> Result<RoughPattern> {
    let steps = ((epsilon * resolution as f64).ceil() as u64 * RASTER_OVERSAMPLE).max(2);
    let h = epsilon / steps as f64;
    let mut pts = Vec::new();
    for a in 0..=steps {
        let apex = a as f64 * h;
        for b in 0..=steps {
            let other = b as f64 * h;
            let t1 = curve.reflect(apex, other);
            if (0.0..=epsilon).contains(&t1) {
                pts.push(vec![t1, apex, other]);
            }
        }
    }
    RoughPattern::rasterize(3, 1, resolution, pts, 2.0)
}

/// Smallest `|F(t_i, t_j, t_k)|` over retained triples in `[0, epsilon]`
/// with apex `t_j` and pairwise separation at least `separation`, with the
/// minimizing indices. `None` when no such triple exists.
pub fn min_isosceles_functional(
    curve: Curve,
    coords: &[f64],
    separation: f64,
    epsilon: f64,
) -> Option<(f64, [usize; 3])> {
    let idx: Vec<usize> = (0..coords.len()).filter(|&k| (0.0..=epsilon).contains(&coords[k])).collect();
    let gamma = move |t: f64| curve.point(t);
    let far = |u: usize, v: usize| (coords[u] - coords[v]).abs() >= separation;
    idx.par_iter()
        .filter_map(|&j| {
            let mut best: Option<(f64, [usize; 3])> = None;
            for (a, &i) in idx.iter().enumerate() {
                if i == j || !far(i, j) {
                    continue;
                }
                for &k in &idx[a + 1..] {
                    if k == j || !far(k, j) || !far(i, k) {
                        continue;
                    }
                    let f = isosceles_functional(&gamma, coords[i], coords[j], coords[k]).abs();
                    if best.map_or(true, |(b, _)| f < b) {
                        best = Some((f, [i, j, k]));
                    }
                }
            }
            best
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
}

/// Builds avoiding isosceles triangles on `curve` inside `[0, ε]`, then
/// checks the smallest `|F|` over retained triples and rescans at margin 0.
pub fn demo_isosceles(curve: Curve, route: IsoscelesRoute, opts: &IsoscelesOptions) -> Result<DemoReport> {
    if opts.trials == 0 {
        return Err(Error::input("trial count must be at least 1"));
    }
    let setup = isosceles_parabola()?;
    let epsilon = setup.epsilon;
    let pattern = match route {
        IsoscelesRoute::Surface => {
            let f = Arc::new(move |x: &[f64]| vec![curve.reflect(x[0], x[1])]);
            let cubes = setup.pattern.cubes().to_vec();
            PatternSpec::Surface(SurfacePattern::new(3, 1, cubes, f, curve.lipschitz())?)
        }
        IsoscelesRoute::Rough { resolution } => {
            if resolution < 2 {
                return Err(Error::input("rasterization resolution must be at least 2"));
            }
            PatternSpec::Rough(rough_zero_set(curve, epsilon, resolution)?)
        }
    };
    let inside = move |x: &[f64]| (0.0..=epsilon).contains(&x[0]);
    let results: Vec<(TrialRow, Option<f64>)> = (0..opts.trials)
        .into_par_iter()
        .map(|t| {
            let (p, mut row) = fresh_row(&opts.params, t);
            let region: Option<crate::sampler::Region> = match route {
                IsoscelesRoute::Surface => None,
                IsoscelesRoute::Rough { .. } => Some(&inside),
            };
            match build_within(&p, &pattern, region) {
                Ok(c) => {
                    record_build(&mut row, &c);
                    let scan = violation_scan(&c, &pattern, p.separation_s, 0.0).len();
                    let min_f = min_isosceles_functional(curve, c.coords(), p.separation_s, epsilon);
                    let zero_hit = min_f.is_some_and(|(f, _)| f == 0.0);
                    row.scan_violations = Some(scan + usize::from(zero_hit));
                    (row, min_f.map(|(f, _)| f))
                }
                Err(e) => {
                    row.fail(&e);
                    (row, None)
                }
            }
        })
        .collect();
    let (rows, mins): (Vec<TrialRow>, Vec<Option<f64>>) = results.into_iter().unzip();
    let overall = mins.iter().flatten().copied().min_by(f64::total_cmp);
    let aggregate = Aggregate::from_rows(&rows);
    Ok(DemoReport {
        demo: "isosceles".into(),
        rows,
        aggregate,
        details: json!({
            "curve": curve,
            "route": route,
            "epsilon": epsilon,
            "C": setup.c,
            "min_abs_f": overall,
            "per_trial_min_abs_f": mins,
        }),
    })
}
