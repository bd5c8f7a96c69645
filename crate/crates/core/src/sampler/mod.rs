//! Randomized pattern-avoiding constructions.
//!
//! Each builder samples candidates, finds the incidence index set `I` of
//! candidates closing a near-occurrence of the pattern, drops them, and
//! returns the survivors with weights.

mod joint;
mod rough;
mod surface;
mod translational;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::{search_tuples, PatternSpec, SearchOptions, Slots, DEFAULT_BUDGET};
use crate::expsum::frac_dot;
use crate::measures::{unit_phase, Neumaier};
use crate::torus::{Frequency, PointTable, TorusCube, TorusPoint};
use num_complex::Complex64;

pub use joint::build_avoiding_all;
pub use rough::build_rough;
pub use surface::{build_surface, partition_weight, smooth_bump, surface_candidates};
pub use translational::{build_translational, translational_candidates};

/// Acceptance test for candidate points.
pub type Region<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

/// Draws allowed per candidate before a region counts as missed.
pub const REGION_ATTEMPTS: usize = 1 << 16;

/// Runs the builder matching the pattern kind.
pub fn build(params: &ConstructionParams, pattern: &PatternSpec) -> Result<WeightedConfiguration> {
    build_within(params, pattern, None)
}

/// As [`build`], with every candidate redrawn until it lies in `region`.
/// Stratum weights keep their unrestricted volumes.
pub fn build_within(
    params: &ConstructionParams,
    pattern: &PatternSpec,
    region: Option<Region>,
) -> Result<WeightedConfiguration> {
    match pattern {
        PatternSpec::Rough(z) => rough::build_rough_in(params, z, region),
        PatternSpec::Surface(f) => surface::build_surface_in(params, f, region),
        PatternSpec::Translational(t) => translational::build_translational_in(params, t, region),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstructionParams {
    #[serde(rename = "M")]
    pub m: usize,
    pub lambda: f64,
    pub kappa: f64,
    pub delta: f64,
    pub seed: u64,
    pub separation_s: f64,
    pub budget: u64,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        ConstructionParams {
            m: 2048,
            lambda: 0.45,
            kappa: 0.2,
            delta: 0.0,
            seed: 0,
            separation_s: 1e-9,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl ConstructionParams {
    pub fn new(m: usize, lambda: f64, seed: u64) -> Self {
        ConstructionParams {
            m,
            lambda,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::input("M must be at least 2"));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::input("lambda must be positive"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::input("kappa must be positive"));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::input("delta must be nonnegative"));
        }
        if !(self.separation_s > 0.0) {
            return Err(Error::input("separation_s must be positive"));
        }
        Ok(())
    }

    pub fn radius(&self) -> Result<f64> {
        derive_radius(self.m, self.lambda)
    }
}

/// Record of how a configuration was produced.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub pattern: String,
    pub params: ConstructionParams,
    pub candidates: usize,
    pub threshold: f64,
    /// Per-stratum weights before the common rescaling, stratum 0 first.
    pub stratum_weights: Vec<f64>,
    /// Common factor applied so that the weights sum to `N`.
    pub weight_scale: f64,
    pub removal_fraction: Option<f64>,
    pub removal_ci: Option<(f64, f64)>,
    pub warnings: Vec<String>,
}

/// Stratified candidates of one build with the incidence set `I` of the last
/// stratum, before the pass/fail decision.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub dim: usize,
    /// Flat coordinates per stratum, stratum 0 first.
    pub strata: Vec<Vec<f64>>,
    /// Indices into the last stratum.
    pub removed: Vec<usize>,
    /// `A_0, ..., A_n` before any rescaling.
    pub stratum_weights: Vec<f64>,
    pub radius: f64,
    pub threshold: f64,
    /// The cubes `R_1, ..., R_n`.
    pub cubes: Vec<TorusCube>,
}

/// `G`, `H` and a direct `F` at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSums {
    /// Sum over every candidate.
    pub g: Complex64,
    /// Sum over the removed candidates of the last stratum.
    pub h: Complex64,
    /// Sum over the retained candidates, computed on its own.
    pub f: Complex64,
}

impl CandidateSet {
    /// Candidates per stratum.
    pub fn per_stratum(&self) -> usize {
        self.strata[0].len() / self.dim
    }

    pub fn removal_fraction(&self) -> f64 {
        self.removed.len() as f64 / self.per_stratum().max(1) as f64
    }

    /// Unnormalized sums `Σ A_i e^{2πi ξ·x}` with compensated accumulation.
    pub fn split_sums(&self, xi: &Frequency) -> Result<SplitSums> {
        if xi.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: xi.dim(),
            });
        }
        let last = self.strata.len() - 1;
        let mut dropped = vec![false; self.per_stratum()];
        for &k in &self.removed {
            dropped[k] = true;
        }
        let (mut g, mut h, mut f) = (Acc::default(), Acc::default(), Acc::default());
        for (i, pts) in self.strata.iter().enumerate() {
            let a = self.stratum_weights[i];
            for (k, x) in pts.chunks_exact(self.dim).enumerate() {
                let z = unit_phase(frac_dot(&xi.0, x)) * a;
                g.add(z);
                if i == last && dropped[k] {
                    h.add(z);
                } else {
                    f.add(z);
                }
            }
        }
        Ok(SplitSums {
            g: g.total(),
            h: h.total(),
            f: f.total(),
        })
    }
}

#[derive(Default)]
struct Acc {
    re: Neumaier,
    im: Neumaier,
}

impl Acc {
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn total(&self) -> Complex64 {
        Complex64::new(self.re.total(), self.im.total())
    }
}

/// Finite weighted point set with nominal radius `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedConfiguration {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    strata: Vec<u32>,
    radius: f64,
    removed_count: usize,
    pub provenance: Provenance,
}

impl WeightedConfiguration {
    pub fn new(dim: usize, coords: Vec<f64>, weights: Vec<f64>, radius: f64) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::input(
                "coordinate array is not a whole number of points",
            ));
        }
        let n = coords.len() / dim;
        if weights.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::input("weights must be finite and nonnegative"));
        }
        if !(radius > 0.0) {
            return Err(Error::input("radius must be positive"));
        }
        let coords = coords.into_iter().map(crate::torus::wrap).collect();
        Ok(WeightedConfiguration {
            dim,
            coords,
            weights,
            strata: vec![0; n],
            radius,
            removed_count: 0,
            provenance: Provenance::default(),
        })
    }

    /// Unit-weight configuration.
    pub fn uniform_weights(dim: usize, coords: Vec<f64>, radius: f64) -> Result<Self> {
        let n = if dim == 0 { 0 } else { coords.len() / dim };
        Self::new(dim, coords, vec![1.0; n], radius)
    }

    pub fn from_table(table: &PointTable, radius: f64) -> Result<Self> {
        let w = table
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; table.len()]);
        Self::new(table.dim, table.coords.clone(), w, radius)
    }

    pub fn to_table(&self) -> PointTable {
        PointTable {
            dim: self.dim,
            coords: self.coords.clone(),
            weights: Some(self.weights.clone()),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> Vec<TorusPoint> {
        (0..self.len())
            .map(|k| TorusPoint::new(self.point(k).to_vec()).expect("stored coordinates are valid"))
            .collect()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Stratum label of each point (0 for unstratified builders).
    pub fn strata(&self) -> &[u32] {
        &self.strata
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn removed_count(&self) -> usize {
        self.removed_count
    }

    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    /// Same points with every coordinate shifted by `t`.
    pub fn translated(&self, t: &[f64]) -> Self {
        let mut out = self.clone();
        for (k, c) in out.coords.iter_mut().enumerate() {
            *c = crate::torus::wrap(*c + t[k % self.dim]);
        }
        out
    }

    /// Checks `Σ a ≥ N/2` and `N ≥ r^{-λ}/2`.
    pub fn check_hypotheses(&self, lambda: f64) -> Result<()> {
        let n = self.len() as f64;
        if self.weight_sum() < n / 2.0 * (1.0 - 1e-12) {
            return Err(Error::input(format!(
                "weight sum {} below N/2 = {}",
                self.weight_sum(),
                n / 2.0
            )));
        }
        let need = 0.5 * self.radius.powf(-lambda);
        if n < need * (1.0 - 1e-9) {
            return Err(Error::input(format!("N = {n} below r^-lambda/2 = {need}")));
        }
        Ok(())
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "d": self.dim,
            "N": self.len(),
            "r": self.radius,
            "removed_count": self.removed_count,
            "weight_sum": self.weight_sum(),
            "P_hat": self.provenance.removal_fraction,
            "P_hat_ci95": self.provenance.removal_ci,
            "provenance": self.provenance,
        })
    }
}

/// `r = M^{-1/λ}`, so that `r^{-λ} = M`.
pub fn derive_radius(m: usize, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::input("lambda must be positive"));
    }
    if m < 2 {
        return Err(Error::input("M must be at least 2"));
    }
    let r = (m as f64).powf(-1.0 / lambda);
    let back = r.powf(-lambda);
    let (lo, hi) = (m as f64 - 1.0, m as f64);
    if back < lo * (1.0 - 1e-12) || back > hi * (1.0 + 1e-12) {
        return Err(Error::Resource(format!(
            "radius {r:e} underflows for M = {m}, lambda = {lambda}"
        )));
    }
    Ok(r)
}

/// Generator for one sampled point, independent of scheduling.
pub fn point_rng(seed: u64, stratum: u32, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stratum as u64) << 40) | index as u64);
    rng
}

#[cfg(test)]
/// `count` points of stratum `stratum`, each drawn by `draw` from its own stream.
pub(crate) fn sample_stratum<F>(
    seed: u64,
    stratum: u32,
    count: usize,
    dim: usize,
    draw: F,
) -> Vec<f64>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    sample_stratum_in(seed, stratum, count, dim, None, draw).expect("unrestricted draw")
}

/// As [`sample_stratum`], redrawing until each point lies in `region`.
pub(crate) fn sample_stratum_in<F>(
    seed: u64,
    stratum: u32,
    count: usize,
    dim: usize,
    region: Option<Region>,
    draw: F,
) -> Result<Vec<f64>>
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let mut out = vec![0.0; count * dim];
    let missed = out
        .par_chunks_mut(dim)
        .enumerate()
        .map(|(k, x)| {
            let mut rng = point_rng(seed, stratum, k);
            for _ in 0..REGION_ATTEMPTS {
                draw(&mut rng, x);
                if region.map_or(true, |f| f(x)) {
                    return 0usize;
                }
            }
            1
        })
        .sum::<usize>();
    if missed > 0 {
        return Err(Error::DegenerateOverlap { mass: 0.0 });
    }
    Ok(out)
}

pub(crate) fn uniform_point(rng: &mut ChaCha8Rng, x: &mut [f64]) {
    for c in x.iter_mut() {
        *c = rng.gen::<f64>();
    }
}

pub(crate) fn uniform_in_cube(q: &TorusCube, rng: &mut ChaCha8Rng, x: &mut [f64]) {
    for (c, lo) in x.iter_mut().zip(q.lower()) {
        *c = crate::torus::wrap(lo + q.side * rng.gen::<f64>());
    }
}

/// Indices `k_n` of the last slot for which some index-distinct
/// `(k_1, ..., k_{n-1})`, one per slot, completes a tuple satisfying the
/// pattern within `threshold`. `slots[i]` lists candidate indices (into
/// `coords`) for tuple position `i`. Sorted ascending.
pub fn incidence_index_set(
    coords: &[f64],
    dim: usize,
    slots: Vec<Vec<usize>>,
    pattern: &PatternSpec,
    threshold: f64,
    budget: u64,
) -> Result<Vec<usize>> {
    if !(threshold > 0.0) {
        return Err(Error::input("incidence threshold must be positive"));
    }
    if dim != pattern.dim() {
        return Err(Error::DimensionMismatch {
            expected: pattern.dim(),
            got: dim,
        });
    }
    if slots.len() != pattern.arity() {
        return Err(Error::input(format!(
            "{} slots for a pattern of arity {}",
            slots.len(),
            pattern.arity()
        )));
    }
    let slots = Slots {
        coords,
        dim,
        members: slots,
    };
    let opts = SearchOptions {
        tol: threshold,
        separation: None,
        budget,
        strict_budget: true,
    };
    let found = search_tuples(pattern, &slots, &opts, true)?;
    Ok(found.into_iter().map(|t| t[0]).collect())
}

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054;
    let n = n as f64;
    let p = k as f64 / n;
    let denom = 1.0 + z * z / n;
    let center = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub(crate) fn construction_failure(
    reason: String,
    candidates: usize,
    removed: usize,
    radius: f64,
    threshold: f64,
) -> Error {
    Error::Construction {
        reason,
        diagnostics: Box::new(crate::error::ConstructionDiagnostics {
            candidates,
            removed,
            retained: candidates - removed,
            removal_fraction: removed as f64 / candidates.max(1) as f64,
            radius,
            threshold,
        }),
    }
}

/// Assembles the output of a stratified builder: strata `0..=n`, the last one
/// filtered by `removed` (indices local to that stratum). Weights are the
/// per-stratum values rescaled by one common factor so that they sum to `N`.
pub(crate) fn assemble(
    dim: usize,
    strata: Vec<Vec<f64>>,
    removed: &[usize],
    stratum_weights: Vec<f64>,
    radius: f64,
    provenance: Provenance,
) -> WeightedConfiguration {
    let last = strata.len() - 1;
    let mut keep_last = vec![true; strata[last].len() / dim];
    for &k in removed {
        keep_last[k] = false;
    }
    let mut coords = Vec::new();
    let mut labels = Vec::new();
    let mut raw = Vec::new();
    for (i, pts) in strata.iter().enumerate() {
        for (k, x) in pts.chunks_exact(dim).enumerate() {
            if i == last && !keep_last[k] {
                continue;
            }
            coords.extend_from_slice(x);
            labels.push(i as u32);
            raw.push(stratum_weights[i]);
        }
    }
    let total: f64 = raw.iter().sum();
    let scale = if total > 0.0 {
        raw.len() as f64 / total
    } else {
        1.0
    };
    let weights = raw.iter().map(|w| w * scale).collect();
    WeightedConfiguration {
        dim,
        coords,
        weights,
        strata: labels,
        radius,
        removed_count: removed.len(),
        provenance: Provenance {
            stratum_weights,
            weight_scale: scale,
            ..provenance
        },
    }
}

#[cfg(test)]
mod tests;
