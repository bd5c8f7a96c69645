//! Weighted exponential sums `(1/N) Σ a_k e^{2πi ξ·x_k}` over dyadic
//! frequency annuli, and the cancellation verdict.

mod enumerate;

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{better, unit_phase, GridMeasure, Mollifier, Neumaier};
use crate::sampler::WeightedConfiguration;
use crate::torus::Frequency;

pub use enumerate::Run;

/// Where annuli stop being enumerated exhaustively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnumerationOptions {
    /// Annuli with outer radius at most this are scanned in full (d ≥ 2).
    pub exhaustive_radius: u64,
    /// Annuli with outer radius at most this are scanned in full (d = 1).
    pub exhaustive_radius_1d: u64,
    /// Frequencies per sampled annulus.
    pub samples: usize,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions {
            exhaustive_radius: 1 << 12,
            exhaustive_radius_1d: 1 << 16,
            samples: 1 << 16,
        }
    }
}

/// Constants of the bound `C N^{-1/2} log N + δ |ξ|^{-λ/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepParams {
    pub kappa: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    pub lambda: f64,
    pub enumeration: EnumerationOptions,
    /// Cap on listed violations; the count is always exact.
    pub max_listed: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            kappa: 0.2,
            c: 4.0,
            delta: 0.0,
            lambda: 0.45,
            enumeration: EnumerationOptions::default(),
            max_listed: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusRecord {
    pub j: u32,
    /// `lo ≤ |ξ| < hi`, further capped at the sweep range.
    pub lo: f64,
    pub hi: f64,
    pub scanned: u64,
    pub exhaustive: bool,
    pub sup: f64,
    pub argmax: Frequency,
    /// Largest `|sum| / bound` seen in the annulus.
    pub worst_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub xi: Frequency,
    pub value: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    #[serde(rename = "N")]
    pub n: usize,
    pub kappa: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub delta: f64,
    pub lambda: f64,
    pub dim: usize,
    /// `N^{1+κ}`
    pub xi_max: f64,
    /// `(1/r)^{1+κ}`, logged for comparison only.
    pub xi_max_from_radius: Option<f64>,
    pub annuli: Vec<AnnulusRecord>,
    pub verdict: bool,
    pub violation_count: u64,
    pub violations: Vec<Violation>,
    /// Largest `|S(-ξ) - conj S(ξ)|` over the spot-checked frequencies.
    pub conjugate_symmetry_error: f64,
    /// Largest `|sum| √N / log N` seen; the empirical constant.
    pub empirical_constant: f64,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per annulus: `j, lo, hi, scanned, exhaustive, sup, xi_0, ..`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "j".to_string(),
            "lo".into(),
            "hi".into(),
            "scanned".into(),
            "exhaustive".into(),
            "sup".into(),
        ];
        header.extend((0..self.dim).map(|i| format!("argmax_{i}")));
        out.write_record(&header)?;
        for a in &self.annuli {
            let mut row = vec![
                a.j.to_string(),
                a.lo.to_string(),
                a.hi.to_string(),
                a.scanned.to_string(),
                a.exhaustive.to_string(),
                format!("{:e}", a.sup),
            ];
            row.extend(a.argmax.0.iter().map(|k| k.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `(1/N) Σ_k a_k e^{2πi ξ·x_k}` with compensated accumulation.
pub fn weighted_exp_sum(config: &WeightedConfiguration, xi: &Frequency) -> Result<Complex64> {
    if xi.dim() != config.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            got: xi.dim(),
        });
    }
    let mut re = Neumaier::default();
    let mut im = Neumaier::default();
    for k in 0..config.len() {
        let z = unit_phase(frac_dot(&xi.0, config.point(k))) * config.weights()[k];
        re.add(z.re);
        im.add(z.im);
    }
    let n = config.len().max(1) as f64;
    Ok(Complex64::new(re.total() / n, im.total() / n))
}

/// Fractional part of `ξ·x`, each product split exactly with an FMA.
pub(crate) fn frac_dot(xi: &[i64], x: &[f64]) -> f64 {
    let mut hi = 0.0;
    let mut lo = 0.0;
    for (&k, &c) in xi.iter().zip(x) {
        let kf = k as f64;
        let p = kf * c;
        let e = kf.mul_add(c, -p);
        hi += p - p.round();
        lo += e;
    }
    let t = hi + lo;
    t - t.round()
}

/// Anything whose transform can be scanned over annuli.
#[derive(Debug, Clone, Copy)]
pub enum SpectralSource<'a> {
    Config(&'a WeightedConfiguration),
    /// The configuration's measure convolved with `φ_radius`.
    Mollified(&'a WeightedConfiguration, f64),
    /// `|μ̂| / μ(T^d)`.
    Grid(&'a GridMeasure),
}

impl SpectralSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            SpectralSource::Config(c) | SpectralSource::Mollified(c, _) => c.dim(),
            SpectralSource::Grid(g) => g.dim(),
        }
    }

    /// Largest `|ξ_j|` the source answers for.
    pub fn band(&self) -> Option<i64> {
        match self {
            SpectralSource::Grid(g) => Some(g.band()),
            _ => None,
        }
    }
}

/// Evaluates a run of frequencies `start + t e_last`, `t < len`.
pub(crate) trait RunEvaluator: Sync {
    fn dim(&self) -> usize;
    fn eval_run(&self, start: &[i64], len: usize, out: &mut Vec<f64>);
}

/// Point sums with a per-point phase recurrence along the last axis.
pub(crate) struct ConfigEvaluator<'a> {
    config: &'a WeightedConfiguration,
    step: Vec<Complex64>,
    mollify: Option<f64>,
}

const LANES: usize = 8;

impl<'a> ConfigEvaluator<'a> {
    pub(crate) fn new(config: &'a WeightedConfiguration, mollify: Option<f64>) -> Self {
        let d = config.dim();
        let step = (0..config.len()).map(|k| unit_phase(config.point(k)[d - 1])).collect();
        ConfigEvaluator { config, step, mollify }
    }
}

impl RunEvaluator for ConfigEvaluator<'_> {
    fn dim(&self) -> usize {
        self.config.dim()
    }

    fn eval_run(&self, start: &[i64], len: usize, out: &mut Vec<f64>) {
        let n = self.config.len();
        let w = self.config.weights();
        let mut re = vec![Neumaier::default(); len];
        let mut im = vec![Neumaier::default(); len];
        let mut part = vec![Complex64::new(0.0, 0.0); len];
        let mut z = [Complex64::new(0.0, 0.0); LANES];
        let mut s = [Complex64::new(0.0, 0.0); LANES];
        for base in (0..n).step_by(LANES) {
            let m = LANES.min(n - base);
            for l in 0..LANES {
                if l < m {
                    let k = base + l;
                    z[l] = unit_phase(frac_dot(start, self.config.point(k))) * w[k];
                    s[l] = self.step[k];
                } else {
                    z[l] = Complex64::new(0.0, 0.0);
                    s[l] = Complex64::new(1.0, 0.0);
                }
            }
            for p in part.iter_mut() {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..LANES {
                    acc += z[l];
                    z[l] *= s[l];
                }
                *p = acc;
            }
            for t in 0..len {
                re[t].add(part[t].re);
                im[t].add(part[t].im);
            }
        }
        let inv = 1.0 / n.max(1) as f64;
        out.clear();
        let m = Mollifier::new(self.dim());
        let mut xi = start.to_vec();
        for t in 0..len {
            let mut v = Complex64::new(re[t].total(), im[t].total()).norm() * inv;
            if let Some(r) = self.mollify {
                *xi.last_mut().unwrap() = start[start.len() - 1] + t as i64;
                v *= m.hat(&xi, r).abs();
            }
            out.push(v);
        }
    }
}

struct GridEvaluator<'a> {
    grid: &'a GridMeasure,
    mass: f64,
}

impl RunEvaluator for GridEvaluator<'_> {
    fn dim(&self) -> usize {
        self.grid.dim()
    }

    fn eval_run(&self, start: &[i64], len: usize, out: &mut Vec<f64>) {
        out.clear();
        let mut xi = Frequency(start.to_vec());
        let last = start.len() - 1;
        for t in 0..len {
            xi.0[last] = start[last] + t as i64;
            let v = self.grid.transform(&xi).map(|z| z.norm()).unwrap_or(f64::NAN);
            out.push(v / self.mass);
        }
    }
}

/// Per-annulus accumulator, merged in run order.
#[derive(Debug, Clone, Default)]
struct Partial {
    sup: f64,
    argmax: Vec<i64>,
    scanned: u64,
    worst_ratio: f64,
    violations: Vec<Violation>,
    violation_count: u64,
}

impl Partial {
    fn merge(&mut self, other: Partial, cap: usize) {
        if better(other.sup, &other.argmax, self.sup, &self.argmax) && !other.argmax.is_empty() {
            self.sup = other.sup;
            self.argmax = other.argmax;
        }
        self.scanned += other.scanned;
        self.worst_ratio = self.worst_ratio.max(other.worst_ratio);
        self.violation_count += other.violation_count;
        for v in other.violations {
            if self.violations.len() < cap {
                self.violations.push(v);
            }
        }
    }
}

/// Upper bound side of the verdict.
struct Bound {
    flat: f64,
    delta: f64,
    lambda: f64,
}

impl Bound {
    fn at(&self, norm_sq: f64) -> f64 {
        self.flat + self.delta * norm_sq.powf(-self.lambda / 4.0)
    }
}

fn scan_runs(eval: &dyn RunEvaluator, runs: &[Run], bound: Option<&Bound>, cap: usize) -> Partial {
    let parts: Vec<Partial> = runs
        .par_iter()
        .map(|run| {
            let mut p = Partial::default();
            let mut vals = Vec::with_capacity(run.len);
            eval.eval_run(&run.start, run.len, &mut vals);
            let last = run.start.len() - 1;
            let head_sq: f64 = run.start[..last].iter().map(|&k| (k as f64) * (k as f64)).sum();
            for (t, &v) in vals.iter().enumerate() {
                let e = run.start[last] + t as i64;
                let mut xi = None;
                if v > p.sup || p.argmax.is_empty() {
                    let mut x = run.start.clone();
                    x[last] = e;
                    p.sup = v;
                    p.argmax = x.clone();
                    xi = Some(x);
                }
                if let Some(b) = bound {
                    let limit = b.at(head_sq + (e as f64) * (e as f64));
                    p.worst_ratio = p.worst_ratio.max(v / limit);
                    if !(v <= limit) {
                        p.violation_count += 1;
                        if p.violations.len() < cap {
                            let x = xi.take().unwrap_or_else(|| {
                                let mut x = run.start.clone();
                                x[last] = e;
                                x
                            });
                            p.violations.push(Violation {
                                xi: Frequency(x),
                                value: v,
                                bound: limit,
                            });
                        }
                    }
                }
            }
            p.scanned = vals.len() as u64;
            p
        })
        .collect();
    let mut total = Partial::default();
    for p in parts {
        total.merge(p, cap);
    }
    total
}

fn evaluator<'a>(source: &SpectralSource<'a>) -> Result<Box<dyn RunEvaluator + 'a>> {
    Ok(match *source {
        SpectralSource::Config(c) => Box::new(ConfigEvaluator::new(c, None)),
        SpectralSource::Mollified(c, r) => {
            if !(r > 0.0) {
                return Err(Error::input("mollification radius must be positive"));
            }
            Box::new(ConfigEvaluator::new(c, Some(r)))
        }
        SpectralSource::Grid(g) => {
            let mass = g.mass();
            if !(mass > 0.0) {
                return Err(Error::input("grid measure has zero mass"));
            }
            Box::new(GridEvaluator { grid: g, mass })
        }
    })
}

/// Sup of `|transform|` over `2^j ≤ |ξ| < 2^{j+1}` with an argmax witness,
/// plus whether the annulus was scanned in full.
pub fn annulus_sup_with(
    source: SpectralSource<'_>,
    j: u32,
    opts: &EnumerationOptions,
) -> Result<(f64, Frequency, bool)> {
    let d = source.dim();
    if d == 0 {
        return Err(Error::input("empty source"));
    }
    if j > 60 {
        return Err(Error::Resource(format!("annulus 2^{j} beyond 64-bit frequencies")));
    }
    let hi_sq = 1u128 << (2 * (j + 1));
    if let Some(band) = source.band() {
        if (1i128 << (j + 1)) - 1 > band as i128 {
            return Err(Error::input(format!(
                "annulus {j} reaches past the grid band |ξ_j| ≤ {band}"
            )));
        }
    }
    let eval = evaluator(&source)?;
    let plan = enumerate::plan_annulus(d, j, hi_sq - 1, opts);
    let part = scan_runs(eval.as_ref(), &plan.runs, None, 0);
    Ok((part.sup, Frequency(part.argmax), plan.exhaustive))
}

/// [`annulus_sup_with`] at the default enumeration options.
pub fn annulus_sup(source: SpectralSource<'_>, j: u32) -> Result<(f64, Frequency)> {
    annulus_sup_with(source, j, &EnumerationOptions::default()).map(|(s, x, _)| (s, x))
}

/// Checks `|S(ξ)| ≤ C N^{-1/2} log N + δ |ξ|^{-λ/2}` for `0 < |ξ| ≤ N^{1+κ}`.
/// In one dimension every integer is scanned; otherwise annuli past the
/// exhaustive radius are subsampled and marked so.
pub fn sweep(config: &WeightedConfiguration, params: &SweepParams) -> Result<SweepReport> {
    if !(params.c > 0.0) {
        return Err(Error::input(format!("sweep constant C = {} must be positive", params.c)));
    }
    if config.is_empty() {
        return Err(Error::input("sweep of an empty configuration"));
    }
    let n = config.len();
    let d = config.dim();
    let nf = n as f64;
    let xi_max = nf.powf(1.0 + params.kappa);
    let max_sq = (xi_max * xi_max).floor() as u128;
    let xi_max_from_radius = (config.radius() > 0.0).then(|| (1.0 / config.radius()).powf(1.0 + params.kappa));
    if let Some(x) = xi_max_from_radius {
        log::info!("sweep range N^(1+κ) = {xi_max:.1}; (1/r)^(1+κ) = {x:.3e} is not scanned");
    }
    let bound = Bound {
        flat: params.c * nf.powf(-0.5) * nf.ln(),
        delta: params.delta,
        lambda: params.lambda,
    };
    let mut opts = params.enumeration.clone();
    if d == 1 {
        opts.exhaustive_radius_1d = u64::MAX;
    }
    let eval = ConfigEvaluator::new(config, None);
    let top = if max_sq == 0 { 0 } else { (max_sq as f64).sqrt().log2().floor() as u32 };
    let mut annuli = Vec::new();
    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut empirical: f64 = 0.0;
    for j in 0..=top {
        let cap_sq = ((1u128 << (2 * (j + 1))) - 1).min(max_sq);
        if cap_sq < (1u128 << (2 * j)) {
            break;
        }
        let plan = enumerate::plan_annulus(d, j, cap_sq, &opts);
        let part = scan_runs(&eval, &plan.runs, Some(&bound), params.max_listed);
        empirical = empirical.max(part.sup * nf.sqrt() / nf.ln());
        violation_count += part.violation_count;
        for v in part.violations {
            if violations.len() < params.max_listed {
                violations.push(v);
            }
        }
        annuli.push(AnnulusRecord {
            j,
            lo: (1u64 << j) as f64,
            hi: ((1u128 << (j + 1)) as f64).min(xi_max),
            scanned: part.scanned,
            exhaustive: plan.exhaustive,
            sup: part.sup,
            argmax: Frequency(part.argmax),
            worst_ratio: part.worst_ratio,
        });
    }
    let conjugate_symmetry_error = conjugate_check(config, &annuli)?;
    debug_assert!(conjugate_symmetry_error < 1e-9, "S(-ξ) != conj S(ξ): {conjugate_symmetry_error}");
    Ok(SweepReport {
        n,
        kappa: params.kappa,
        c: params.c,
        delta: params.delta,
        lambda: params.lambda,
        dim: d,
        xi_max,
        xi_max_from_radius,
        annuli,
        verdict: violation_count == 0,
        violation_count,
        violations,
        conjugate_symmetry_error,
        empirical_constant: empirical,
    })
}

/// Symmetry spot check at each annulus witness: the sweep only scans one
/// of `±ξ`.
fn conjugate_check(config: &WeightedConfiguration, annuli: &[AnnulusRecord]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in annuli.iter().filter(|a| !a.argmax.0.is_empty()) {
        let s = weighted_exp_sum(config, &a.argmax)?;
        let t = weighted_exp_sum(config, &a.argmax.neg())?;
        worst = worst.max((t - s.conj()).norm());
    }
    Ok(worst)
}

/// Pilot calibration of `C` from uniform random configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotCalibration {
    #[serde(rename = "N")]
    pub n: usize,
    pub dim: usize,
    pub kappa: f64,
    pub quantile: f64,
    pub seed: u64,
    /// Empirical constants, one per trial, in trial order.
    pub constants: Vec<f64>,
    #[serde(rename = "C")]
    pub c: f64,
}

/// `C` as the `quantile` of `max_ξ |S(ξ)| √N / log N` over `trials`
/// uniform unit-weight configurations of `n` points (`δ = 0`).
pub fn pilot_constant(
    n: usize,
    dim: usize,
    kappa: f64,
    trials: usize,
    quantile: f64,
    seed: u64,
    enumeration: &EnumerationOptions,
) -> Result<PilotCalibration> {
    if n < 2 || dim == 0 || trials == 0 {
        return Err(Error::input("pilot needs n ≥ 2, d ≥ 1 and at least one trial"));
    }
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::input(format!("quantile {quantile} outside [0, 1]")));
    }
    let params = SweepParams {
        kappa,
        c: f64::MAX,
        delta: 0.0,
        lambda: 0.0,
        enumeration: enumeration.clone(),
        max_listed: 0,
    };
    let mut constants = Vec::with_capacity(trials);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
        let coords: Vec<f64> = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        let cfg = WeightedConfiguration::uniform_weights(dim, coords, 1.0 / n as f64)?;
        constants.push(sweep(&cfg, &params)?.empirical_constant);
    }
    let mut sorted = constants.clone();
    sorted.sort_by(f64::total_cmp);
    let idx = ((quantile * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    Ok(PilotCalibration {
        n,
        dim,
        kappa,
        quantile,
        seed,
        constants,
        c: sorted[idx],
    })
}

/// Annulus sups keyed by `j`, for profile plots and the dimension fit.
pub fn annulus_profile(
    source: SpectralSource<'_>,
    js: impl IntoIterator<Item = u32>,
    opts: &EnumerationOptions,
) -> Result<BTreeMap<u32, (f64, Frequency, bool)>> {
    js.into_iter()
        .map(|j| annulus_sup_with(source, j, opts).map(|v| (j, v)))
        .collect()
}

#[cfg(test)]
mod tests;
