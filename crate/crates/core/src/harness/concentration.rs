use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::unit_phase;
use crate::sampler::CandidateSet;
use crate::torus::Frequency;

pub const MIN_HOEFFDING_SAMPLES: usize = 200;
pub const MIN_SPLIT_TRIALS: usize = 50;

/// `4 exp(-t^2 / (2 Σ A_i^2))` for a sum of independent complex terms with
/// `|X_i| ≤ A_i`.
pub fn hoeffding_bound(sum_sq: f64, t: f64) -> f64 {
    4.0 * (-t * t / (2.0 * sum_sq)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingRow {
    pub t: f64,
    /// Fraction of samples with `|Σ - center| ≥ t`.
    pub empirical: f64,
    pub bound: f64,
    pub exceeds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTable {
    pub samples: usize,
    pub sum_sq: f64,
    pub rows: Vec<HoeffdingRow>,
    pub exceedances: usize,
}

/// Empirical tails of `|Σ - center|` against the analytic bound at each `t`.
/// The bound always holds, so an exceedance means a bug.
pub fn hoeffding_check(
    bounds: &[f64],
    samples: &[Complex64],
    center: Complex64,
    ts: &[f64],
) -> Result<HoeffdingTable> {
    let sum_sq = bounds.iter().map(|a| a * a).sum();
    tail_table(sum_sq, samples.iter().map(|z| (z - center).norm()).collect(), ts)
}

fn tail_table(sum_sq: f64, mut dev: Vec<f64>, ts: &[f64]) -> Result<HoeffdingTable> {
    if dev.len() < MIN_HOEFFDING_SAMPLES {
        return Err(Error::input(format!(
            "tail check needs at least {MIN_HOEFFDING_SAMPLES} samples, got {}",
            dev.len()
        )));
    }
    dev.sort_by(f64::total_cmp);
    let n = dev.len();
    let rows: Vec<HoeffdingRow> = ts
        .iter()
        .map(|&t| {
            let below = dev.partition_point(|&v| v < t);
            let empirical = (n - below) as f64 / n as f64;
            let bound = hoeffding_bound(sum_sq, t);
            HoeffdingRow {
                t,
                empirical,
                bound,
                exceeds: empirical > bound,
            }
        })
        .collect();
    let exceedances = rows.iter().filter(|r| r.exceeds).count();
    Ok(HoeffdingTable {
        samples: n,
        sum_sq,
        rows,
        exceedances,
    })
}

/// `samples` draws of `Σ A_k e^{2πi U_k}` with independent uniform `U_k`.
pub fn uniform_phase_sums(weights: &[f64], samples: usize, seed: u64) -> Vec<Complex64> {
    (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s as u64);
            weights.iter().map(|&a| unit_phase(rng.gen::<f64>()) * a).sum()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitOptions {
    /// Tail constant; calibrated on the first half of the trials when unset.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub calibration_quantile: f64,
    /// `t` grid for the tail check on `G`, in units of `sqrt(Σ A^2)`.
    pub t_units: Vec<f64>,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            c: None,
            calibration_quantile: 0.95,
            t_units: (1..=10).map(|k| 0.5 * k as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFrequencyRow {
    pub xi: Frequency,
    /// Cross-trial mean of `H(ξ)` as `[re, im]`.
    pub mean_h: [f64; 2],
    pub se_h: f64,
    /// `|mean| / se`.
    pub z_h: f64,
    pub mean_f: [f64; 2],
    pub z_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTable {
    pub trials: usize,
    /// Candidates per stratum.
    #[serde(rename = "M")]
    pub m: usize,
    /// Largest `|F - (G - H)|`.
    pub reconstruction_error: f64,
    pub rows: Vec<SplitFrequencyRow>,
    /// Frequencies whose mean `H` lies within 3 standard errors of 0.
    pub h_within_3se: usize,
    #[serde(rename = "C")]
    pub c: f64,
    pub calibrated: bool,
    /// Trials used to calibrate `C` (excluded from the pass rate).
    pub calibration_trials: usize,
    /// `sqrt(M log M)`.
    pub bound_scale: f64,
    /// `max_ξ |H - mean H|` per trial.
    pub tail_deviations: Vec<f64>,
    pub tail_passes: usize,
    pub tail_pass_rate: f64,
    /// Tails of `|G - mean G|` pooled over the frequencies.
    pub g_tails: HoeffdingTable,
}

/// Reconstructs `G`, `H` and `F` per trial at each frequency, tests the
/// cross-trial mean of `H` against 0, and checks `sup_ξ |H - mean H|`
/// against `C sqrt(M log M)`.
pub fn split_sum_check(sets: &[CandidateSet], freqs: &[Frequency], opts: &SplitOptions) -> Result<SplitTable> {
    let trials = sets.len();
    if trials < MIN_SPLIT_TRIALS {
        return Err(Error::input(format!(
            "split check needs at least {MIN_SPLIT_TRIALS} trials, got {trials}"
        )));
    }
    if freqs.is_empty() || freqs.iter().any(|x| x.is_zero()) {
        return Err(Error::input("split check needs nonzero frequencies"));
    }
    let m = sets[0].per_stratum();
    if sets.iter().any(|s| s.per_stratum() != m || s.strata.len() != sets[0].strata.len()) {
        return Err(Error::input("split check trials must share M and the stratum count"));
    }
    let sums: Vec<Vec<crate::sampler::SplitSums>> = sets
        .par_iter()
        .map(|s| freqs.iter().map(|xi| s.split_sums(xi)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;

    let mut reconstruction_error: f64 = 0.0;
    for row in &sums {
        for s in row {
            reconstruction_error = reconstruction_error.max((s.f - (s.g - s.h)).norm());
        }
    }

    let tf = trials as f64;
    let stats = |pick: &dyn Fn(&crate::sampler::SplitSums) -> Complex64, f: usize| {
        let mean: Complex64 = sums.iter().map(|r| pick(&r[f])).sum::<Complex64>() / tf;
        let var = sums.iter().map(|r| (pick(&r[f]) - mean).norm_sqr()).sum::<f64>() / (tf - 1.0);
        let se = (var / tf).sqrt();
        (mean, se)
    };
    let mut rows = Vec::with_capacity(freqs.len());
    let mut mean_h = Vec::with_capacity(freqs.len());
    let mut mean_g = Vec::with_capacity(freqs.len());
    for (f, xi) in freqs.iter().enumerate() {
        let (mh, se_h) = stats(&|s| s.h, f);
        let (mf, se_f) = stats(&|s| s.f, f);
        let (mg, _) = stats(&|s| s.g, f);
        mean_h.push(mh);
        mean_g.push(mg);
        rows.push(SplitFrequencyRow {
            xi: xi.clone(),
            mean_h: [mh.re, mh.im],
            se_h,
            z_h: z_score(mh, se_h),
            mean_f: [mf.re, mf.im],
            z_f: z_score(mf, se_f),
        });
    }
    let h_within_3se = rows.iter().filter(|r| r.z_h <= 3.0).count();

    let bound_scale = (m as f64 * (m as f64).ln()).sqrt();
    let tail_deviations: Vec<f64> = sums
        .iter()
        .map(|r| r.iter().zip(&mean_h).map(|(s, mh)| (s.h - mh).norm()).fold(0.0, f64::max))
        .collect();
    let (c, calibrated, calibration_trials) = match opts.c {
        Some(c) => (c, false, 0),
        None => {
            let half = trials / 2;
            let mut v: Vec<f64> = tail_deviations[..half].iter().map(|d| d / bound_scale).collect();
            v.sort_by(f64::total_cmp);
            let idx = ((opts.calibration_quantile * half as f64).ceil() as usize).clamp(1, half) - 1;
            (v[idx], true, half)
        }
    };
    let evaluated = &tail_deviations[calibration_trials..];
    let tail_passes = evaluated.iter().filter(|&&d| d <= c * bound_scale).count();
    let tail_pass_rate = tail_passes as f64 / evaluated.len() as f64;

    let sum_sq: f64 = sets[0].stratum_weights.iter().map(|a| m as f64 * a * a).sum();
    let dev: Vec<f64> = sums
        .iter()
        .flat_map(|r| r.iter().zip(&mean_g).map(|(s, mg)| (s.g - mg).norm()))
        .collect();
    let ts: Vec<f64> = opts.t_units.iter().map(|u| u * sum_sq.sqrt()).collect();
    let g_tails = tail_table(sum_sq, dev, &ts)?;

    Ok(SplitTable {
        trials,
        m,
        reconstruction_error,
        rows,
        h_within_3se,
        c,
        calibrated,
        calibration_trials,
        bound_scale,
        tail_deviations,
        tail_passes,
        tail_pass_rate,
        g_tails,
    })
}

fn z_score(mean: Complex64, se: f64) -> f64 {
    if se > 0.0 {
        mean.norm() / se
    } else if mean.norm() == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
