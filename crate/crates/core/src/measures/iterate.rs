use serde::{Deserialize, Serialize};

use super::{perturb, GridMeasure, PerturbDiagnostics};
use crate::error::{Error, Result};
use crate::expsum::{sweep, SweepParams, SweepReport};
use crate::patterns::{violation_scan, PatternSpec};
use crate::sampler::{build_within, ConstructionParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterationOptions {
    /// `γ` values for the stage seminorms.
    pub gammas: Vec<f64>,
    pub sweep: SweepParams,
    /// Relative density level defining `supp μ_t`.
    pub support_threshold: f64,
    /// Target bound on every stage step `‖μ_{t+1} - μ_t‖` in each seminorm.
    pub delta0: f64,
}

impl Default for IterationOptions {
    fn default() -> Self {
        IterationOptions {
            gammas: vec![0.45],
            sweep: SweepParams::default(),
            support_threshold: 1e-9,
            delta0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: usize,
    pub params: ConstructionParams,
    #[serde(skip)]
    pub measure: Option<GridMeasure>,
    pub points: usize,
    pub violations: usize,
    /// Every stage seminorm is at most `delta0`.
    pub within_delta0: bool,
    pub sweep: SweepReport,
    pub diagnostics: PerturbDiagnostics,
}

/// Radii shrinking by `factor` per stage at fixed `λ`:
/// `M_t = ceil(M_0 factor^{t λ})`, seeds `seed + t`.
pub fn geometric_schedule(base: &ConstructionParams, stages: usize, factor: f64) -> Vec<ConstructionParams> {
    (0..stages)
        .map(|t| {
            let mut p = base.clone();
            p.m = (base.m as f64 * factor.powf(t as f64 * base.lambda)).ceil() as usize;
            p.seed = base.seed.wrapping_add(t as u64);
            p
        })
        .collect()
}

/// Starting from Lebesgue measure on the `g^d` grid, each stage builds a
/// configuration by rejection sampling against `supp μ_t` and perturbs
/// `μ_t` by it.
pub fn salem_iterate(
    pattern: &PatternSpec,
    schedule: &[ConstructionParams],
    g: usize,
    opts: &IterationOptions,
) -> Result<Vec<StageOutcome>> {
    let mut prev_r = f64::INFINITY;
    for (t, p) in schedule.iter().enumerate() {
        let r = p.radius().map_err(|e| stage_err(t, e))?;
        if !(r < prev_r) {
            return Err(Error::input(format!(
                "schedule radii must strictly decrease; stage {t} has r = {r:e} after {prev_r:e}"
            )));
        }
        prev_r = r;
    }
    let mut mu = GridMeasure::uniform(pattern.dim(), g)?;
    let mut out = Vec::with_capacity(schedule.len());
    for (t, params) in schedule.iter().enumerate() {
        let run = || -> Result<StageOutcome> {
            let level = opts.support_threshold * mu.mass();
            let inside = |x: &[f64]| mu.density()[mu.cell_of(x)] > level;
            let cfg = build_within(params, pattern, Some(&inside))?;
            let (next, diagnostics) = perturb(&mu, &cfg, &opts.gammas)?;
            let within_delta0 = diagnostics
                .seminorms
                .iter()
                .all(|s| s.mu_minus_mu0.value <= opts.delta0);
            let report = sweep(&cfg, &opts.sweep)?;
            let violations = violation_scan(&cfg, pattern, params.separation_s, cfg.radius()).len();
            Ok(StageOutcome {
                stage: t,
                params: params.clone(),
                measure: Some(next),
                points: cfg.len(),
                violations,
                within_delta0,
                sweep: report,
                diagnostics,
            })
        };
        let stage = run().map_err(|e| stage_err(t, e))?;
        mu = stage.measure.clone().expect("stage measure");
        out.push(stage);
    }
    Ok(out)
}

fn stage_err(stage: usize, e: Error) -> Error {
    Error::Stage {
        stage,
        source: Box::new(e),
    }
}
