//! Experiment orchestration: seeded trial batteries, concentration checks
//! and the demos.

mod concentration;
mod demos;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dimension::{box_dimension_of_config, fourier_dimension, mollified_range};
use crate::error::{Error, Result};
use crate::expsum::{pilot_constant, sweep, PilotCalibration, SpectralSource, SweepParams};
use crate::patterns::{ap3_translational, isosceles_parabola, read_cell_list, violation_scan, PatternSpec, RoughPattern};
use crate::sampler::{build, ConstructionParams, WeightedConfiguration};

pub use concentration::{
    hoeffding_bound, hoeffding_check, split_sum_check, uniform_phase_sums, HoeffdingRow, HoeffdingTable,
    SplitFrequencyRow, SplitOptions, SplitTable,
};
pub use demos::{
    demo_isosceles, demo_linear_equations, min_isosceles_functional, Curve, DemoReport, IsoscelesOptions,
    IsoscelesRoute,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Trials failing beyond this fraction abort an experiment.
pub const MAX_FAILED_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PatternConfig {
    /// Rough pattern with no cells.
    Empty { n: usize, dim: usize },
    /// Rough pattern read from a cell-list file.
    RoughCells { path: PathBuf, dim: usize, alpha: f64 },
    /// `x_3 - 2 x_2 = -x_1`, translational form.
    Ap3,
    /// Isosceles triangles on the parabola, surface form.
    IsoscelesParabola,
}

impl PatternConfig {
    pub fn resolve(&self) -> Result<PatternSpec> {
        Ok(match self {
            PatternConfig::Empty { n, dim } => PatternSpec::Rough(RoughPattern::empty(*n, *dim, 2)?),
            PatternConfig::RoughCells { path, dim, alpha } => {
                let f = BufReader::new(File::open(path)?);
                PatternSpec::Rough(read_cell_list(f, *dim, *alpha)?)
            }
            PatternConfig::Ap3 => PatternSpec::Translational(ap3_translational()?),
            PatternConfig::IsoscelesParabola => PatternSpec::Surface(isosceles_parabola()?.pattern),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PilotConfig {
    pub trials: usize,
    pub quantile: f64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig {
            trials: 20,
            quantile: 0.9,
        }
    }
}

fn default_trials() -> usize {
    1
}

fn default_grid() -> usize {
    2048
}

/// A trial battery. Trial `t` builds with seed `construction.seed + t`.
/// The sweep runs at `construction.lambda`; when `pilot` is set its `C`
/// replaces `sweep.C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub pattern: PatternConfig,
    #[serde(default)]
    pub construction: ConstructionParams,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub sweep: SweepParams,
    #[serde(default)]
    pub pilot: Option<PilotConfig>,
    /// Cells per axis for grid measures.
    #[serde(default = "default_grid")]
    pub grid: usize,
    /// Also estimate box and Fourier dimensions per trial.
    #[serde(default)]
    pub dimensions: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(pattern: PatternConfig, construction: ConstructionParams, trials: usize) -> Self {
        ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            pattern,
            construction,
            trials,
            sweep: SweepParams::default(),
            pilot: None,
            grid: default_grid(),
            dimensions: false,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::input(format!(
                "schema_version {} is not the supported {SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        if self.trials == 0 {
            return Err(Error::input("trial count must be at least 1"));
        }
        if let Some(p) = &self.pilot {
            if p.trials == 0 || !(0.0..=1.0).contains(&p.quantile) {
                return Err(Error::input("pilot needs trials >= 1 and a quantile in [0, 1]"));
            }
        }
        self.construction.validate()
    }

    pub fn trial_params(&self, t: usize) -> ConstructionParams {
        let mut p = self.construction.clone();
        p.seed = self.construction.seed.wrapping_add(t as u64);
        p
    }
}

/// One trial. Failed trials keep whatever was known when they stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub ok: bool,
    #[serde(rename = "N")]
    pub n_points: usize,
    pub candidates: usize,
    pub removed: usize,
    pub p_hat: Option<f64>,
    pub scan_violations: Option<usize>,
    pub sweep_pass: Option<bool>,
    pub sweep_violations: Option<u64>,
    pub empirical_constant: Option<f64>,
    pub box_dim: Option<f64>,
    pub fourier_dim: Option<f64>,
    pub error: String,
}

impl TrialRow {
    fn new(trial: usize, seed: u64) -> Self {
        TrialRow {
            trial,
            seed,
            ok: false,
            n_points: 0,
            candidates: 0,
            removed: 0,
            p_hat: None,
            scan_violations: None,
            sweep_pass: None,
            sweep_violations: None,
            empirical_constant: None,
            box_dim: None,
            fourier_dim: None,
            error: String::new(),
        }
    }

    fn fail(&mut self, e: &Error) {
        self.ok = false;
        if let Error::Construction { diagnostics, .. } = e {
            self.candidates = diagnostics.candidates;
            self.removed = diagnostics.removed;
            self.p_hat = Some(diagnostics.removal_fraction);
        }
        self.error = e.to_string();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub max: f64,
}

impl Quantiles {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
        Some(Quantiles {
            q10: at(0.1),
            q50: at(0.5),
            q90: at(0.9),
            max: v[v.len() - 1],
        })
    }
}

/// Battery summary; a pure function of the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub completed: usize,
    pub failed: usize,
    /// Completed trials with an empty violation scan.
    pub avoiding: usize,
    pub sweep_passes: usize,
    /// `sweep_passes / trials`; failed trials count as failures.
    pub sweep_pass_rate: f64,
    /// One-sided 95% lower confidence bound on the pass probability.
    pub sweep_pass_lower95: f64,
    pub constant_quantiles: Option<Quantiles>,
    pub min_retained: Option<usize>,
}

impl Aggregate {
    pub fn from_rows(rows: &[TrialRow]) -> Self {
        let trials = rows.len();
        let completed = rows.iter().filter(|r| r.ok).count();
        let avoiding = rows.iter().filter(|r| r.ok && r.scan_violations == Some(0)).count();
        let sweep_passes = rows.iter().filter(|r| r.sweep_pass == Some(true)).count();
        let consts: Vec<f64> = rows.iter().filter_map(|r| r.empirical_constant).collect();
        Aggregate {
            trials,
            completed,
            failed: trials - completed,
            avoiding,
            sweep_passes,
            sweep_pass_rate: sweep_passes as f64 / trials.max(1) as f64,
            sweep_pass_lower95: one_sided_lower95(sweep_passes, trials),
            constant_quantiles: Quantiles::of(&consts),
            min_retained: rows.iter().filter(|r| r.ok).map(|r| r.n_points).min(),
        }
    }
}

/// Wilson lower bound at one-sided 95%.
fn one_sided_lower95(k: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let z = 1.6448536269514722;
    let nf = n as f64;
    let p = k as f64 / nf;
    let denom = 1.0 + z * z / nf;
    let center = p + z * z / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt();
    ((center - half) / denom).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    /// `C` the sweeps ran with.
    #[serde(rename = "C")]
    pub c: f64,
    pub pilot: Option<PilotCalibration>,
    pub rows: Vec<TrialRow>,
    pub aggregate: Aggregate,
}

impl TrialReport {
    /// Recomputes the aggregate from the rows.
    pub fn verify(&self) -> Result<()> {
        if Aggregate::from_rows(&self.rows) != self.aggregate {
            return Err(Error::input("aggregate does not match the per-trial rows"));
        }
        if self.rows.iter().enumerate().any(|(i, r)| r.trial != i) {
            return Err(Error::input("per-trial rows out of order"));
        }
        Ok(())
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json` and `trials.csv` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(self)?)?;
        self.write_csv(File::create(dir.join("trials.csv"))?)
    }

    /// Reads a saved report, checking the CSV rows and the aggregate.
    pub fn load(dir: &Path) -> Result<Self> {
        let report: TrialReport = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json"))?)?;
        let mut rd = csv::Reader::from_path(dir.join("trials.csv"))?;
        let rows = rd.deserialize().collect::<std::result::Result<Vec<TrialRow>, _>>()?;
        if rows != report.rows {
            return Err(Error::input("trials.csv disagrees with report.json"));
        }
        report.verify()?;
        Ok(report)
    }
}

/// Runs every trial and records per-trial failures without stopping.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<(TrialReport, Vec<Option<WeightedConfiguration>>)> {
    cfg.validate()?;
    let pattern = cfg.pattern.resolve()?;
    let built: Vec<(TrialRow, Option<WeightedConfiguration>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let params = cfg.trial_params(t);
            let mut row = TrialRow::new(t, params.seed);
            match build(&params, &pattern) {
                Ok(c) => {
                    row.ok = true;
                    row.n_points = c.len();
                    row.candidates = c.provenance.candidates;
                    row.removed = c.removed_count();
                    row.p_hat = c.provenance.removal_fraction;
                    row.scan_violations = Some(violation_scan(&c, &pattern, params.separation_s, 0.0).len());
                    (row, Some(c))
                }
                Err(e) => {
                    row.fail(&e);
                    (row, None)
                }
            }
        })
        .collect();
    let (mut rows, configs): (Vec<TrialRow>, Vec<Option<WeightedConfiguration>>) = built.into_iter().unzip();

    let mut params = cfg.sweep.clone();
    params.lambda = cfg.construction.lambda;
    let pilot = match (&cfg.pilot, median_points(&rows)) {
        (Some(p), Some(n)) => {
            let cal = pilot_constant(
                n,
                pattern.dim(),
                params.kappa,
                p.trials,
                p.quantile,
                cfg.construction.seed ^ 0x9e37_79b9_7f4a_7c15,
                &params.enumeration,
            )?;
            params.c = cal.c;
            Some(cal)
        }
        _ => None,
    };

    rows.par_iter_mut().zip(&configs).for_each(|(row, c)| {
        let Some(c) = c else { return };
        if let Err(e) = analyse(row, c, &params, cfg.dimensions) {
            row.fail(&e);
        }
    });

    let aggregate = Aggregate::from_rows(&rows);
    Ok((
        TrialReport {
            schema_version: SCHEMA_VERSION,
            config: cfg.clone(),
            c: params.c,
            pilot,
            rows,
            aggregate,
        },
        configs,
    ))
}

fn analyse(row: &mut TrialRow, c: &WeightedConfiguration, params: &SweepParams, dims: bool) -> Result<()> {
    let rep = sweep(c, params)?;
    row.sweep_pass = Some(rep.verdict);
    row.sweep_violations = Some(rep.violation_count);
    row.empirical_constant = Some(rep.empirical_constant);
    if dims {
        row.box_dim = Some(box_dimension_of_config(c, 5)?.value);
        let src = SpectralSource::Mollified(c, c.radius());
        row.fourier_dim = Some(fourier_dimension(src, mollified_range(c), &params.enumeration)?.value);
    }
    Ok(())
}

fn median_points(rows: &[TrialRow]) -> Option<usize> {
    let mut n: Vec<usize> = rows.iter().filter(|r| r.ok).map(|r| r.n_points).collect();
    n.sort_unstable();
    n.get(n.len().saturating_sub(1) / 2).copied()
}

/// [`run_trials`], persisted to `cfg.out` when set. More than half the
/// trials failing is an error, reported after the artifacts are written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<TrialReport> {
    let (report, _) = run_trials(cfg)?;
    if let Some(dir) = &cfg.out {
        report.save(dir)?;
    }
    let a = &report.aggregate;
    if a.failed as f64 > MAX_FAILED_FRACTION * a.trials as f64 {
        let first = report.rows.iter().find(|r| !r.ok).map(|r| r.error.clone()).unwrap_or_default();
        return Err(Error::Battery {
            failed: a.failed,
            total: a.trials,
            first,
        });
    }
    Ok(report)
}
