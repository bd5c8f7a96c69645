use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use salem_core::dimension::{box_dimension_of_config, fourier_dimension, mollified_range};
use salem_core::expsum::{sweep, SpectralSource, SweepParams};
use salem_core::harness::{
    demo_isosceles, demo_linear_equations, run_experiment, Curve, DemoReport, ExperimentConfig, IsoscelesOptions,
    IsoscelesRoute, PatternConfig,
};
use salem_core::measures::{geometric_schedule, salem_iterate, IterationOptions};
use salem_core::patterns::violation_scan;
use salem_core::sampler::build;
use salem_core::torus::{load_points_csv, save_points_csv};
use salem_core::{ConstructionParams, Error, Result, WeightedConfiguration};

#[derive(Parser)]
#[command(name = "salem", version, about = "Pattern-avoiding configurations on the torus")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Versioned experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the construction seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Build one configuration and write points.csv with a JSON sidecar.
    Build {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep the exponential sum of a saved configuration.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: PathBuf,
    },
    /// Scan a saved configuration for pattern occurrences.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
    },
    /// Box and Fourier dimension estimates of a saved configuration.
    EstimateDim {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        points: PathBuf,
        #[arg(long, default_value_t = 5)]
        levels: usize,
    },
    /// Seeded trial battery.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Multi-stage measure iteration on a grid.
    Iterate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        /// Radius shrink factor per stage.
        #[arg(long, default_value_t = 2.0)]
        factor: f64,
    },
    /// Builtin demos.
    Demo {
        name: DemoName,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Coefficient truncation for linear-eq.
        #[arg(long, default_value_t = 2)]
        coeff_bound: i64,
        /// Rasterize the isosceles zero set at this resolution instead of
        /// using the surface.
        #[arg(long)]
        rough_resolution: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoName {
    Ap3,
    LinearEq,
    IsoscelesParabola,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common, fallback: PatternConfig) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(fallback, ConstructionParams::default(), 1),
    };
    if let Some(s) = common.seed {
        cfg.construction.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.out = Some(o.clone());
    }
    Ok(cfg)
}

fn sweep_params(cfg: &ExperimentConfig) -> SweepParams {
    let mut p = cfg.sweep.clone();
    p.lambda = cfg.construction.lambda;
    p
}

/// Reads points and takes `r` from the sidecar written by `build`, falling
/// back to the configured construction.
fn load_points(path: &Path, cfg: &ExperimentConfig) -> Result<WeightedConfiguration> {
    let table = load_points_csv(path)?;
    let sidecar = path.with_extension("json");
    let r = if sidecar.exists() {
        let v: Value = serde_json::from_str(&std::fs::read_to_string(&sidecar)?)?;
        v["r"]
            .as_f64()
            .ok_or_else(|| Error::input(format!("{} has no radius", sidecar.display())))?
    } else {
        cfg.construction.radius()?
    };
    WeightedConfiguration::from_table(&table, r)
}

fn write_json(out: Option<&Path>, name: &str, v: &impl serde::Serialize) -> Result<()> {
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(name), serde_json::to_string_pretty(v)?)?;
    }
    Ok(())
}

fn print(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Build { common } => {
            let cfg = load_config(&common, PatternConfig::Ap3)?;
            let pattern = cfg.pattern.resolve()?;
            let c = build(&cfg.construction, &pattern)?;
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir)?;
                save_points_csv(&dir.join("points.csv"), &c.to_table())?;
                write_json(Some(dir), "points.json", &c.sidecar())?;
            }
            print(&json!({"N": c.len(), "removed": c.removed_count(), "r": c.radius()}))?;
            Ok(true)
        }
        Command::Sweep { common, points } => {
            let cfg = load_config(&common, PatternConfig::Ap3)?;
            let c = load_points(&points, &cfg)?;
            let rep = sweep(&c, &sweep_params(&cfg))?;
            if let Some(dir) = &cfg.out {
                write_json(Some(dir), "sweep.json", &rep)?;
                rep.write_csv(std::fs::File::create(dir.join("sweep.csv"))?)?;
            }
            print(&json!({
                "verdict": rep.verdict,
                "violations": rep.violation_count,
                "empirical_constant": rep.empirical_constant,
            }))?;
            Ok(rep.verdict)
        }
        Command::Check { common, points, margin } => {
            let cfg = load_config(&common, PatternConfig::Ap3)?;
            let pattern = cfg.pattern.resolve()?;
            let c = load_points(&points, &cfg)?;
            if !(margin >= 0.0) {
                return Err(Error::input("margin must be nonnegative"));
            }
            let found = violation_scan(&c, &pattern, cfg.construction.separation_s, margin);
            write_json(cfg.out.as_deref(), "check.json", &json!({"margin": margin, "tuples": found}))?;
            print(&json!({"margin": margin, "violations": found.len()}))?;
            Ok(found.is_empty())
        }
        Command::EstimateDim { common, points, levels } => {
            let cfg = load_config(&common, PatternConfig::Ap3)?;
            let c = load_points(&points, &cfg)?;
            let boxd = box_dimension_of_config(&c, levels)?;
            let four = fourier_dimension(
                SpectralSource::Mollified(&c, c.radius()),
                mollified_range(&c),
                &cfg.sweep.enumeration,
            )?;
            let v = json!({"box": boxd, "fourier": four});
            write_json(cfg.out.as_deref(), "dimension.json", &v)?;
            print(&json!({"box": boxd.value, "fourier": four.value, "fourier_capped": four.capped}))?;
            Ok(true)
        }
        Command::Montecarlo { common, trials } => {
            let mut cfg = load_config(&common, PatternConfig::Ap3)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let rep = run_experiment(&cfg)?;
            let a = &rep.aggregate;
            print(&serde_json::to_value(a)?)?;
            Ok(a.failed == 0 && a.avoiding == a.trials)
        }
        Command::Iterate { common, stages, factor } => {
            let cfg = load_config(&common, PatternConfig::Ap3)?;
            let pattern = cfg.pattern.resolve()?;
            let schedule = geometric_schedule(&cfg.construction, stages, factor);
            let opts = IterationOptions {
                sweep: sweep_params(&cfg),
                ..Default::default()
            };
            let out = salem_iterate(&pattern, &schedule, cfg.grid, &opts)?;
            if let Some(dir) = &cfg.out {
                write_json(Some(dir), "stages.json", &out)?;
                if let Some(mu) = out.last().and_then(|s| s.measure.as_ref()) {
                    mu.save(&dir.join("measure.sfgm"), json!({"stages": stages, "factor": factor}))?;
                }
            }
            let summary: Vec<Value> = out
                .iter()
                .map(|s| {
                    json!({
                        "stage": s.stage,
                        "N": s.points,
                        "violations": s.violations,
                        "within_delta0": s.within_delta0,
                        "sweep": s.sweep.verdict,
                    })
                })
                .collect();
            print(&Value::Array(summary))?;
            Ok(out.iter().all(|s| s.violations == 0 && s.within_delta0))
        }
        Command::Demo {
            name,
            common,
            trials,
            coeff_bound,
            rough_resolution,
        } => demo(name, &common, trials, coeff_bound, rough_resolution),
    }
}

fn demo(
    name: DemoName,
    common: &Common,
    trials: Option<usize>,
    coeff_bound: i64,
    rough_resolution: Option<u64>,
) -> Result<bool> {
    let fallback = match name {
        DemoName::IsoscelesParabola => PatternConfig::IsoscelesParabola,
        _ => PatternConfig::Ap3,
    };
    let mut cfg = load_config(common, fallback)?;
    if common.config.is_none() && matches!(name, DemoName::IsoscelesParabola) {
        cfg.construction = ConstructionParams::new(512, 4.0 / 9.0, cfg.construction.seed);
    }
    if let Some(t) = trials {
        cfg.trials = t;
    }
    let report: DemoReport = match name {
        DemoName::Ap3 => {
            cfg.pattern = PatternConfig::Ap3;
            let rep = run_experiment(&cfg)?;
            let a = &rep.aggregate;
            print(&serde_json::to_value(a)?)?;
            return Ok(a.failed == 0 && a.avoiding == a.trials);
        }
        DemoName::LinearEq => demo_linear_equations(3, 1, coeff_bound, &[vec![0.0]], &cfg.construction, cfg.trials)?,
        DemoName::IsoscelesParabola => {
            let route = match rough_resolution {
                Some(resolution) => IsoscelesRoute::Rough { resolution },
                None => IsoscelesRoute::Surface,
            };
            let opts = IsoscelesOptions {
                params: cfg.construction.clone(),
                trials: cfg.trials,
            };
            demo_isosceles(Curve::Parabola, route, &opts)?
        }
    };
    write_json(cfg.out.as_deref(), "demo.json", &report)?;
    let first_error = report.rows.iter().find(|r| !r.ok).map(|r| r.error.clone());
    print(&json!({
        "demo": report.demo,
        "aggregate": report.aggregate,
        "passed": report.passed(),
        "first_error": first_error,
    }))?;
    Ok(report.passed())
}
