//! Runs the δ × seed grid on a worker pool and writes traces, tables and a summary.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sttmpc::simulator::{calibrate_c3, run_closed_loop, Calibration, ControllerSetup, PlantConfig, SimError, Trace};

use crate::config::ExperimentConfig;
use crate::table::{aggregate_volumes, delta_dir_name, VolumeGroup, TABLE_TIMES};
use crate::CliError;

pub const VERSION: &str = env!("STTMPC_GIT_DESCRIBE");
pub const OUT_ENV: &str = "STTMPC_OUT";

/// `$STTMPC_OUT`, or `sttmpc-out` in the working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("sttmpc-out"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub delta: f64,
    pub seed: u64,
    pub status: String,
    pub fallbacks: usize,
    pub always_covered: bool,
    pub g_holds: bool,
    pub worst_constraint_margin: f64,
    pub final_volume_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub version: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub runtime_seconds: f64,
    pub jobs: usize,
    pub runs: Vec<RunSummary>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<(PlantConfig, ControllerSetup), CliError> {
    let scenario = cfg.scenario();
    let plant = scenario.plant().map_err(|e| CliError::Config(e.to_string()))?;
    let setup = scenario
        .setup()
        .map_err(|e| CliError::Config(format!("offline design failed: {e}")))?;
    Ok((plant, setup))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Execute every (δ, seed) pair. Failed runs leave a dump under `failures/`;
/// the first failure decides the returned error once all runs finished.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize, out: &Path) -> Result<Summary, CliError> {
    let clock = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let (plant, setup) = prepare(cfg)?;
    std::fs::create_dir_all(out)?;
    write(&out.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    write(&out.join("design.json"), serde_json::to_string_pretty(&*setup.design)?)?;

    let grid: Vec<(f64, u64)> = cfg
        .experiment
        .deltas
        .iter()
        .flat_map(|&d| cfg.experiment.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let results: Vec<(f64, u64, Result<Trace, SimError>)> = pool(jobs)?.install(|| {
        grid.par_iter()
            .map(|&(delta, seed)| {
                let res = cfg
                    .run_config(delta, seed)
                    .map_err(|e| SimError::Config(e.to_string()))
                    .and_then(|run| run_closed_loop(&plant, &run, &setup));
                log::info!("delta={delta:e} seed={seed} done");
                (delta, seed, res)
            })
            .collect()
    });

    let design = &setup.design;
    let mut runs = Vec::with_capacity(results.len());
    let mut first_error: Option<CliError> = None;
    let mut groups: Vec<VolumeGroup> = Vec::new();
    for (delta, seed, res) in results {
        let dir = out.join("traces").join(delta_dir_name(delta));
        match res {
            Ok(trace) => {
                write(&dir.join(format!("seed_{seed}.csv")), trace.to_csv())?;
                write(&dir.join(format!("seed_{seed}.json")), serde_json::to_string(&trace)?)?;
                let report = trace.constraint_report(&design.f, &design.g);
                runs.push(RunSummary {
                    delta,
                    seed,
                    status: "ok".into(),
                    fallbacks: trace.fallbacks,
                    always_covered: trace.always_covered(),
                    g_holds: trace.g_holds(),
                    worst_constraint_margin: report.worst,
                    final_volume_ratio: trace.steps.last().map_or(f64::NAN, |s| s.volume_ratio),
                });
                let ratios = trace.steps.iter().map(|s| s.volume_ratio).collect();
                match groups.iter_mut().find(|g| g.delta == delta) {
                    Some(g) => g.runs.push(ratios),
                    None => groups.push(VolumeGroup { delta, runs: vec![ratios] }),
                }
            }
            Err(e) => {
                let (err, dump) = match e {
                    SimError::InitialInfeasible { dump } => {
                        (CliError::InitialInfeasible(format!("delta={delta:e} seed={seed}")), Some(dump))
                    }
                    SimError::ContractViolation { t, what, dump } => {
                        (CliError::Contract(format!("delta={delta:e} seed={seed} t={t}: {what}")), Some(dump))
                    }
                    SimError::Config(m) => (CliError::Config(m), None),
                    other => (CliError::Contract(format!("delta={delta:e} seed={seed}: {other}")), None),
                };
                if let Some(d) = dump {
                    let path = out.join("failures").join(format!("{}_seed_{seed}.json", delta_dir_name(delta)));
                    write(&path, serde_json::to_string_pretty(&d)?)?;
                }
                log::error!("{err}");
                runs.push(RunSummary {
                    delta,
                    seed,
                    status: err.to_string(),
                    fallbacks: 0,
                    always_covered: false,
                    g_holds: false,
                    worst_constraint_margin: f64::NAN,
                    final_volume_ratio: f64::NAN,
                });
                first_error.get_or_insert(err);
            }
        }
    }

    let table = aggregate_volumes(&groups, &TABLE_TIMES);
    write(&out.join("volumes.csv"), table.to_csv())?;
    write(&out.join("volumes.txt"), table.to_text())?;
    let summary = Summary {
        version: VERSION.to_string(),
        config_hash: cfg.hash(),
        started_unix,
        runtime_seconds: clock.elapsed().as_secs_f64(),
        jobs,
        runs,
    };
    write(&out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    match first_error {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

/// Fit `c3` on the pilot seeds of the `[calibration]` section.
pub fn calibrate(cfg: &ExperimentConfig, jobs: usize) -> Result<Calibration, CliError> {
    let cal = cfg
        .calibration
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [calibration] section".into()))?;
    let (plant, setup) = prepare(cfg)?;
    let run = cfg.run_config(cal.delta, 0)?;
    let seeds: Vec<u64> = (cal.first_seed..cal.first_seed + cal.pilots).collect();
    let chunks: Vec<Vec<u64>> = seeds.chunks(seeds.len().div_ceil(jobs.max(1)).max(1)).map(|c| c.to_vec()).collect();
    let parts: Vec<Result<Calibration, SimError>> = pool(jobs)?.install(|| {
        chunks
            .par_iter()
            .map(|c| calibrate_c3(&plant, &run, &setup, c, 1.0, 1.0))
            .collect()
    });
    let mut per_run = Vec::with_capacity(seeds.len());
    for p in parts {
        per_run.extend(p.map_err(|e| CliError::Config(format!("calibration failed: {e}")))?.per_run);
    }
    Ok(Calibration::from_runs(per_run, cal.quantile, cal.safety))
}
