//! Experiment configuration file (TOML) with `--set section.key=value` overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sttmpc::estimation::Schedule;
use sttmpc::simulator::{Mode, RunConfig, Scenario};
use sttmpc::tube_mpc::ExcitationBound;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a_star: Vec<Vec<f64>>,
    pub b_star: Vec<Vec<f64>>,
    pub sigma: f64,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub theta0: Vec<f64>,
    pub half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub k: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub lambda: f64,
    pub horizon: usize,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub deltas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub steps: usize,
    pub mode: Mode,
    pub freeze_wbar: bool,
    pub excitation: ExcitationBound,
    pub assertions: bool,
    pub volume_samples: usize,
}

/// Pilot runs used by `sttmpc calibrate`: seeds `first_seed .. first_seed + pilots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSection {
    pub delta: f64,
    pub first_seed: u64,
    pub pilots: u64,
    pub quantile: f64,
    pub safety: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: PlantSection,
    pub prior: PriorSection,
    pub controller: ControllerSection,
    pub schedule: ScheduleSection,
    pub experiment: ExperimentSection,
    pub calibration: Option<CalibrationSection>,
}

pub const PAPER_TOML: &str = include_str!("../../../configs/paper.toml");

impl ExperimentConfig {
    pub fn paper() -> Self {
        Self::parse(PAPER_TOML, &[]).expect("bundled config parses")
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut value: toml::Value = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig = if overrides.is_empty() {
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?
        } else {
            value.try_into().map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let e = &self.experiment;
        if e.deltas.is_empty() || e.seeds.is_empty() {
            return Err(CliError::Config("experiment.deltas and experiment.seeds must be nonempty".into()));
        }
        if e.steps == 0 {
            return Err(CliError::Config("experiment.steps must be at least 1".into()));
        }
        for &d in &e.deltas {
            self.schedule_for(d)?;
        }
        self.scenario().plant().map_err(|err| CliError::Config(err.to_string()))?;
        Ok(())
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            a_star: self.plant.a_star.clone(),
            b_star: self.plant.b_star.clone(),
            sigma: self.plant.sigma,
            theta0: self.prior.theta0.clone(),
            half_width: self.prior.half_width,
            k: self.controller.k.clone(),
            f: self.controller.f.clone(),
            g: self.controller.g.clone(),
            lambda: self.controller.lambda,
            horizon: self.controller.horizon,
            q: self.controller.q.clone(),
            r: self.controller.r.clone(),
            x0: self.plant.x0.clone(),
        }
    }

    pub fn schedule_for(&self, delta: f64) -> Result<Schedule, CliError> {
        let s = &self.schedule;
        Schedule::new(delta, s.alpha, s.c1, s.c2, s.c3, self.plant.sigma)
            .map_err(|e| CliError::Config(format!("schedule at delta={delta}: {e}")))
    }

    pub fn run_config(&self, delta: f64, seed: u64) -> Result<RunConfig, CliError> {
        let e = &self.experiment;
        let mut run = RunConfig::new(e.steps, self.schedule_for(delta)?, seed, self.scenario().x0());
        run.mode = e.mode;
        run.freeze_wbar = e.freeze_wbar;
        run.excitation = e.excitation;
        run.assertions = e.assertions;
        run.volume_samples = e.volume_samples;
        Ok(run)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

/// `a.b.c=value`; the value is read as a TOML literal, falling back to a bare string.
/// Only keys already present in the file can be overridden.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{assignment}' is not key=value")))?;
    let path = path.trim();
    let parsed: toml::Value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(key) = parts.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{path}': '{key}' is inside a non-table value")))?;
        if parts.peek().is_none() {
            if !table.contains_key(key) {
                return Err(CliError::Config(format!("override '{path}': unknown key '{key}'")));
            }
            table.insert(key.to_string(), parsed);
            return Ok(());
        }
        node = table
            .get_mut(key)
            .ok_or_else(|| CliError::Config(format!("override '{path}': unknown section '{key}'")))?;
    }
    Err(CliError::Config(format!("override '{assignment}' has an empty key")))
}
