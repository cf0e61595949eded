//! Closed-loop simulation of the true plant under the adaptive tube
//! controller, the known-parameter oracle, or plain linear feedback.
//!
//! Time runs `t = 1, 2, …`. At step `t` the estimator has seen the `t − 1`
//! transitions recorded so far. A single seed drives three independent
//! ChaCha streams: disturbances, excitation noise and Monte Carlo volumes.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    clipped_gaussian, matrix_norm_dist, pe_noise, EstimationError, EstimatorState, Parametrization, Schedule,
    UncertaintyState,
};
use crate::geometry::{GeometryError, Hyperbox, Polytope};
use crate::tube_mpc::{
    b_bar, control_input, h_identities_hold, noise_bounds, noise_bounds_exact, ExcitationBound, NoiseBounds,
    DesignInput, TubeController, TubeDesign, TubeError, VertexData,
};

const STREAM_W: u64 = 0;
const STREAM_XI: u64 = 1;
const STREAM_MC: u64 = 2;

/// Tolerance on the recursive-feasibility and tube-containment checks.
pub const TAIL_TOL: f64 = 1e-6;
/// Tolerance on `F x + G u ≤ 1`.
pub const CONSTRAINT_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("problem at the initial state is infeasible")]
    InitialInfeasible { dump: Box<serde_json::Value> },
    #[error("contract violation at t={t}: {what}")]
    ContractViolation {
        t: usize,
        what: String,
        dump: Box<serde_json::Value>,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Tube(#[from] TubeError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, SimError>;

/// The true system `x⁺ = A* x + B* u + w`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantConfig {
    pub a_star: DMatrix<f64>,
    pub b_star: DMatrix<f64>,
    pub sigma: f64,
    /// Disturbance set used by the controller; must contain the ball of radius `3σ`.
    pub w: Hyperbox,
}

impl PlantConfig {
    pub fn new(a_star: DMatrix<f64>, b_star: DMatrix<f64>, sigma: f64) -> Result<Self> {
        let dx = a_star.nrows();
        let p = PlantConfig {
            w: Hyperbox::symmetric(dx, 3.0 * sigma),
            a_star,
            b_star,
            sigma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let dx = self.a_star.nrows();
        if self.a_star.ncols() != dx || self.b_star.nrows() != dx {
            return Err(SimError::Config("A* must be square and B* must match its rows".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(SimError::Config("sigma must be nonnegative".into()));
        }
        if self.w.dim() != dx {
            return Err(SimError::Config("W must live in the state space".into()));
        }
        // The ball touches the box faces first, so checking per axis suffices.
        let r = 3.0 * self.sigma;
        if (0..dx).any(|i| self.w.lower()[i] > -r || self.w.upper()[i] < r) {
            return Err(SimError::Config("W must contain the ball of radius 3σ".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> usize {
        self.a_star.nrows()
    }

    pub fn du(&self) -> usize {
        self.b_star.ncols()
    }
}

pub fn sample_disturbance<R: rand::Rng + ?Sized>(rng: &mut R, dx: usize, sigma: f64) -> DVector<f64> {
    clipped_gaussian(dx, sigma, rng)
}

pub fn step_plant(x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, plant: &PlantConfig) -> DVector<f64> {
    &plant.a_star * x + &plant.b_star * u + w
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Adaptive,
    /// Known θ*: singleton set, no excitation, no estimation.
    Oracle,
    /// `u = K x`.
    FeedbackOnly,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub x0: DVector<f64>,
    pub mode: Mode,
    /// Keep `w̄` at its first-step value.
    pub freeze_wbar: bool,
    /// Check the controller's invariants at every step and fail on violation.
    pub assertions: bool,
    pub excitation: ExcitationBound,
    /// Monte Carlo samples for volumes of non-box sets.
    pub volume_samples: usize,
}

impl RunConfig {
    pub fn new(steps: usize, schedule: Schedule, seed: u64, x0: DVector<f64>) -> Self {
        RunConfig {
            steps,
            schedule,
            seed,
            x0,
            mode: Mode::Adaptive,
            freeze_wbar: false,
            assertions: true,
            excitation: ExcitationBound::default(),
            volume_samples: 1_000_000,
        }
    }
}

/// Parametrization, prior set and offline tube design shared by runs.
#[derive(Debug, Clone)]
pub struct ControllerSetup {
    pub par: Parametrization,
    pub theta0: DVector<f64>,
    pub set0: Polytope,
    pub design: Arc<TubeDesign>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub v0: DVector<f64>,
    pub zeta: DVector<f64>,
    pub w: DVector<f64>,
    pub theta: DVector<f64>,
    pub eps: f64,
    pub set: Polytope,
    pub volume: f64,
    pub volume_ratio: f64,
    pub value: f64,
    pub stage_cost: f64,
    pub feasible_current: bool,
    pub rho_used: usize,
    pub anomaly: bool,
    /// `‖θ_t − θ*‖ ≤ ε_t`, evaluated from `t*` on.
    pub g_monitor: Option<bool>,
    /// `θ* ∈ Θ_t`.
    pub covered: bool,
    /// Worst constraint violation of the previous solution's tail in this step's problem.
    pub tail_violation: Option<f64>,
    /// `max(T x_t − α*_{1|t−1})`.
    pub tube_violation: Option<f64>,
    /// Worst residual of the H identities and most negative H entry.
    pub h_residual: f64,
    pub h_min: f64,
    pub constraint_margin: f64,
    pub qp_iterations: usize,
    pub kkt_residual: f64,
    /// Tube offsets `α*_{0|t} … α*_{N|t}`.
    pub alpha: Vec<DVector<f64>>,
    pub w_bar: DVector<f64>,
    pub zeta_bar: DVector<f64>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub seed: u64,
    pub mode: Mode,
    pub delta: f64,
    pub t_star: usize,
    pub volume0: f64,
    pub steps: Vec<StepRecord>,
    pub fallbacks: usize,
}

/// Per-step `max(F x + G u − 1)` and the first step above tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub per_step: Vec<f64>,
    pub worst: f64,
    pub first_violation: Option<usize>,
}

pub fn check_constraints(
    xs: &[DVector<f64>],
    us: &[DVector<f64>],
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> ViolationReport {
    let per_step: Vec<f64> = xs
        .iter()
        .zip(us)
        .map(|(x, u)| (f * x + g * u).add_scalar(-1.0).max())
        .collect();
    let worst = per_step.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first_violation = per_step.iter().position(|v| *v > CONSTRAINT_TOL);
    ViolationReport { per_step, worst, first_violation }
}

impl Trace {
    pub fn constraint_report(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> ViolationReport {
        let xs: Vec<_> = self.steps.iter().map(|s| s.x.clone()).collect();
        let us: Vec<_> = self.steps.iter().map(|s| s.u.clone()).collect();
        check_constraints(&xs, &us, f, g)
    }

    /// The monitored event held at every step from `t*` on.
    pub fn g_holds(&self) -> bool {
        self.steps.iter().all(|s| s.g_monitor != Some(false))
    }

    pub fn always_covered(&self) -> bool {
        self.steps.iter().all(|s| s.covered)
    }

    pub fn step(&self, t: usize) -> Option<&StepRecord> {
        self.steps.get(t.checked_sub(1)?)
    }

    /// Stable column order; wall-clock time is left out so reruns match byte for byte.
    pub fn csv_header(&self) -> String {
        let s = &self.steps[0];
        let mut cols = vec!["t".to_string()];
        let vecs: [(&str, usize); 6] = [
            ("x", s.x.len()),
            ("u", s.u.len()),
            ("v0", s.v0.len()),
            ("zeta", s.zeta.len()),
            ("w", s.w.len()),
            ("theta", s.theta.len()),
        ];
        for (name, n) in vecs {
            cols.extend((1..=n).map(|i| format!("{name}{i}")));
        }
        cols.extend(
            [
                "eps",
                "volume",
                "volume_ratio",
                "value",
                "stage_cost",
                "feasible_current",
                "rho_used",
                "anomaly",
                "g_monitor",
                "covered",
                "tail_violation",
                "tube_violation",
                "constraint_margin",
            ]
            .map(String::from),
        );
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        if self.steps.is_empty() {
            return String::new();
        }
        let mut out = self.csv_header();
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for s in &self.steps {
            let mut f: Vec<String> = vec![s.t.to_string()];
            for v in [&s.x, &s.u, &s.v0, &s.zeta, &s.w, &s.theta] {
                f.extend(v.iter().map(|x| x.to_string()));
            }
            f.push(s.eps.to_string());
            f.push(s.volume.to_string());
            f.push(s.volume_ratio.to_string());
            f.push(s.value.to_string());
            f.push(s.stage_cost.to_string());
            f.push((s.feasible_current as u8).to_string());
            f.push(s.rho_used.to_string());
            f.push((s.anomaly as u8).to_string());
            f.push(s.g_monitor.map(|b| (b as u8).to_string()).unwrap_or_default());
            f.push((s.covered as u8).to_string());
            f.push(opt(s.tail_violation));
            f.push(opt(s.tube_violation));
            f.push(s.constraint_margin.to_string());
            out.push_str(&f.join(","));
            out.push('\n');
        }
        out
    }
}

fn volume_of(set: &Polytope, samples: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(set.volume(samples, rng)?.value)
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn bounds_for(
    design: &TubeDesign,
    plant: &PlantConfig,
    excitation: ExcitationBound,
    sigma_t: f64,
    vd: &VertexData,
    vertices: &[DVector<f64>],
    par: &Parametrization,
) -> Result<NoiseBounds> {
    Ok(match excitation {
        ExcitationBound::Box => noise_bounds(&design.t, &design.g, &plant.w, sigma_t, b_bar(vertices, par))?,
        ExcitationBound::Support => noise_bounds_exact(&design.t, &design.g, &plant.w, sigma_t, vd)?,
    })
}

/// Execute `run.steps` steps of the chosen controller on the plant.
pub fn run_closed_loop(plant: &PlantConfig, run: &RunConfig, setup: &ControllerSetup) -> Result<Trace> {
    plant.validate()?;
    run.schedule.validate()?;
    if run.steps == 0 {
        return Err(SimError::Config("steps must be at least 1".into()));
    }
    let par = &setup.par;
    let design = setup.design.as_ref();
    let dx = plant.dx();
    let du = plant.du();
    if run.x0.len() != dx || par.dx() != dx || par.du() != du {
        return Err(SimError::Config("plant, parametrization and x0 dimensions disagree".into()));
    }
    let theta_star = par.theta_of(&plant.a_star, &plant.b_star);
    let mut w_rng = rng_stream(run.seed, STREAM_W);
    let mut xi_rng = rng_stream(run.seed, STREAM_XI);
    let mut mc_rng = rng_stream(run.seed, STREAM_MC);
    let sch = &run.schedule;

    let (theta_init, set_init) = match run.mode {
        Mode::Oracle => (theta_star.clone(), Polytope::Box(Hyperbox::point(&theta_star))),
        _ => (setup.theta0.clone(), setup.set0.clone()),
    };
    let mut unc = UncertaintyState::new(theta_init.clone(), set_init, sch)?;
    let volume0 = volume_of(&setup.set0, run.volume_samples, &mut mc_rng)?;
    let mut est = EstimatorState::new(dx, du);
    let mut ctrl = TubeController::new(setup.design.clone(), par.clone(), &theta_init, &unc.vertices)?;

    let mut steps: Vec<StepRecord> = Vec::with_capacity(run.steps);
    let mut x = run.x0.clone();
    let mut prev: Option<(crate::tube_mpc::TubeProblem, DVector<f64>, bool)> = None;
    let mut volume = volume0;
    let mut frozen_bounds: Option<NoiseBounds> = None;
    for t in 1..=run.steps {
        let clock = Instant::now();
        let mut anomaly = false;
        let mut set_changed = false;
        if run.mode == Mode::Adaptive && est.count > 0 {
            let lse = est.lse_point(par)?;
            let out = unc.update(&lse.theta, t, sch)?;
            anomaly = out.anomaly;
            set_changed = out.changed;
        }
        if set_changed {
            volume = volume_of(&unc.set, run.volume_samples, &mut mc_rng)?;
        }
        let g_monitor = (run.mode == Mode::Adaptive && t >= unc.t_star)
            .then(|| matrix_norm_dist(&unc.theta, &theta_star, par) <= unc.eps);
        let covered = unc.contains(&theta_star, 1e-12);

        let (u, v0, zeta, value, feasible_current, rho_used, alpha, nb, tail_violation, tube_violation, hres, qp_it, kkt) =
            if run.mode == Mode::FeedbackOnly {
                let u = &design.k * &x;
                let z = DVector::zeros(du);
                let nb = NoiseBounds {
                    w_bar: DVector::zeros(design.d_alpha()),
                    zeta_bar: DVector::zeros(design.d_c()),
                    b_bar: 0.0,
                };
                (u, z.clone(), z, f64::NAN, true, t, Vec::new(), nb, None, None, (0.0, 0.0), 0, 0.0)
            } else {
                let vd = ctrl.vertex_data(&unc.vertices)?;
                let sigma_t = if run.mode == Mode::Oracle { 0.0 } else { sch.pe_sigma(t, dx) };
                let nb = match (&frozen_bounds, run.freeze_wbar) {
                    (Some(b), true) => b.clone(),
                    _ => {
                        let b = bounds_for(design, plant, run.excitation, sigma_t, &vd, &unc.vertices, par)?;
                        frozen_bounds.get_or_insert_with(|| b.clone());
                        b
                    }
                };
                let hres = vd.check(&design.t);
                if run.assertions && !h_identities_hold(design, &vd) {
                    return Err(SimError::ContractViolation {
                        t,
                        what: format!("H identities fail: residual {:e}, min entry {:e}", hres.0, hres.1),
                        dump: Box::new(serde_json::to_value(&*vd).unwrap_or_default()),
                    });
                }
                let solved = match ctrl.solve_with_fallback(t, &x, &unc.theta, vd, &nb) {
                    Ok(s) => s,
                    Err(TubeError::AllInfeasible { dump }) if t == 1 => {
                        return Err(SimError::InitialInfeasible { dump })
                    }
                    Err(TubeError::AllInfeasible { dump }) => {
                        return Err(SimError::ContractViolation {
                            t,
                            what: "no stored parameter set is feasible".into(),
                            dump,
                        })
                    }
                    Err(e) => return Err(e.into()),
                };
                let (tail_violation, tube_violation) = match &prev {
                    Some((p, z, _)) => {
                        let tail = p.tail_point(z);
                        let tv = solved.current.max_violation(&tail);
                        let alpha1 = z.rows(p.alpha_index(1), p.d_alpha);
                        let cv = (&design.t * &x - alpha1).max();
                        (Some(tv), Some(cv))
                    }
                    None => (None, None),
                };
                if run.assertions {
                    if let (Some((_, _, prev_covered)), Some(tv), Some(cv)) = (&prev, tail_violation, tube_violation) {
                        if *prev_covered && (tv > TAIL_TOL || cv > TAIL_TOL) {
                            let blocks = prev
                                .as_ref()
                                .map(|(p, z, _)| solved.current.block_violations(&p.tail_point(z)))
                                .unwrap_or_default();
                            let worst: Vec<_> = blocks.into_iter().filter(|(_, v)| *v > TAIL_TOL).collect();
                            return Err(SimError::ContractViolation {
                                t,
                                what: format!("tail point violates problem by {tv:e} (tube {cv:e}); blocks {worst:?}"),
                                dump: Box::new(solved.current.dump(Some(&solved.current_report))),
                            });
                        }
                    }
                }
                let o = &solved.output;
                let zeta = if run.mode == Mode::Adaptive {
                    pe_noise(t, sch, dx, du, &mut xi_rng)
                } else {
                    DVector::zeros(du)
                };
                let u = control_input(&x, &o.v_star[0], &zeta, &design.k);
                let used_problem = if o.feasible_current {
                    solved.current.clone()
                } else {
                    // Rebuild the instance actually solved so the next tail check uses it.
                    let entry = ctrl
                        .history()
                        .iter()
                        .rev()
                        .find(|h| h.t == o.rho_used)
                        .cloned()
                        .expect("fallback entry is in the history");
                    ctrl.build(&x, &entry.theta, &entry.vertices, &nb)?
                };
                prev = Some((used_problem, o.z.clone(), covered));
                (
                    u,
                    o.v_star[0].clone(),
                    zeta,
                    o.value,
                    o.feasible_current,
                    o.rho_used,
                    o.alpha_star.clone(),
                    nb,
                    tail_violation,
                    tube_violation,
                    hres,
                    o.iterations,
                    o.kkt_residual,
                )
            };

        let margin = (&design.f * &x + &design.g * &u).add_scalar(-1.0).max();
        if run.assertions && run.mode != Mode::FeedbackOnly && covered && margin > CONSTRAINT_TOL {
            return Err(SimError::ContractViolation {
                t,
                what: format!("constraints violated by {margin:e}"),
                dump: Box::new(serde_json::json!({ "x": x.as_slice(), "u": u.as_slice() })),
            });
        }
        let w = sample_disturbance(&mut w_rng, dx, plant.sigma);
        let x_next = step_plant(&x, &u, &w, plant);
        if run.mode == Mode::Adaptive {
            est.update(&x, &u, &x_next);
        }
        let stage_cost = x.dot(&(&design.q * &x)) + u.dot(&(&design.r * &u));
        steps.push(StepRecord {
            t,
            x: x.clone(),
            u,
            v0,
            zeta,
            w,
            theta: unc.theta.clone(),
            eps: unc.eps,
            set: unc.set.clone(),
            volume,
            volume_ratio: if volume0 > 0.0 { volume / volume0 } else { 0.0 },
            value,
            stage_cost,
            feasible_current,
            rho_used,
            anomaly,
            g_monitor,
            covered,
            tail_violation,
            tube_violation,
            h_residual: hres.0,
            h_min: hres.1,
            constraint_margin: margin,
            qp_iterations: qp_it,
            kkt_residual: kkt,
            alpha,
            w_bar: nb.w_bar,
            zeta_bar: nb.zeta_bar,
            wall_seconds: clock.elapsed().as_secs_f64(),
        });
        x = x_next;
    }
    Ok(Trace {
        seed: run.seed,
        mode: run.mode,
        delta: sch.delta,
        t_star: sch.t_star(),
        volume0,
        steps,
        fallbacks: ctrl.fallbacks,
    })
}

/// Same loop with θ* known exactly.
pub fn run_oracle(plant: &PlantConfig, run: &RunConfig, setup: &ControllerSetup) -> Result<Trace> {
    let run = RunConfig { mode: Mode::Oracle, ..run.clone() };
    run_closed_loop(plant, &run, setup)
}

/// Result of fitting `c3` on pilot runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Calibration {
    pub c3: f64,
    /// Smallest `c3` that would have kept θ* inside every box of each pilot run.
    pub per_run: Vec<f64>,
    pub quantile: f64,
    pub safety: f64,
}

impl Calibration {
    /// `safety` times the empirical `quantile` of the per-run requirements.
    pub fn from_runs(per_run: Vec<f64>, quantile: f64, safety: f64) -> Self {
        let mut sorted = per_run.clone();
        sorted.sort_by(f64::total_cmp);
        let idx = ((quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len().max(1)) - 1;
        Calibration {
            c3: sorted.get(idx).copied().unwrap_or(f64::NAN) * safety,
            per_run,
            quantile,
            safety,
        }
    }
}

/// Smallest `c3` for which `|θ̂_s − θ*|_∞ ≤ 2ε_s` at every `t* ≤ s ≤ steps`,
/// given the estimates of one trajectory.
pub fn required_c3(errors: &[(usize, f64)], sch: &Schedule) -> f64 {
    let t_star = sch.t_star();
    errors
        .iter()
        .filter(|(t, _)| *t >= t_star)
        .map(|&(t, e)| {
            let t = t as f64;
            (e / 2.0).powi(2) * t.powf(1.0 - sch.alpha) / (t / sch.delta).ln()
        })
        .fold(0.0, f64::max)
}

/// Fit `c3` so that θ* stays inside the boxes of a `quantile` fraction of pilot runs,
/// then scale by `safety`. Pilots run with the set frozen at Θ₀, which is the
/// least informative trajectory the controller can produce.
pub fn calibrate_c3(
    plant: &PlantConfig,
    run: &RunConfig,
    setup: &ControllerSetup,
    pilot_seeds: &[u64],
    quantile: f64,
    safety: f64,
) -> Result<Calibration> {
    if pilot_seeds.is_empty() || !(0.0..=1.0).contains(&quantile) || !(safety > 0.0) {
        return Err(SimError::Config("calibration needs seeds, a quantile in [0,1] and positive safety".into()));
    }
    let theta_star = setup.par.theta_of(&plant.a_star, &plant.b_star);
    let frozen = Schedule { c3: 1e6, ..run.schedule };
    let mut per_run = Vec::with_capacity(pilot_seeds.len());
    for &seed in pilot_seeds {
        let pilot = RunConfig {
            seed,
            schedule: frozen,
            mode: Mode::Adaptive,
            volume_samples: 1,
            ..run.clone()
        };
        let trace = run_closed_loop(plant, &pilot, setup)?;
        let mut est = EstimatorState::new(plant.dx(), plant.du());
        let mut errors = Vec::with_capacity(trace.steps.len());
        for w in trace.steps.windows(2) {
            est.update(&w[0].x, &w[0].u, &w[1].x);
            let th = est.lse_point(&setup.par)?.theta;
            errors.push((w[1].t, (&th - &theta_star).amax()));
        }
        per_run.push(required_c3(&errors, &run.schedule));
    }
    Ok(Calibration::from_runs(per_run, quantile, safety))
}

/// Plain-data description of a plant and controller, in row-major nested lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub a_star: Vec<Vec<f64>>,
    pub b_star: Vec<Vec<f64>>,
    pub sigma: f64,
    /// Prior box center, over the entries of A in row-major order.
    pub theta0: Vec<f64>,
    pub half_width: f64,
    pub k: Vec<Vec<f64>>,
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub lambda: f64,
    pub horizon: usize,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub x0: Vec<f64>,
}

fn matrix(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let n = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(SimError::Config(format!("{name} must be a nonempty rectangular matrix")));
    }
    Ok(DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]))
}

impl Default for Scenario {
    fn default() -> Self {
        Self::paper()
    }
}

impl Scenario {
    /// Two-state example with unknown A and known B.
    pub fn paper() -> Self {
        Scenario {
            a_star: vec![vec![0.6, 0.2], vec![-0.1, 0.4]],
            b_star: vec![vec![1.0], vec![0.6]],
            sigma: 0.01,
            theta0: vec![0.57, 0.17, -0.12, 0.42],
            half_width: 0.07,
            k: vec![vec![-0.426, -0.290]],
            f: vec![vec![-1.0 / 0.15, 0.0], vec![0.0, -1.0 / 1.1], vec![0.0, 0.0]],
            g: vec![vec![0.0], vec![0.0], vec![2.0]],
            lambda: 0.999,
            horizon: 10,
            q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            r: vec![vec![1.0]],
            x0: vec![6.0, 3.0],
        }
    }

    pub fn plant(&self) -> Result<PlantConfig> {
        PlantConfig::new(matrix(&self.a_star, "a_star")?, matrix(&self.b_star, "b_star")?, self.sigma)
    }

    pub fn x0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0)
    }

    /// Parametrization, prior box and offline design.
    pub fn setup(&self) -> Result<ControllerSetup> {
        let b = matrix(&self.b_star, "b_star")?;
        let par = Parametrization::a_free(b);
        if self.theta0.len() != par.dtheta() {
            return Err(SimError::Config(format!("theta0 needs {} entries", par.dtheta())));
        }
        if !(self.half_width > 0.0) {
            return Err(SimError::Config("half_width must be positive".into()));
        }
        let theta0 = DVector::from_column_slice(&self.theta0);
        let set0 = Hyperbox::centered(&theta0, &DVector::from_element(theta0.len(), self.half_width))?;
        let vertices = set0.vertices()?.vertices;
        let input = DesignInput {
            k: matrix(&self.k, "k")?,
            f: matrix(&self.f, "f")?,
            g: matrix(&self.g, "g")?,
            lambda: self.lambda,
            horizon: self.horizon,
            q: matrix(&self.q, "q")?,
            r: matrix(&self.r, "r")?,
        };
        let design = TubeDesign::synthesize(input, &vertices, &par)?;
        Ok(ControllerSetup {
            par,
            theta0,
            set0: Polytope::Box(set0),
            design: Arc::new(design),
        })
    }
}
