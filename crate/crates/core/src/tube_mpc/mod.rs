//! Polytopic tube MPC: design-time template and multipliers, per-step
//! problem assembly and the fallback to earlier feasible parameter sets.

mod design;
mod problem;

pub use design::{closed_loop, compute_hc, compute_hj, dlqr, nonnegative_factor, DesignInput, TubeDesign, H_TOL};
pub use problem::{
    b_bar, build_problem, h_identities_hold, noise_bounds, noise_bounds_exact, ExcitationBound, terminal_cost, vertex_entry, ConstraintBlock,
    ConstraintTag, NoiseBounds, Nominal, TubeProblem, VertexData, VertexEntry,
};

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::Parametrization;
use crate::geometry::GeometryError;
use crate::solvers::{solve_qp_warm, QpSettings, SolveReport, SolverError, Status};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error("no nonnegative multiplier row {0} exists for this template")]
    RowInfeasible(usize),
    #[error("every stored parameter set gives an infeasible problem")]
    AllInfeasible { dump: Box<serde_json::Value> },
    #[error("invalid tube data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, TubeError>;

/// `u = K x + v₀ + ζ`.
pub fn control_input(x: &DVector<f64>, v0: &DVector<f64>, zeta: &DVector<f64>, k: &DMatrix<f64>) -> DVector<f64> {
    k * x + v0 + zeta
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlOutput {
    pub v_star: Vec<DVector<f64>>,
    pub alpha_star: Vec<DVector<f64>>,
    /// Stacked decision vector `(v, α)`.
    pub z: DVector<f64>,
    pub value: f64,
    /// Time index of the parameter set the solved problem was built from.
    pub rho_used: usize,
    pub feasible_current: bool,
    pub iterations: usize,
    pub kkt_residual: f64,
}

/// A parameter set for which the problem was solved.
#[derive(Debug, Clone)]
pub struct HistoryEntry {
    pub t: usize,
    pub theta: DVector<f64>,
    pub vertices: Arc<VertexData>,
}

/// Result of one controller call.
#[derive(Debug, Clone)]
pub struct Solved {
    pub output: ControlOutput,
    /// Problem built from the current estimates, whether or not it was the one solved.
    pub current: TubeProblem,
    pub current_report: SolveReport,
}

/// Stateful per-run controller: H cache, feasible history, warm start.
#[derive(Debug, Clone)]
pub struct TubeController {
    design: Arc<TubeDesign>,
    par: Parametrization,
    settings: QpSettings,
    cache: HashMap<Vec<u64>, VertexEntry>,
    cached_p: Option<(DVector<f64>, DMatrix<f64>)>,
    history: Vec<HistoryEntry>,
    last_z: Option<DVector<f64>>,
    pub fallbacks: usize,
}

fn key(theta: &DVector<f64>) -> Vec<u64> {
    theta.iter().map(|v| v.to_bits()).collect()
}

impl TubeController {
    /// The initial parameter set becomes the `t = 0` history entry.
    pub fn new(design: Arc<TubeDesign>, par: Parametrization, theta0: &DVector<f64>, vertices0: &[DVector<f64>]) -> Result<Self> {
        let settings = QpSettings {
            check_convexity: false,
            ..QpSettings::default()
        };
        let mut c = TubeController {
            design,
            par,
            settings,
            cache: HashMap::new(),
            cached_p: None,
            history: Vec::new(),
            last_z: None,
            fallbacks: 0,
        };
        let vd = c.vertex_data(vertices0)?;
        c.history.push(HistoryEntry { t: 0, theta: theta0.clone(), vertices: vd });
        Ok(c)
    }

    pub fn design(&self) -> &TubeDesign {
        &self.design
    }

    pub fn parametrization(&self) -> &Parametrization {
        &self.par
    }

    pub fn history(&self) -> &[HistoryEntry] {
        &self.history
    }

    /// Vertex data with H matrices recomputed only for unseen vertices.
    pub fn vertex_data(&mut self, vertices: &[DVector<f64>]) -> Result<Arc<VertexData>> {
        let mut entries = Vec::with_capacity(vertices.len());
        let mut seen = HashMap::with_capacity(vertices.len());
        for th in vertices {
            let k = key(th);
            let e = match self.cache.get(&k) {
                Some(e) => e.clone(),
                None => {
                    let e = vertex_entry(th, &self.par, &self.design)?;
                    self.cache.insert(k.clone(), e.clone());
                    e
                }
            };
            seen.insert(k, ());
            entries.push(e);
        }
        // Vertices of a shrinking set never come back, so older ones can go.
        self.cache.retain(|k, _| seen.contains_key(k));
        Ok(Arc::new(VertexData { entries }))
    }

    fn terminal(&mut self, theta: &DVector<f64>) -> Result<DMatrix<f64>> {
        if let Some((th, p)) = &self.cached_p {
            if th == theta {
                return Ok(p.clone());
            }
        }
        let p = terminal_cost(theta, &self.par, &self.design)?;
        self.cached_p = Some((theta.clone(), p.clone()));
        Ok(p)
    }

    pub fn build(&mut self, x: &DVector<f64>, theta: &DVector<f64>, vd: &VertexData, noise: &NoiseBounds) -> Result<TubeProblem> {
        let p = self.terminal(theta)?;
        let (a, b) = self.par.matrices(theta);
        build_problem(x, Nominal { a: &a, b: &b }, vd, noise, &self.design, &p)
    }

    fn solve(&self, prob: &TubeProblem) -> Result<SolveReport> {
        let guess = self
            .last_z
            .as_ref()
            .filter(|z| z.len() == prob.num_vars())
            .map(|z| prob.tail_point(z));
        Ok(solve_qp_warm(&prob.qp, &self.settings, guess.as_ref())?)
    }

    fn output(&self, prob: &TubeProblem, rep: &SolveReport, rho_used: usize, feasible_current: bool) -> ControlOutput {
        let (v_star, alpha_star) = prob.split(&rep.x);
        ControlOutput {
            v_star,
            alpha_star,
            z: rep.x.clone(),
            value: prob.value(&rep.x),
            rho_used,
            feasible_current,
            iterations: rep.iterations,
            kkt_residual: rep.kkt_residual(),
        }
    }

    /// Solve at the current estimates; if infeasible, walk the feasible
    /// history from newest to oldest.
    pub fn solve_with_fallback(
        &mut self,
        t: usize,
        x: &DVector<f64>,
        theta: &DVector<f64>,
        vd: Arc<VertexData>,
        noise: &NoiseBounds,
    ) -> Result<Solved> {
        let current = self.build(x, theta, &vd, noise)?;
        let rep = self.solve(&current)?;
        if rep.status == Status::Optimal {
            let output = self.output(&current, &rep, t, true);
            self.last_z = Some(rep.x.clone());
            let same = self
                .history
                .last()
                .is_some_and(|h| h.theta == *theta && Arc::ptr_eq(&h.vertices, &vd));
            if !same {
                self.history.push(HistoryEntry { t, theta: theta.clone(), vertices: vd });
            }
            return Ok(Solved { output, current, current_report: rep });
        }
        log::warn!("t={t}: problem at current estimates is {:?}; trying stored sets", rep.status);
        let history = self.history.clone();
        for entry in history.iter().rev() {
            let prob = self.build(x, &entry.theta, &entry.vertices, noise)?;
            let r = self.solve(&prob)?;
            if r.status == Status::Optimal {
                self.fallbacks += 1;
                let output = self.output(&prob, &r, entry.t, false);
                self.last_z = Some(r.x.clone());
                return Ok(Solved { output, current, current_report: rep });
            }
        }
        Err(TubeError::AllInfeasible { dump: Box::new(current.dump(Some(&rep))) })
    }
}
