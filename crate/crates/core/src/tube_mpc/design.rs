use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{Result, TubeError};
use crate::estimation::Parametrization;
use crate::geometry::{contractive_set, ContractiveOptions};
use crate::solvers::{solve_lp, LpProblem, LpSettings, Status};

/// Equality residual allowed in the H-matrix identities.
pub const H_TOL: f64 = 1e-8;

/// Fixed ingredients of the tube controller.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TubeDesign {
    /// Tube template: cross sections are `{x : T x ≤ α}`.
    pub t: DMatrix<f64>,
    pub hc: DMatrix<f64>,
    pub lambda: f64,
    pub k: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Passes of the contractive-set iteration and its verified ratio.
    pub contractive_iterations: usize,
    pub contractive_ratio: f64,
}

/// Everything needed to synthesize a [`TubeDesign`].
#[derive(Debug, Clone)]
pub struct DesignInput {
    pub k: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub lambda: f64,
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl TubeDesign {
    /// Build `T` as a λ-contractive subset of `{(F + GK) x ≤ 1}` for every
    /// closed-loop vertex matrix, then `H_c`.
    pub fn synthesize(input: DesignInput, vertices: &[DVector<f64>], par: &Parametrization) -> Result<Self> {
        let DesignInput { k, f, g, lambda, horizon, q, r } = input;
        let dx = par.dx();
        let du = par.du();
        if k.nrows() != du || k.ncols() != dx {
            return Err(TubeError::Invalid(format!("K must be {du}x{dx}")));
        }
        if f.ncols() != dx || g.ncols() != du || f.nrows() != g.nrows() {
            return Err(TubeError::Invalid("F and G must share rows and match (d_x, d_u)".into()));
        }
        if q.shape() != (dx, dx) || r.shape() != (du, du) {
            return Err(TubeError::Invalid("Q and R must be square in state and input".into()));
        }
        if horizon == 0 {
            return Err(TubeError::Invalid("horizon must be at least 1".into()));
        }
        let phis: Vec<DMatrix<f64>> = vertices.iter().map(|th| closed_loop(par, th, &k)).collect();
        let c = &f + &g * &k;
        let set = contractive_set(&phis, &c, lambda, &ContractiveOptions::default())?;
        let hc = compute_hc(&set.t, &f, &g, &k)?;
        Ok(TubeDesign {
            t: set.t,
            hc,
            lambda,
            k,
            f,
            g,
            horizon,
            q,
            r,
            contractive_iterations: set.iterations,
            contractive_ratio: set.max_ratio,
        })
    }

    pub fn dx(&self) -> usize {
        self.t.ncols()
    }

    pub fn du(&self) -> usize {
        self.g.ncols()
    }

    pub fn d_alpha(&self) -> usize {
        self.t.nrows()
    }

    pub fn d_c(&self) -> usize {
        self.f.nrows()
    }

    /// `F + G K`.
    pub fn c(&self) -> DMatrix<f64> {
        &self.f + &self.g * &self.k
    }

    /// Worst residual of `H_c T = F + G K` and the most negative entry of `H_c`.
    pub fn hc_check(&self) -> (f64, f64) {
        ((&self.hc * &self.t - self.c()).amax(), self.hc.min())
    }
}

/// `Φ(θ) = A(θ) + B(θ) K`.
pub fn closed_loop(par: &Parametrization, theta: &DVector<f64>, k: &DMatrix<f64>) -> DMatrix<f64> {
    let (a, b) = par.matrices(theta);
    a + b * k
}

/// Row-wise `min 1ᵀh  s.t.  hᵀT = targetᵢ,  h ≥ 0`.
pub fn nonnegative_factor(t: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let da = t.nrows();
    if target.ncols() != t.ncols() {
        return Err(TubeError::Invalid("target rows must live in the state space".into()));
    }
    let tt = t.transpose();
    let mut h = DMatrix::zeros(target.nrows(), da);
    for i in 0..target.nrows() {
        let row = target.row(i).transpose();
        if row.amax() == 0.0 {
            continue;
        }
        let lp = LpProblem::new(DVector::from_element(da, 1.0))
            .with_equalities(tt.clone(), row.clone())
            .nonnegative();
        let rep = solve_lp(&lp, &LpSettings::default())?;
        if rep.status != Status::Optimal {
            return Err(TubeError::RowInfeasible(i));
        }
        let hi = rep.x.map(|v| v.max(0.0));
        if (&tt * &hi - &row).amax() > H_TOL {
            return Err(TubeError::RowInfeasible(i));
        }
        h.set_row(i, &hi.transpose());
    }
    Ok(h)
}

pub fn compute_hc(t: &DMatrix<f64>, f: &DMatrix<f64>, g: &DMatrix<f64>, k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nonnegative_factor(t, &(f + g * k))
}

pub fn compute_hj(t: &DMatrix<f64>, phi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    nonnegative_factor(t, &(t * phi))
}

/// Infinite-horizon LQR gain (`u = K x`) by Riccati iteration.
pub fn dlqr(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut p = q.clone();
    for _ in 0..10_000 {
        let btp = b.transpose() * &p;
        let s = r + &btp * b;
        let k = s
            .clone()
            .cholesky()
            .ok_or_else(|| TubeError::Invalid("R + BᵀPB is not positive definite".into()))?
            .solve(&(&btp * a));
        let next = q + a.transpose() * &p * a - a.transpose() * &p * b * &k;
        let next = (&next + next.transpose()) * 0.5;
        let diff = (&next - &p).amax();
        p = next;
        if diff <= 1e-13 * p.amax().max(1.0) {
            return Ok(-k);
        }
    }
    Err(TubeError::Invalid("Riccati iteration did not converge".into()))
}
