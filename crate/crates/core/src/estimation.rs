//! Least-squares identification, the confidence-radius schedule, excitation
//! noise and the shrinking uncertainty set.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{outer_box_of_ball, GeometryError, HPolytope, Hyperbox, Polytope};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid parametrization: {0}")]
    InvalidParametrization(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no samples recorded yet")]
    NoData,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, EstimationError>;

/// Affine map from θ to `(A(θ), B(θ))`.
///
/// The free entries of `[A B]` are read in row-major order; every other
/// entry is taken from the base matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parametrization {
    a0: DMatrix<f64>,
    b0: DMatrix<f64>,
    /// `mask[i][j]` marks entry `(i, j)` of `[A B]` as a coordinate of θ.
    mask: Vec<Vec<bool>>,
    /// `(row, col)` in `[A B]` of each θ coordinate.
    free: Vec<(usize, usize)>,
}

impl Parametrization {
    pub fn new(a0: DMatrix<f64>, b0: DMatrix<f64>, mask: Vec<Vec<bool>>) -> Result<Self> {
        let dx = a0.nrows();
        let du = b0.ncols();
        if a0.ncols() != dx || b0.nrows() != dx {
            return Err(EstimationError::InvalidParametrization(
                "A must be square and B must have as many rows as A".into(),
            ));
        }
        if mask.len() != dx || mask.iter().any(|r| r.len() != dx + du) {
            return Err(EstimationError::InvalidParametrization(format!(
                "mask must be {dx}x{}",
                dx + du
            )));
        }
        let free: Vec<(usize, usize)> = (0..dx)
            .flat_map(|i| (0..dx + du).map(move |j| (i, j)))
            .filter(|&(i, j)| mask[i][j])
            .collect();
        if free.is_empty() {
            return Err(EstimationError::InvalidParametrization("no free entries".into()));
        }
        Ok(Parametrization { a0, b0, mask, free })
    }

    /// Every entry of `A` free, `B` known.
    pub fn a_free(b: DMatrix<f64>) -> Self {
        let dx = b.nrows();
        let du = b.ncols();
        let mask = (0..dx)
            .map(|_| (0..dx + du).map(|j| j < dx).collect())
            .collect();
        Parametrization::new(DMatrix::zeros(dx, dx), b, mask).expect("a_free shapes are consistent")
    }

    pub fn dx(&self) -> usize {
        self.a0.nrows()
    }

    pub fn du(&self) -> usize {
        self.b0.ncols()
    }

    pub fn dtheta(&self) -> usize {
        self.free.len()
    }

    pub fn mask(&self) -> &[Vec<bool>] {
        &self.mask
    }

    /// `true` when no entry of `B` is free.
    pub fn b_known(&self) -> bool {
        self.free.iter().all(|&(_, j)| j < self.dx())
    }

    pub fn matrices(&self, theta: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        assert_eq!(theta.len(), self.dtheta(), "θ has the wrong length");
        let dx = self.dx();
        let mut a = self.a0.clone();
        let mut b = self.b0.clone();
        for (k, &(i, j)) in self.free.iter().enumerate() {
            if j < dx {
                a[(i, j)] = theta[k];
            } else {
                b[(i, j - dx)] = theta[k];
            }
        }
        (a, b)
    }

    /// Inverse of [`matrices`](Self::matrices) on the free entries.
    pub fn theta_of(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> DVector<f64> {
        let dx = self.dx();
        DVector::from_iterator(
            self.dtheta(),
            self.free
                .iter()
                .map(|&(i, j)| if j < dx { a[(i, j)] } else { b[(i, j - dx)] }),
        )
    }

    /// Entry `(i, j)` of the base `[A B]`.
    fn base(&self, i: usize, j: usize) -> f64 {
        if j < self.dx() {
            self.a0[(i, j)]
        } else {
            self.b0[(i, j - self.dx())]
        }
    }
}

/// `max(‖A(θ₁) − A(θ₂)‖₂, ‖B(θ₁) − B(θ₂)‖₂)`.
pub fn matrix_norm_dist(theta1: &DVector<f64>, theta2: &DVector<f64>, par: &Parametrization) -> f64 {
    let (a1, b1) = par.matrices(theta1);
    let (a2, b2) = par.matrices(theta2);
    spectral_norm(&(a1 - a2)).max(spectral_norm(&(b1 - b2)))
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Running sums behind the least-squares estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    /// `Σ y yᵀ` with `y = (x, u)`.
    pub gram: DMatrix<f64>,
    /// `Σ x⁺ yᵀ`.
    pub cross: DMatrix<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LseEstimate {
    pub theta: DVector<f64>,
    pub rank_deficient: bool,
    /// Smallest eigenvalue of the Gram block over the free regressors, minimized over rows.
    pub lambda_min: f64,
}

impl EstimatorState {
    pub fn new(dx: usize, du: usize) -> Self {
        EstimatorState {
            gram: DMatrix::zeros(dx + du, dx + du),
            cross: DMatrix::zeros(dx, dx + du),
            count: 0,
        }
    }

    pub fn update(&mut self, x: &DVector<f64>, u: &DVector<f64>, x_next: &DVector<f64>) {
        let dx = self.cross.nrows();
        assert_eq!(x.len(), dx, "state dimension");
        assert_eq!(x_next.len(), dx, "successor dimension");
        assert_eq!(u.len() + dx, self.gram.nrows(), "input dimension");
        let mut y = DVector::zeros(self.gram.nrows());
        y.rows_mut(0, dx).copy_from(x);
        y.rows_mut(dx, u.len()).copy_from(u);
        self.gram.ger(1.0, &y, &y, 1.0);
        self.cross.ger(1.0, x_next, &y, 1.0);
        self.count += 1;
    }

    /// Minimum-norm least-squares θ, regressing each row of `[A B]` on its
    /// free regressors after subtracting the known part.
    pub fn lse_point(&self, par: &Parametrization) -> Result<LseEstimate> {
        if self.count == 0 {
            return Err(EstimationError::NoData);
        }
        let dx = par.dx();
        let dy = dx + par.du();
        if self.gram.nrows() != dy {
            return Err(EstimationError::DimensionMismatch { expected: dy, got: self.gram.nrows() });
        }
        let mut theta = DVector::zeros(par.dtheta());
        let mut rank_deficient = false;
        let mut lambda_min = f64::INFINITY;
        for i in 0..dx {
            let cols: Vec<usize> = (0..dy).filter(|&j| par.mask[i][j]).collect();
            if cols.is_empty() {
                continue;
            }
            let known: Vec<usize> = (0..dy).filter(|&j| !par.mask[i][j]).collect();
            let g = DMatrix::from_fn(cols.len(), cols.len(), |r, c| self.gram[(cols[r], cols[c])]);
            let rhs = DVector::from_fn(cols.len(), |r, _| {
                let f = cols[r];
                self.cross[(i, f)]
                    - known
                        .iter()
                        .map(|&k| par.base(i, k) * self.gram[(k, f)])
                        .sum::<f64>()
            });
            let svd = g.clone().svd(true, true);
            let smax = svd.singular_values.max();
            let cutoff = 1e-10 * smax;
            let smin = svd.singular_values.min();
            lambda_min = lambda_min.min(smin);
            if smin < cutoff || smax == 0.0 {
                rank_deficient = true;
            }
            let sol = if smax == 0.0 {
                DVector::zeros(cols.len())
            } else {
                svd.solve(&rhs, cutoff).expect("svd computed with both factors")
            };
            for (r, &f) in cols.iter().enumerate() {
                let k = par
                    .free
                    .iter()
                    .position(|&e| e == (i, f))
                    .expect("free entry is indexed");
                theta[k] = sol[r];
            }
        }
        Ok(LseEstimate { theta, rank_deficient, lambda_min })
    }
}

/// Confidence schedule `ε_t² = c₃ log(t/δ) / t^{1−α}` and the start time
/// `t* = ⌈c₁ + c₂ log(1/δ)⌉`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub delta: f64,
    pub alpha: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub sigma: f64,
}

impl Schedule {
    pub fn new(delta: f64, alpha: f64, c1: f64, c2: f64, c3: f64, sigma: f64) -> Result<Self> {
        let s = Schedule { delta, alpha, c1, c2, c3, sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(EstimationError::InvalidSchedule(m.into()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0 && self.c3 > 0.0) {
            return bad("c1, c2 must be nonnegative and c3 positive");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and nonnegative");
        }
        Ok(())
    }

    pub fn epsilon(&self, t: usize) -> f64 {
        let t = t.max(1) as f64;
        let log = (t / self.delta).ln().max(f64::MIN_POSITIVE);
        (self.c3 * log / t.powf(1.0 - self.alpha)).sqrt()
    }

    pub fn t_star(&self) -> usize {
        (self.c1 + self.c2 * (1.0 / self.delta).ln()).ceil().max(1.0) as usize
    }

    /// Excitation scale `σ_t = (√d_x σ² t^{−α})^{1/2}`.
    pub fn pe_sigma(&self, t: usize, dx: usize) -> f64 {
        let t = t.max(1) as f64;
        ((dx as f64).sqrt() * self.sigma * self.sigma * t.powf(-self.alpha)).sqrt()
    }

    /// Past this time ε_t is nonincreasing.
    pub fn t_mono(&self) -> f64 {
        self.delta * (1.0 / (1.0 - self.alpha)).exp()
    }

    /// `c₃` making `ε_{t*}` equal to `radius`.
    pub fn c3_for_radius(&self, radius: f64) -> f64 {
        let ts = self.t_star() as f64;
        radius * radius * ts.powf(1.0 - self.alpha) / (ts / self.delta).ln()
    }
}

/// Isotropic Gaussian with per-coordinate `scale`, radially clipped to norm `3·scale`.
pub fn clipped_gaussian<R: Rng + ?Sized>(dim: usize, scale: f64, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal) * scale);
    let radius = 3.0 * scale;
    let n = v.norm();
    if n > radius {
        v *= radius / n;
    }
    v
}

/// Excitation noise ζ_t in input space.
pub fn pe_noise<R: Rng + ?Sized>(t: usize, sch: &Schedule, dx: usize, du: usize, rng: &mut R) -> DVector<f64> {
    clipped_gaussian(du, sch.pe_sigma(t, dx), rng)
}

/// What an uncertainty update did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdateOutcome {
    pub frozen: bool,
    pub changed: bool,
    /// The confidence region missed the current set entirely.
    pub anomaly: bool,
}

/// Point estimate θ_t and the set Θ_t with its vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyState {
    pub theta: DVector<f64>,
    pub set: Polytope,
    pub eps: f64,
    pub vertices: Vec<DVector<f64>>,
    pub t_star: usize,
    pub frozen: bool,
    pub anomaly: bool,
}

impl UncertaintyState {
    pub fn new(theta0: DVector<f64>, set0: Polytope, sch: &Schedule) -> Result<Self> {
        if theta0.len() != set0.dim() {
            return Err(EstimationError::DimensionMismatch { expected: set0.dim(), got: theta0.len() });
        }
        let vertices = set0.vertices()?.vertices;
        let eps = inscribed_radius(&set0, &theta0);
        Ok(UncertaintyState {
            theta: theta0,
            set: set0,
            eps,
            vertices,
            t_star: sch.t_star(),
            frozen: true,
            anomaly: false,
        })
    }

    /// Before `t*` nothing changes. Afterwards θ_t is the estimate and Θ_t
    /// is intersected with the box around it of half width `2ε_t`.
    pub fn update(&mut self, theta_hat: &DVector<f64>, t: usize, sch: &Schedule) -> Result<UpdateOutcome> {
        if t < self.t_star {
            self.frozen = true;
            return Ok(UpdateOutcome { frozen: true, ..Default::default() });
        }
        self.frozen = false;
        let eps = sch.epsilon(t);
        self.theta = theta_hat.clone();
        self.eps = eps;
        let delta_box = outer_box_of_ball(theta_hat, 2.0 * eps);
        let next = self.set.intersect(&Polytope::Box(delta_box))?;
        let Some(next) = next else {
            self.anomaly = true;
            return Ok(UpdateOutcome { anomaly: true, ..Default::default() });
        };
        if next == self.set {
            return Ok(UpdateOutcome::default());
        }
        self.vertices = next.vertices()?.vertices;
        self.set = next;
        Ok(UpdateOutcome { changed: true, ..Default::default() })
    }

    /// Swap in a different set (used to inject scenarios in tests).
    pub fn replace_set(&mut self, set: Polytope) -> Result<()> {
        self.vertices = set.vertices()?.vertices;
        self.set = set;
        Ok(())
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        self.set.contains(theta, tol)
    }
}

/// Radius of the largest ℓ∞ ball around `c` inside `set`, or 0 if `c` lies outside.
fn inscribed_radius(set: &Polytope, c: &DVector<f64>) -> f64 {
    match set {
        Polytope::Box(b) => box_margin(b, c).max(0.0),
        Polytope::H(h) => h_margin(h, c).max(0.0),
    }
}

fn box_margin(b: &Hyperbox, c: &DVector<f64>) -> f64 {
    (0..b.dim())
        .map(|i| (c[i] - b.lower()[i]).min(b.upper()[i] - c[i]))
        .fold(f64::INFINITY, f64::min)
}

fn h_margin(h: &HPolytope, c: &DVector<f64>) -> f64 {
    (0..h.num_rows())
        .map(|i| {
            let row = h.a().row(i);
            let l1 = row.iter().map(|v| v.abs()).sum::<f64>();
            (h.b()[i] - (row * c)[0]) / l1.max(f64::MIN_POSITIVE)
        })
        .fold(f64::INFINITY, f64::min)
}
