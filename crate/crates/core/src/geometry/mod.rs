//! Polytopes in half-space form and axis-aligned boxes.
//!
//! Uncertainty sets in parameter space, disturbance sets and tube cross
//! sections all live here. Boxes are kept as their own type because every
//! box-with-box operation (intersection, Minkowski sum, support, volume,
//! corners) has a closed form; general polytopes fall back on LPs.

mod contractive;
mod vertices;
mod volume;

pub use contractive::{contractive_set, verify_contractive, ContractiveOptions, ContractiveSet};
pub use volume::VolumeEstimate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solvers::{solve_lp, LpProblem, LpSettings, SolverError, Status};

/// Membership and duplicate tolerance for vertex lists.
pub const VERTEX_TOL: f64 = 1e-9;
/// Rows whose maximum over the rest exceeds the offset by less than this are dropped.
pub const REDUNDANCY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("set is unbounded in the queried direction")]
    Unbounded,
    #[error("set is empty")]
    Infeasible,
    #[error("dimension {0} is too large for vertex enumeration")]
    DimensionTooLarge(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("contractive set iteration did not converge within {0} passes")]
    NoConvergence(usize),
    #[error("vertex {index} has spectral radius {radius} >= 1")]
    UnstableVertex { index: usize, radius: f64 },
    #[error("invalid set data: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, got })
    }
}

/// `max dᵀx  s.t.  A x ≤ b`.
pub(crate) fn maximize(a: &DMatrix<f64>, b: &DVector<f64>, d: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    let lp = LpProblem::new(-d).with_inequalities(a.clone(), b.clone());
    let rep = solve_lp(&lp, &LpSettings::default())?;
    match rep.status {
        Status::Optimal => Ok((-rep.objective, rep.x)),
        Status::Unbounded => Err(GeometryError::Unbounded),
        Status::Infeasible => Err(GeometryError::Infeasible),
        Status::MaxIter => Err(GeometryError::Solver(SolverError::InvalidProblem(
            "LP iteration cap reached".into(),
        ))),
    }
}

/// `{x : A x ≤ b}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "HRepr", into = "HRepr")]
pub struct HPolytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct HRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl TryFrom<HRepr> for HPolytope {
    type Error = GeometryError;

    fn try_from(r: HRepr) -> Result<Self> {
        let m = r.a.len();
        let n = r.a.first().map(|row| row.len()).unwrap_or(0);
        if r.a.iter().any(|row| row.len() != n) {
            return Err(GeometryError::Invalid("ragged constraint matrix".into()));
        }
        let a = DMatrix::from_fn(m, n, |i, j| r.a[i][j]);
        HPolytope::new(a, DVector::from_vec(r.b))
    }
}

impl From<HPolytope> for HRepr {
    fn from(p: HPolytope) -> Self {
        HRepr {
            a: (0..p.a.nrows())
                .map(|i| p.a.row(i).iter().copied().collect())
                .collect(),
            b: p.b.iter().copied().collect(),
        }
    }
}

impl HPolytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(GeometryError::Invalid(format!(
                "{} rows but {} offsets",
                a.nrows(),
                b.len()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| v.is_nan()) {
            return Err(GeometryError::Invalid("NaN in half-space data".into()));
        }
        Ok(HPolytope { a, b })
    }

    /// `{x : T x ≤ 1}`.
    pub fn unit_level(t: DMatrix<f64>) -> Self {
        let m = t.nrows();
        HPolytope {
            a: t,
            b: DVector::from_element(m, 1.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && (&self.a * x - &self.b).iter().all(|v| *v <= tol)
    }

    pub fn support(&self, d: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), d.len())?;
        maximize(&self.a, &self.b, d).map(|(v, _)| v)
    }

    pub fn is_empty(&self) -> Result<bool> {
        let d = DVector::zeros(self.dim());
        match maximize(&self.a, &self.b, &d) {
            Ok(_) => Ok(false),
            Err(GeometryError::Infeasible) => Ok(true),
            Err(e) => Err(e),
        }
    }

    /// Drop rows implied by the remaining ones, one at a time.
    pub fn prune_redundant(&self) -> Result<HPolytope> {
        let mut keep: Vec<usize> = (0..self.num_rows()).collect();
        let mut i = 0;
        while i < keep.len() {
            let row = keep[i];
            let others: Vec<usize> = keep.iter().copied().filter(|&r| r != row).collect();
            if is_implied(&self.a, &self.b, &others, &self.a.row(row).transpose(), self.b[row])? {
                keep.remove(i);
            } else {
                i += 1;
            }
        }
        Ok(self.select_rows(&keep))
    }

    fn select_rows(&self, rows: &[usize]) -> HPolytope {
        HPolytope {
            a: self.a.select_rows(rows.iter()),
            b: self.b.select_rows(rows.iter()),
        }
    }

    /// Stack both descriptions and prune; `None` when the intersection is empty.
    pub fn intersect(&self, other: &HPolytope) -> Result<Option<HPolytope>> {
        check_dim(self.dim(), other.dim())?;
        let m = self.num_rows() + other.num_rows();
        let mut a = DMatrix::zeros(m, self.dim());
        a.view_mut((0, 0), (self.num_rows(), self.dim())).copy_from(&self.a);
        a.view_mut((self.num_rows(), 0), (other.num_rows(), self.dim()))
            .copy_from(&other.a);
        let mut b = DVector::zeros(m);
        b.rows_mut(0, self.num_rows()).copy_from(&self.b);
        b.rows_mut(self.num_rows(), other.num_rows()).copy_from(&other.b);
        let p = HPolytope { a, b };
        if p.is_empty()? {
            return Ok(None);
        }
        p.prune_redundant().map(Some)
    }

    pub fn bounding_box(&self) -> Result<Hyperbox> {
        let n = self.dim();
        let mut lower = DVector::zeros(n);
        let mut upper = DVector::zeros(n);
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            upper[i] = self.support(&e)?;
            lower[i] = -self.support(&(-e))?;
        }
        Hyperbox::new(lower, upper)
    }

    pub fn vertices(&self) -> Result<VRep> {
        let n = self.dim();
        if n > vertices::MAX_DIM {
            return Err(GeometryError::DimensionTooLarge(n));
        }
        if self.is_empty()? {
            return Err(GeometryError::Infeasible);
        }
        let verts = vertices::enumerate(&self.a, &self.b)?;
        Ok(VRep { vertices: verts, dim: n })
    }
}

/// True when `row·x ≤ rhs` holds on `{x : A[others] x ≤ b[others]}`.
fn is_implied(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    others: &[usize],
    row: &DVector<f64>,
    rhs: f64,
) -> Result<bool> {
    // The extra copy of the row, shifted by one, keeps the LP bounded.
    let n = a.ncols();
    let mut aa = DMatrix::zeros(others.len() + 1, n);
    let mut bb = DVector::zeros(others.len() + 1);
    for (k, &r) in others.iter().enumerate() {
        aa.set_row(k, &a.row(r));
        bb[k] = b[r];
    }
    aa.set_row(others.len(), &row.transpose());
    bb[others.len()] = rhs + 1.0;
    match maximize(&aa, &bb, row) {
        Ok((v, _)) => Ok(v <= rhs + REDUNDANCY_TOL),
        Err(GeometryError::Infeasible) => Ok(true),
        Err(e) => Err(e),
    }
}

/// Axis-aligned box `{x : lower ≤ x ≤ upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct Hyperbox {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoxRepr> for Hyperbox {
    type Error = GeometryError;

    fn try_from(r: BoxRepr) -> Result<Self> {
        Hyperbox::new(DVector::from_vec(r.lower), DVector::from_vec(r.upper))
    }
}

impl From<Hyperbox> for BoxRepr {
    fn from(b: Hyperbox) -> Self {
        BoxRepr {
            lower: b.lower.iter().copied().collect(),
            upper: b.upper.iter().copied().collect(),
        }
    }
}

impl Hyperbox {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.iter().chain(upper.iter()).any(|v| v.is_nan()) {
            return Err(GeometryError::Invalid("NaN in box bounds".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(GeometryError::Invalid("lower bound exceeds upper bound".into()));
        }
        Ok(Hyperbox { lower, upper })
    }

    /// Box with the given center and per-coordinate half widths.
    pub fn centered(center: &DVector<f64>, half_width: &DVector<f64>) -> Result<Self> {
        Hyperbox::new(center - half_width, center + half_width)
    }

    /// `[-r, r]^dim`.
    pub fn symmetric(dim: usize, r: f64) -> Self {
        Hyperbox {
            lower: DVector::from_element(dim, -r),
            upper: DVector::from_element(dim, r),
        }
    }

    pub fn point(x: &DVector<f64>) -> Self {
        Hyperbox {
            lower: x.clone(),
            upper: x.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn center(&self) -> DVector<f64> {
        (&self.lower + &self.upper) * 0.5
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn support(&self, d: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), d.len())?;
        Ok(d.iter()
            .zip(self.lower.iter().zip(self.upper.iter()))
            .map(|(di, (l, u))| if *di > 0.0 { di * u } else { di * l })
            .sum())
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(xi, (l, u))| *xi >= l - tol && *xi <= u + tol)
    }

    /// `None` when the boxes are disjoint.
    pub fn intersect(&self, other: &Hyperbox) -> Result<Option<Hyperbox>> {
        check_dim(self.dim(), other.dim())?;
        let lower = self.lower.zip_map(&other.lower, f64::max);
        let upper = self.upper.zip_map(&other.upper, f64::min);
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Ok(None);
        }
        Ok(Some(Hyperbox { lower, upper }))
    }

    pub fn minkowski_sum(&self, other: &Hyperbox) -> Result<Hyperbox> {
        check_dim(self.dim(), other.dim())?;
        Ok(Hyperbox {
            lower: &self.lower + &other.lower,
            upper: &self.upper + &other.upper,
        })
    }

    pub fn volume(&self) -> f64 {
        self.widths().iter().product()
    }

    pub fn is_subset_of(&self, other: &Hyperbox, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .lower
                .iter()
                .zip(other.lower.iter())
                .all(|(a, b)| *a >= b - tol)
            && self
                .upper
                .iter()
                .zip(other.upper.iter())
                .all(|(a, b)| *a <= b + tol)
    }

    /// All `2^dim` corners, with coordinate 0 varying fastest.
    pub fn vertices(&self) -> Result<VRep> {
        let n = self.dim();
        if n > 20 {
            return Err(GeometryError::DimensionTooLarge(n));
        }
        let mut out: Vec<DVector<f64>> = Vec::with_capacity(1 << n);
        for mask in 0usize..(1 << n) {
            let v = DVector::from_fn(n, |i, _| {
                if mask >> i & 1 == 1 {
                    self.upper[i]
                } else {
                    self.lower[i]
                }
            });
            if !out.iter().any(|w| (w - &v).amax() <= VERTEX_TOL) {
                out.push(v);
            }
        }
        Ok(VRep { vertices: out, dim: n })
    }

    pub fn to_hpolytope(&self) -> HPolytope {
        let n = self.dim();
        let mut a = DMatrix::zeros(2 * n, n);
        let mut b = DVector::zeros(2 * n);
        for i in 0..n {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = self.upper[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -self.lower[i];
        }
        HPolytope { a, b }
    }
}

impl From<Hyperbox> for HPolytope {
    fn from(b: Hyperbox) -> Self {
        b.to_hpolytope()
    }
}

/// Box containing the spectral-norm ball of `radius` around `center` when
/// coordinates are entries of the parametrized matrices (`|Mᵢⱼ| ≤ ‖M‖₂`).
pub fn outer_box_of_ball(center: &DVector<f64>, radius: f64) -> Hyperbox {
    let r = radius.max(0.0);
    Hyperbox {
        lower: center.add_scalar(-r),
        upper: center.add_scalar(r),
    }
}

/// Vertex list of a polytope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VRep {
    pub vertices: Vec<DVector<f64>>,
    pub dim: usize,
}

impl VRep {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `max dᵀv` over the listed vertices.
    pub fn support(&self, d: &DVector<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(d))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Either representation, for operations that accept both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Polytope {
    Box(Hyperbox),
    H(HPolytope),
}

impl Polytope {
    pub fn dim(&self) -> usize {
        match self {
            Polytope::Box(b) => b.dim(),
            Polytope::H(h) => h.dim(),
        }
    }

    pub fn support(&self, d: &DVector<f64>) -> Result<f64> {
        match self {
            Polytope::Box(b) => b.support(d),
            Polytope::H(h) => h.support(d),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            Polytope::Box(b) => b.contains(x, tol),
            Polytope::H(h) => h.contains(x, tol),
        }
    }

    pub fn to_hpolytope(&self) -> HPolytope {
        match self {
            Polytope::Box(b) => b.to_hpolytope(),
            Polytope::H(h) => h.clone(),
        }
    }

    /// Box ∩ box stays a box; anything else goes through half-spaces.
    pub fn intersect(&self, other: &Polytope) -> Result<Option<Polytope>> {
        match (self, other) {
            (Polytope::Box(a), Polytope::Box(b)) => Ok(a.intersect(b)?.map(Polytope::Box)),
            _ => Ok(self
                .to_hpolytope()
                .intersect(&other.to_hpolytope())?
                .map(Polytope::H)),
        }
    }

    pub fn vertices(&self) -> Result<VRep> {
        match self {
            Polytope::Box(b) => b.vertices(),
            Polytope::H(h) => h.vertices(),
        }
    }

    /// Exact for boxes; Monte Carlo with `samples` draws otherwise.
    pub fn volume<R: rand::Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> Result<VolumeEstimate> {
        match self {
            Polytope::Box(b) => Ok(VolumeEstimate::exact(b.volume())),
            Polytope::H(h) => h.volume_monte_carlo(samples, rng),
        }
    }

    pub fn as_box(&self) -> Option<&Hyperbox> {
        match self {
            Polytope::Box(b) => Some(b),
            Polytope::H(_) => None,
        }
    }
}

impl From<Hyperbox> for Polytope {
    fn from(b: Hyperbox) -> Self {
        Polytope::Box(b)
    }
}

impl From<HPolytope> for Polytope {
    fn from(h: HPolytope) -> Self {
        Polytope::H(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;

    fn unit_square() -> Hyperbox {
        Hyperbox::symmetric(2, 1.0)
    }

    fn triangle() -> HPolytope {
        HPolytope::new(
            dmatrix![1.0, 1.0; -1.0, 0.0; 0.0, -1.0],
            dvector![1.0, 0.0, 0.0],
        )
        .unwrap()
    }

    #[test]
    fn box_support() {
        assert_eq!(unit_square().support(&dvector![1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(unit_square().support(&dvector![0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn triangle_support_matches_vertices() {
        let t = triangle();
        let d = dvector![1.0, 1.0];
        let lp = t.support(&d).unwrap();
        let verts = t.vertices().unwrap();
        assert!((lp - verts.support(&d)).abs() < 1e-12);
        assert!((lp - 1.0).abs() < 1e-12);
    }

    #[test]
    fn support_errors() {
        let half_plane = HPolytope::new(dmatrix![1.0, 0.0], dvector![1.0]).unwrap();
        assert_eq!(half_plane.support(&dvector![0.0, 1.0]), Err(GeometryError::Unbounded));
        let empty = HPolytope::new(dmatrix![1.0; -1.0], dvector![0.0, -1.0]).unwrap();
        assert_eq!(empty.support(&dvector![1.0]), Err(GeometryError::Infeasible));
    }

    #[test]
    fn box_corners() {
        let b = Hyperbox::new(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        let v = b.vertices().unwrap();
        assert_eq!(v.len(), 4);
        for corner in [dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0], dvector![1.0, 1.0]] {
            assert!(v.vertices.iter().any(|w| (w - &corner).amax() < 1e-15));
        }
        let b4 = Hyperbox::new(DVector::zeros(4), DVector::from_element(4, 1.0)).unwrap();
        assert_eq!(b4.vertices().unwrap().len(), 16);
    }

    #[test]
    fn simplex_vertices_by_double_description() {
        let v = triangle().vertices().unwrap();
        assert_eq!(v.len(), 3);
        for corner in [dvector![0.0, 0.0], dvector![1.0, 0.0], dvector![0.0, 1.0]] {
            assert!(v.vertices.iter().any(|w| (w - &corner).amax() < 1e-12));
        }
    }

    #[test]
    fn vertex_errors() {
        let half_plane = HPolytope::new(dmatrix![1.0, 0.0; -1.0, 0.0], dvector![1.0, 1.0]).unwrap();
        assert_eq!(half_plane.vertices(), Err(GeometryError::Unbounded));
        let empty = HPolytope::new(dmatrix![1.0; -1.0], dvector![0.0, -1.0]).unwrap();
        assert_eq!(empty.vertices(), Err(GeometryError::Infeasible));
        let big = Hyperbox::symmetric(9, 1.0).to_hpolytope();
        assert_eq!(big.vertices(), Err(GeometryError::DimensionTooLarge(9)));
    }

    #[test]
    fn box_intersections() {
        let a = Hyperbox::new(dvector![0.0], dvector![2.0]).unwrap();
        let b = Hyperbox::new(dvector![1.0], dvector![3.0]).unwrap();
        let c = a.intersect(&b).unwrap().unwrap();
        assert_eq!(c, Hyperbox::new(dvector![1.0], dvector![2.0]).unwrap());
        let sq = Hyperbox::new(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        assert_eq!(sq.intersect(&sq).unwrap().unwrap(), sq);
        let far = Hyperbox::new(dvector![2.0], dvector![3.0]).unwrap();
        let near = Hyperbox::new(dvector![0.0], dvector![1.0]).unwrap();
        assert!(near.intersect(&far).unwrap().is_none());
    }

    #[test]
    fn mixed_intersection_prunes_rows() {
        let sq = Polytope::Box(Hyperbox::new(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap());
        let tri = Polytope::H(triangle());
        let Some(Polytope::H(h)) = sq.intersect(&tri).unwrap() else {
            panic!("expected a half-space result");
        };
        // The square's upper faces are implied by x + y ≤ 1.
        assert_eq!(h.num_rows(), 3);
        assert_eq!(h.vertices().unwrap().len(), 3);
        let disjoint = Polytope::H(HPolytope::new(dmatrix![-1.0, 0.0], dvector![-5.0]).unwrap());
        assert!(tri.intersect(&disjoint).unwrap().is_none());
    }

    #[test]
    fn prune_drops_duplicates_but_keeps_one() {
        let h = HPolytope::new(
            dmatrix![1.0; 1.0; -1.0; 2.0],
            dvector![1.0, 1.0, 0.0, 5.0],
        )
        .unwrap();
        let p = h.prune_redundant().unwrap();
        assert_eq!(p.num_rows(), 2);
        assert_eq!(p.support(&dvector![1.0]).unwrap(), 1.0);
    }

    #[test]
    fn outer_box() {
        let b = outer_box_of_ball(&dvector![0.0, 0.0], 1.0);
        assert_eq!(b, Hyperbox::symmetric(2, 1.0));
        let eps = 0.035;
        let c = dvector![0.57, 0.17, -0.12, 0.42];
        let b = outer_box_of_ball(&c, 2.0 * eps);
        assert!(b.widths().iter().all(|w| (w - 0.14).abs() < 1e-12));
        let p = outer_box_of_ball(&c, 0.0);
        assert_eq!(p.volume(), 0.0);
        assert!(p.contains(&c, 0.0));
    }

    #[test]
    fn contains_with_tolerance() {
        let sq = unit_square();
        assert!(sq.contains(&dvector![0.0, 0.0], 0.0));
        assert!(sq.contains(&dvector![1.0 + 1e-12, 0.0], 1e-9));
        assert!(!sq.contains(&dvector![2.0, 0.0], 1e-9));
        let h = sq.to_hpolytope();
        assert!(h.contains(&dvector![1.0 + 1e-12, 0.0], 1e-9));
        assert!(!h.contains(&dvector![2.0, 0.0], 1e-9));
    }

    #[test]
    fn box_volumes() {
        let b4 = Hyperbox::new(DVector::zeros(4), DVector::from_element(4, 1.0)).unwrap();
        assert_eq!(b4.volume(), 1.0);
        let small = Hyperbox::symmetric(4, 0.07);
        assert!((small.volume() - 3.8416e-4).abs() < 1e-15);
    }

    #[test]
    fn json_shapes() {
        let h = triangle();
        let js = serde_json::to_value(&h).unwrap();
        assert_eq!(js["A"][0], serde_json::json!([1.0, 1.0]));
        assert_eq!(js["b"], serde_json::json!([1.0, 0.0, 0.0]));
        let back: HPolytope = serde_json::from_value(js).unwrap();
        assert_eq!(back, h);
        let b: Polytope = serde_json::from_str(r#"{"lower":[0,0],"upper":[1,2]}"#).unwrap();
        assert!(matches!(b, Polytope::Box(_)));
        let bad: std::result::Result<Hyperbox, _> = serde_json::from_str(r#"{"lower":[1],"upper":[0]}"#);
        assert!(bad.is_err());
    }

    fn arb_box(dim: usize) -> impl Strategy<Value = Hyperbox> {
        proptest::collection::vec((-5.0f64..5.0, 0.0f64..3.0), dim).prop_map(|v| {
            let lower = DVector::from_iterator(v.len(), v.iter().map(|(l, _)| *l));
            let upper = DVector::from_iterator(v.len(), v.iter().map(|(l, w)| l + w));
            Hyperbox::new(lower, upper).unwrap()
        })
    }

    proptest! {
        #[test]
        fn support_is_additive_over_box_sums(
            p in arb_box(3),
            q in arb_box(3),
            d in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let d = DVector::from_vec(d);
            let sum = p.minkowski_sum(&q).unwrap();
            let lhs = sum.support(&d).unwrap();
            let rhs = p.support(&d).unwrap() + q.support(&d).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12);
            // and the H-form agrees with the closed form
            let via_lp = sum.to_hpolytope().support(&d).unwrap();
            prop_assert!((via_lp - lhs).abs() < 1e-9);
        }

        #[test]
        fn intersection_is_inside_both(
            p in arb_box(2),
            q in arb_box(2),
            pts in proptest::collection::vec((-6.0f64..9.0, -6.0f64..9.0), 1000),
        ) {
            if let Some(r) = p.intersect(&q).unwrap() {
                let expected: f64 = (0..2)
                    .map(|i| (p.upper()[i].min(q.upper()[i]) - p.lower()[i].max(q.lower()[i])).max(0.0))
                    .product();
                prop_assert!((r.volume() - expected).abs() < 1e-12);
                for (x, y) in pts {
                    let z = dvector![x, y];
                    if r.contains(&z, 0.0) {
                        prop_assert!(p.contains(&z, 0.0) && q.contains(&z, 0.0));
                    }
                }
            }
        }

        #[test]
        fn enumerated_vertices_satisfy_rows(
            pts in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -3.0f64..3.0), 6..10),
        ) {
            // H-rep of a random box cut by random half-spaces through its interior
            let bx = Hyperbox::symmetric(3, 2.0).to_hpolytope();
            let mut rows = vec![];
            let mut rhs = vec![];
            for (a, b, c) in &pts {
                let n = (a * a + b * b + c * c).sqrt().max(1e-3);
                rows.push(vec![a / n, b / n, c / n]);
                rhs.push(1.0);
            }
            let cut = HPolytope::new(
                DMatrix::from_fn(rows.len(), 3, |i, j| rows[i][j]),
                DVector::from_vec(rhs),
            ).unwrap();
            let p = bx.intersect(&cut).unwrap().unwrap();
            let v = p.vertices().unwrap();
            for w in &v.vertices {
                prop_assert!(p.contains(w, VERTEX_TOL));
            }
            for i in 0..p.num_rows() {
                let tight = v.vertices.iter().any(|w| (p.a().row(i) * w)[0] - p.b()[i] > -1e-7);
                prop_assert!(tight, "row {} not tight at any vertex", i);
            }
            for i in 0..v.len() {
                for j in (i + 1)..v.len() {
                    prop_assert!((&v.vertices[i] - &v.vertices[j]).amax() > VERTEX_TOL);
                }
            }
        }
    }
}
