use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::{closed_loop, compute_hj, TubeDesign, H_TOL};
use super::{Result, TubeError};
use crate::estimation::{spectral_norm, Parametrization};
use crate::geometry::Hyperbox;
use crate::solvers::{dlyap, QpProblem, SolveReport};

/// One vertex of Θ_t with its closed-loop data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexEntry {
    pub theta: DVector<f64>,
    pub phi: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VertexData {
    pub entries: Vec<VertexEntry>,
}

impl VertexData {
    pub fn build(vertices: &[DVector<f64>], par: &Parametrization, design: &TubeDesign) -> Result<Self> {
        let entries = vertices
            .iter()
            .map(|th| vertex_entry(th, par, design))
            .collect::<Result<Vec<_>>>()?;
        Ok(VertexData { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Worst `‖H T − T Φ‖_max` and the most negative `H` entry over all vertices.
    pub fn check(&self, t: &DMatrix<f64>) -> (f64, f64) {
        self.entries.iter().fold((0.0, f64::INFINITY), |(res, neg), e| {
            (res.max((&e.h * t - t * &e.phi).amax()), neg.min(e.h.min()))
        })
    }
}

pub fn vertex_entry(theta: &DVector<f64>, par: &Parametrization, design: &TubeDesign) -> Result<VertexEntry> {
    let (_, b) = par.matrices(theta);
    let phi = closed_loop(par, theta, &design.k);
    let h = compute_hj(&design.t, &phi)?;
    Ok(VertexEntry { theta: theta.clone(), phi, b, h })
}

/// `max ‖B(θ)‖₂` over the vertex list.
pub fn b_bar(vertices: &[DVector<f64>], par: &Parametrization) -> f64 {
    vertices
        .iter()
        .map(|th| spectral_norm(&par.matrices(th).1))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBounds {
    pub w_bar: DVector<f64>,
    pub zeta_bar: DVector<f64>,
    pub b_bar: f64,
}

/// Support values of the disturbance plus excitation image on `T`, and of
/// the excitation box on `G`.
pub fn noise_bounds(t: &DMatrix<f64>, g: &DMatrix<f64>, w: &Hyperbox, sigma_t: f64, b_bar: f64) -> Result<NoiseBounds> {
    let dx = t.ncols();
    let du = g.ncols();
    let zx = Hyperbox::symmetric(dx, 3.0 * sigma_t * b_bar);
    let z = Hyperbox::symmetric(du, 3.0 * sigma_t);
    let mut w_bar = DVector::zeros(t.nrows());
    for i in 0..t.nrows() {
        let ti = t.row(i).transpose();
        w_bar[i] = w.support(&ti)? + zx.support(&ti)?;
    }
    let mut zeta_bar = DVector::zeros(g.nrows());
    for i in 0..g.nrows() {
        zeta_bar[i] = z.support(&g.row(i).transpose())?;
    }
    Ok(NoiseBounds { w_bar, zeta_bar, b_bar })
}

/// How the excitation image `{B(θ) ζ}` enters `w̄`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExcitationBound {
    /// State-space box `±3σ_t B̄`.
    Box,
    /// Row-wise support `3σ_t max_j ‖B(θ_j)ᵀ T_iᵀ‖₂`, exact over the vertex list.
    #[default]
    Support,
}

/// Same as [`noise_bounds`] with the excitation image bounded row by row
/// through the vertex input matrices instead of a box.
pub fn noise_bounds_exact(
    t: &DMatrix<f64>,
    g: &DMatrix<f64>,
    w: &Hyperbox,
    sigma_t: f64,
    vertices: &VertexData,
) -> Result<NoiseBounds> {
    let b_bar = vertices
        .entries
        .iter()
        .map(|e| spectral_norm(&e.b))
        .fold(0.0, f64::max);
    let mut nb = noise_bounds(t, g, w, sigma_t, 0.0)?;
    for i in 0..t.nrows() {
        let ti = t.row(i);
        let worst = vertices
            .entries
            .iter()
            .map(|e| (ti * &e.b).norm())
            .fold(0.0, f64::max);
        nb.w_bar[i] += 3.0 * sigma_t * worst;
    }
    nb.b_bar = b_bar;
    Ok(nb)
}

/// `P` with `P − ΦᵀPΦ = Q + KᵀRK` at the nominal parameter.
pub fn terminal_cost(theta: &DVector<f64>, par: &Parametrization, design: &TubeDesign) -> Result<DMatrix<f64>> {
    let phi = closed_loop(par, theta, &design.k);
    let s = &design.q + design.k.transpose() * &design.r * &design.k;
    Ok(dlyap(&phi, &s)?)
}

/// Which constraint a group of QP rows comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintTag {
    /// `T x_t ≤ α₀`.
    Initial,
    /// `H^(j) α_k + T B_j v_k + w̄ ≤ α_{k+1}`.
    Tube { k: usize, vertex: usize },
    /// `H_c α_k + G v_k + ζ̄ ≤ 1`.
    Input { k: usize },
    /// `H^(j) α_N + w̄ ≤ α_N`.
    TerminalTube { vertex: usize },
    /// `H_c α_N + ζ̄ ≤ 1`.
    TerminalInput,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintBlock {
    pub tag: ConstraintTag,
    pub rows: Range<usize>,
}

/// The condensed tube program over `z = (v₀ … v_{N−1}, α₀ … α_N)`.
#[derive(Debug, Clone)]
pub struct TubeProblem {
    pub qp: QpProblem,
    pub horizon: usize,
    pub du: usize,
    pub d_alpha: usize,
    pub blocks: Vec<ConstraintBlock>,
    /// `x_tᵀ S_xᵀ Q̄ S_x x_t`, the part of the cost that does not depend on `z`.
    pub constant: f64,
    /// Maps `(x_t, v)` to the stacked nominal states `x_{0|t} … x_{N|t}`.
    pub s_x: DMatrix<f64>,
    pub s_v: DMatrix<f64>,
}

impl TubeProblem {
    pub fn num_vars(&self) -> usize {
        self.horizon * self.du + (self.horizon + 1) * self.d_alpha
    }

    pub fn v_index(&self, k: usize) -> usize {
        k * self.du
    }

    pub fn alpha_index(&self, k: usize) -> usize {
        self.horizon * self.du + k * self.d_alpha
    }

    pub fn split(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let v = (0..self.horizon)
            .map(|k| z.rows(self.v_index(k), self.du).into_owned())
            .collect();
        let a = (0..=self.horizon)
            .map(|k| z.rows(self.alpha_index(k), self.d_alpha).into_owned())
            .collect();
        (v, a)
    }

    pub fn join(&self, v: &[DVector<f64>], alpha: &[DVector<f64>]) -> DVector<f64> {
        let mut z = DVector::zeros(self.num_vars());
        for (k, vk) in v.iter().enumerate() {
            z.rows_mut(self.v_index(k), self.du).copy_from(vk);
        }
        for (k, ak) in alpha.iter().enumerate() {
            z.rows_mut(self.alpha_index(k), self.d_alpha).copy_from(ak);
        }
        z
    }

    /// Cost including the constant term.
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        self.qp.objective(z) + self.constant
    }

    pub fn max_violation(&self, z: &DVector<f64>) -> f64 {
        self.qp.max_violation(z)
    }

    /// Worst violation per block, for diagnostics.
    pub fn block_violations(&self, z: &DVector<f64>) -> Vec<(ConstraintTag, f64)> {
        let r = &self.qp.a_ineq * z - &self.qp.b_ineq;
        self.blocks
            .iter()
            .map(|b| (b.tag, r.rows(b.rows.start, b.rows.len()).max()))
            .collect()
    }

    /// Shifted solution `(v₁ … v_{N−1}, 0)`, `(α₁ … α_N, α_N)`.
    pub fn tail_point(&self, z: &DVector<f64>) -> DVector<f64> {
        let (mut v, mut a) = self.split(z);
        v.remove(0);
        v.push(DVector::zeros(self.du));
        a.remove(0);
        a.push(a.last().expect("horizon ≥ 1").clone());
        self.join(&v, &a)
    }

    /// Nominal predicted states for the given decision vector.
    pub fn nominal_states(&self, x: &DVector<f64>, z: &DVector<f64>) -> Vec<DVector<f64>> {
        let v = z.rows(0, self.horizon * self.du);
        let xs = &self.s_x * x + &self.s_v * v;
        let dx = x.len();
        (0..=self.horizon).map(|k| xs.rows(k * dx, dx).into_owned()).collect()
    }

    /// JSON dump: dimensions, tagged blocks and, if given, the solver report.
    pub fn dump(&self, report: Option<&SolveReport>) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.qp.a_ineq.nrows())
            .map(|i| self.qp.a_ineq.row(i).iter().copied().collect())
            .collect();
        serde_json::json!({
            "horizon": self.horizon,
            "du": self.du,
            "d_alpha": self.d_alpha,
            "num_vars": self.num_vars(),
            "num_rows": self.qp.a_ineq.nrows(),
            "blocks": self.blocks,
            "A": rows,
            "b": self.qp.b_ineq.iter().copied().collect::<Vec<_>>(),
            "P": (0..self.qp.p.nrows())
                .map(|i| self.qp.p.row(i).iter().copied().collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "q": self.qp.q.iter().copied().collect::<Vec<_>>(),
            "report": report,
        })
    }
}

/// Nominal model used in the cost: `(A(θ_t), B(θ_t))`.
pub struct Nominal<'a> {
    pub a: &'a DMatrix<f64>,
    pub b: &'a DMatrix<f64>,
}

pub fn build_problem(
    x: &DVector<f64>,
    nominal: Nominal<'_>,
    vertices: &VertexData,
    noise: &NoiseBounds,
    design: &TubeDesign,
    p: &DMatrix<f64>,
) -> Result<TubeProblem> {
    let n = design.horizon;
    let dx = design.dx();
    let du = design.du();
    let da = design.d_alpha();
    let dc = design.d_c();
    let m = vertices.len();
    if m == 0 {
        return Err(TubeError::Invalid("vertex list is empty".into()));
    }
    if x.len() != dx || p.shape() != (dx, dx) {
        return Err(TubeError::Invalid("state or terminal cost has the wrong size".into()));
    }
    let nv = n * du;
    let nz = nv + (n + 1) * da;
    let av = |k: usize| nv + k * da;
    let rows = da + n * m * da + n * dc + m * da + dc;
    let mut a = DMatrix::zeros(rows, nz);
    let mut b = DVector::zeros(rows);
    let mut blocks = Vec::new();
    let mut r = 0;

    // T x_t ≤ α₀
    let tx = &design.t * x;
    for i in 0..da {
        a[(r + i, av(0) + i)] = -1.0;
        b[r + i] = -tx[i];
    }
    blocks.push(ConstraintBlock { tag: ConstraintTag::Initial, rows: r..r + da });
    r += da;

    let ones = DVector::from_element(dc, 1.0);
    for k in 0..n {
        for (j, e) in vertices.entries.iter().enumerate() {
            let tb = &design.t * &e.b;
            for i in 0..da {
                for c in 0..da {
                    a[(r + i, av(k) + c)] = e.h[(i, c)];
                }
                for c in 0..du {
                    a[(r + i, k * du + c)] = tb[(i, c)];
                }
                a[(r + i, av(k + 1) + i)] -= 1.0;
                b[r + i] = -noise.w_bar[i];
            }
            blocks.push(ConstraintBlock { tag: ConstraintTag::Tube { k, vertex: j }, rows: r..r + da });
            r += da;
        }
        for i in 0..dc {
            for c in 0..da {
                a[(r + i, av(k) + c)] = design.hc[(i, c)];
            }
            for c in 0..du {
                a[(r + i, k * du + c)] = design.g[(i, c)];
            }
            b[r + i] = ones[i] - noise.zeta_bar[i];
        }
        blocks.push(ConstraintBlock { tag: ConstraintTag::Input { k }, rows: r..r + dc });
        r += dc;
    }
    for (j, e) in vertices.entries.iter().enumerate() {
        for i in 0..da {
            for c in 0..da {
                a[(r + i, av(n) + c)] = e.h[(i, c)];
            }
            a[(r + i, av(n) + i)] -= 1.0;
            b[r + i] = -noise.w_bar[i];
        }
        blocks.push(ConstraintBlock { tag: ConstraintTag::TerminalTube { vertex: j }, rows: r..r + da });
        r += da;
    }
    for i in 0..dc {
        for c in 0..da {
            a[(r + i, av(n) + c)] = design.hc[(i, c)];
        }
        b[r + i] = ones[i] - noise.zeta_bar[i];
    }
    blocks.push(ConstraintBlock { tag: ConstraintTag::TerminalInput, rows: r..r + dc });
    r += dc;
    debug_assert_eq!(r, rows);

    // x_{k+1} = Φ x_k + B v_k with Φ = A + B K
    let phi = nominal.a + nominal.b * &design.k;
    let mut s_x = DMatrix::zeros((n + 1) * dx, dx);
    let mut s_v = DMatrix::zeros((n + 1) * dx, nv);
    let mut pk = DMatrix::identity(dx, dx);
    for k in 0..=n {
        s_x.view_mut((k * dx, 0), (dx, dx)).copy_from(&pk);
        pk = &phi * pk;
    }
    for k in 1..=n {
        let prev = s_v.rows(( k - 1) * dx, dx).into_owned();
        let mut row = &phi * prev;
        row.view_mut((0, (k - 1) * du), (dx, du)).copy_from(nominal.b);
        s_v.rows_mut(k * dx, dx).copy_from(&row);
    }
    let mut qbar = DMatrix::zeros((n + 1) * dx, (n + 1) * dx);
    for k in 0..n {
        qbar.view_mut((k * dx, k * dx), (dx, dx)).copy_from(&design.q);
    }
    qbar.view_mut((n * dx, n * dx), (dx, dx)).copy_from(p);
    let sv_q = s_v.transpose() * &qbar;
    let mut pvv = (&sv_q * &s_v) * 2.0;
    for k in 0..n {
        let mut blk = pvv.view_mut((k * du, k * du), (du, du));
        blk += &design.r * 2.0;
    }
    let pvv = (&pvv + pvv.transpose()) * 0.5;
    let qv = &sv_q * (&s_x * x) * 2.0;
    let constant = (&s_x * x).dot(&(&qbar * (&s_x * x)));

    let mut pz = DMatrix::zeros(nz, nz);
    pz.view_mut((0, 0), (nv, nv)).copy_from(&pvv);
    let mut qz = DVector::zeros(nz);
    qz.rows_mut(0, nv).copy_from(&qv);

    Ok(TubeProblem {
        qp: QpProblem::new(pz, qz).with_inequalities(a, b),
        horizon: n,
        du,
        d_alpha: da,
        blocks,
        constant,
        s_x,
        s_v,
    })
}

/// Largest deviation from the H identities, used by per-step checks.
pub fn h_identities_hold(design: &TubeDesign, vertices: &VertexData) -> bool {
    let (rc, nc) = design.hc_check();
    let (rv, nv) = vertices.check(&design.t);
    rc <= H_TOL && rv <= H_TOL && nc >= 0.0 && nv >= 0.0
}
