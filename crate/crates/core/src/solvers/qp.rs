//! Convex QP via a Mehrotra predictor-corrector interior point method.
//!
//! Feasibility is settled first by a phase-1 LP that maximizes the smallest
//! constraint margin, `min t  s.t.  A z − t·1 ≤ b,  t ≥ −1`, solved by the
//! same interior point kernel. A positive optimal `t` proves infeasibility
//! (its multipliers form the Farkas certificate); otherwise the margin
//! maximizer is a well-centred starting point for the main solve.
//!
//! Rows are stored sparsely because the tube programs have a few thousand
//! inequality rows with only a handful of nonzeros each, which keeps the
//! normal matrix `P + AᵀDA` cheap to assemble.

use nalgebra::{DMatrix, DVector};

use super::{check_finite, SolveReport, SolverError, Status, DEFAULT_TOL};

/// `min ½ xᵀPx + qᵀx  s.t.  A_ineq x ≤ b_ineq,  A_eq x = b_eq`.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        QpProblem {
            p,
            q,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x)
    }

    /// Largest violation of the constraints at `x` (zero when feasible).
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut v: f64 = 0.0;
        if self.a_ineq.nrows() > 0 {
            v = v.max((&self.a_ineq * x - &self.b_ineq).max());
        }
        if self.a_eq.nrows() > 0 {
            v = v.max((&self.a_eq * x - &self.b_eq).amax());
        }
        v.max(0.0)
    }

    fn validate(&self, check_convexity: bool) -> Result<(), SolverError> {
        let n = self.num_vars();
        let bad = |what: &str| Err(SolverError::InvalidProblem(what.to_string()));
        if self.p.nrows() != n || self.p.ncols() != n {
            return bad("P must be square and match q");
        }
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return bad("inequality block has inconsistent dimensions");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality block has inconsistent dimensions");
        }
        check_finite("P", self.p.as_slice())?;
        check_finite("q", self.q.as_slice())?;
        check_finite("A_ineq", self.a_ineq.as_slice())?;
        check_finite("b_ineq", self.b_ineq.as_slice())?;
        check_finite("A_eq", self.a_eq.as_slice())?;
        check_finite("b_eq", self.b_eq.as_slice())?;
        let scale = 1.0 + self.p.amax();
        if (&self.p - self.p.transpose()).amax() > 1e-12 * scale {
            return bad("P is not symmetric");
        }
        if check_convexity && n > 0 {
            let min_eig = self.p.clone().symmetric_eigen().eigenvalues.min();
            if min_eig < -1e-10 * scale {
                return Err(SolverError::NotConvex(min_eig));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
    /// Eigenvalue check of `P` before solving.
    pub check_convexity: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: DEFAULT_TOL,
            max_iter: 200,
            check_convexity: true,
        }
    }
}

/// Row-compressed constraint matrix.
struct Rows {
    rows: Vec<Vec<(usize, f64)>>,
    ncols: usize,
}

impl Rows {
    fn from_dense(a: &DMatrix<f64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| {
                (0..a.ncols())
                    .filter_map(|j| {
                        let v = a[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Rows { rows, ncols: a.ncols() }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn mul(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|r| r.iter().map(|&(j, v)| v * z[j]).sum::<f64>()),
        )
    }

    fn tmul(&self, y: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols);
        for (r, &yi) in self.rows.iter().zip(y.iter()) {
            if yi != 0.0 {
                for &(j, v) in r {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    /// `m += Aᵀ diag(d) A`
    fn add_gram(&self, d: &DVector<f64>, m: &mut DMatrix<f64>) {
        for (r, &di) in self.rows.iter().zip(d.iter()) {
            for &(j, vj) in r {
                let w = di * vj;
                for &(k, vk) in r {
                    m[(j, k)] += w * vk;
                }
            }
        }
    }
}

#[derive(Clone)]
struct Iterate {
    z: DVector<f64>,
    s: DVector<f64>,
    lam: DVector<f64>,
}

enum IpmEnd {
    Converged,
    Stalled,
    EarlyStop,
    MaxIter,
    Diverged,
}

struct IpmOptions {
    tol_primal: f64,
    tol_dual: f64,
    tol_gap: f64,
    max_iter: usize,
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    let mut a: f64 = 1.0;
    for (x, dx) in v.iter().zip(dv.iter()) {
        if *dx < 0.0 {
            a = a.min(-x / dx);
        }
    }
    a
}

fn factor(m: DMatrix<f64>) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    let scale = 1.0 + m.diagonal().amax();
    let mut reg = 1e-14 * scale;
    for _ in 0..8 {
        let mut mm = m.clone();
        for i in 0..mm.nrows() {
            mm[(i, i)] += reg;
        }
        if let Some(ch) = mm.cholesky() {
            return Some(ch);
        }
        reg *= 100.0;
    }
    None
}

/// Infeasible-start primal-dual Mehrotra iterations on
/// `min ½zᵀPz + qᵀz  s.t.  A z + s = b,  s ≥ 0`.
fn mehrotra(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &Rows,
    b: &DVector<f64>,
    it: &mut Iterate,
    opts: &IpmOptions,
    early: &dyn Fn(&Iterate) -> bool,
    iters: &mut usize,
) -> IpmEnd {
    let m = a.len();
    let n = q.len();
    // Near the solution roundoff can push the residuals back up; keep the
    // best iterate seen and stop once it has not improved for a while.
    let mut best: Option<(f64, Iterate)> = None;
    let mut since_best = 0;
    loop {
        let r_d = p * &it.z + q + a.tmul(&it.lam);
        let r_p = a.mul(&it.z) + &it.s - b;
        let gap = it.s.dot(&it.lam);
        if r_p.amax() <= opts.tol_primal && r_d.amax() <= opts.tol_dual && gap <= opts.tol_gap {
            return IpmEnd::Converged;
        }
        if early(it) {
            return IpmEnd::EarlyStop;
        }
        let merit = (r_p.amax() / opts.tol_primal)
            .max(r_d.amax() / opts.tol_dual)
            .max(gap / opts.tol_gap);
        if best.as_ref().is_none_or(|(b, _)| merit < *b) {
            best = Some((merit, it.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        let stalled = since_best >= 8;
        if stalled || *iters >= opts.max_iter {
            if let Some((_, b)) = best {
                *it = b;
            }
            return if stalled { IpmEnd::Stalled } else { IpmEnd::MaxIter };
        }
        if it.z.amax() > 1e12 {
            return IpmEnd::Diverged;
        }
        *iters += 1;
        let mu = gap / m as f64;
        let d = it.lam.component_div(&it.s);
        let mut g = p.clone();
        a.add_gram(&d, &mut g);
        let Some(chol) = factor(g) else {
            return IpmEnd::Diverged;
        };

        let direction = |rc: &DVector<f64>| {
            let tmp = d.component_mul(&r_p) - rc.component_div(&it.s);
            let rhs = -&r_d - a.tmul(&tmp);
            let mut dz = chol.solve(&rhs);
            // The factor may carry regularization; refine against the exact matrix.
            for _ in 0..3 {
                let res = &rhs - (p * &dz + a.tmul(&d.component_mul(&a.mul(&dz))));
                if res.amax() <= 1e-15 * (1.0 + rhs.amax()) {
                    break;
                }
                dz += chol.solve(&res);
            }
            let ds = -&r_p - a.mul(&dz);
            let dl = -(rc + it.lam.component_mul(&ds)).component_div(&it.s);
            (dz, ds, dl)
        };

        let rc_aff = it.s.component_mul(&it.lam);
        let (_, ds_a, dl_a) = direction(&rc_aff);
        let alpha_aff = max_step(&it.s, &ds_a).min(max_step(&it.lam, &dl_a));
        let mu_aff = (&it.s + alpha_aff * &ds_a).dot(&(&it.lam + alpha_aff * &dl_a)) / m as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
        let rc = rc_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, sigma * mu);
        let (dz, ds, dl) = direction(&rc);
        let alpha = (0.99 * max_step(&it.s, &ds).min(max_step(&it.lam, &dl))).min(1.0);
        log::trace!(
            "ipm {}: mu={mu:.3e} rp={:.3e} rd={:.3e} sigma={sigma:.2e} step={alpha:.3e}",
            *iters,
            r_p.amax(),
            r_d.amax()
        );
        it.z += alpha * dz;
        it.s += alpha * ds;
        it.lam += alpha * dl;
        // keep strictly interior against roundoff
        for v in it.s.iter_mut().chain(it.lam.iter_mut()) {
            if *v <= 0.0 {
                *v = 1e-300;
            }
        }
        debug_assert_eq!(it.z.len(), n);
    }
}

/// Solve a convex QP.
pub fn solve_qp(prob: &QpProblem, settings: &QpSettings) -> Result<SolveReport, SolverError> {
    solve_qp_warm(prob, settings, None)
}

/// Solve a convex QP, optionally seeding the search with a primal guess.
/// A strictly feasible guess lets the solver skip its phase-1 program.
pub fn solve_qp_warm(
    prob: &QpProblem,
    settings: &QpSettings,
    guess: Option<&DVector<f64>>,
) -> Result<SolveReport, SolverError> {
    prob.validate(settings.check_convexity)?;
    let n = prob.num_vars();
    let m_ineq = prob.a_ineq.nrows();
    let m_eq = prob.a_eq.nrows();
    let n_dual = m_ineq + m_eq;

    // Reduce equalities: x = x_p + N w.
    let (x_p, null) = if m_eq > 0 {
        let svd = prob.a_eq.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = 1e-12 * smax.max(1.0);
        let x_p = svd
            .solve(&prob.b_eq, cutoff)
            .map_err(|e| SolverError::InvalidProblem(e.to_string()))?;
        let resid = &prob.b_eq - &prob.a_eq * &x_p;
        if resid.amax() > 1e-9 * (1.0 + prob.b_eq.amax()) {
            let mut rep = SolveReport::without_solution(Status::Infeasible, n, n_dual, 0);
            let mut cert = DVector::zeros(n_dual);
            cert.rows_mut(m_ineq, m_eq).copy_from(&(-resid));
            rep.certificate = Some(cert);
            return Ok(rep);
        }
        let vt = svd.v_t.as_ref().expect("requested V");
        let rank = svd.singular_values.iter().filter(|s| **s > cutoff).count();
        // Full V basis is needed; fall back to an orthogonal complement of the row space.
        let row_space = vt.rows(0, rank).transpose();
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for k in 0..n {
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let mut v = &e - &row_space * (row_space.transpose() * &e);
            for u in &basis {
                let c = u.dot(&v);
                v -= c * u;
            }
            let nv = v.norm();
            if nv > 1e-8 {
                basis.push(v / nv);
            }
            if basis.len() == n - rank {
                break;
            }
        }
        let null = if basis.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&basis)
        };
        (x_p, Some(null))
    } else {
        (DVector::zeros(n), None)
    };

    let (p_r, q_r, a_r, b_r) = match &null {
        Some(nm) => (
            nm.transpose() * &prob.p * nm,
            nm.transpose() * (&prob.p * &x_p + &prob.q),
            &prob.a_ineq * nm,
            &prob.b_ineq - &prob.a_ineq * &x_p,
        ),
        None => (prob.p.clone(), prob.q.clone(), prob.a_ineq.clone(), prob.b_ineq.clone()),
    };
    let n_r = q_r.len();
    let lift = |w: &DVector<f64>| -> DVector<f64> {
        match &null {
            Some(nm) => &x_p + nm * w,
            None => w.clone(),
        }
    };

    let mut iters = 0;
    let w0 = match (guess, &null) {
        (Some(g), None) if g.len() == n => g.clone(),
        (Some(g), Some(nm)) if g.len() == n => nm.transpose() * (g - &x_p),
        _ => DVector::zeros(n_r),
    };

    let w = if m_ineq == 0 {
        // Unconstrained: P w = −q must be consistent.
        if n_r == 0 {
            DVector::zeros(0)
        } else {
            let svd = p_r.clone().svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
            let w = svd
                .solve(&(-&q_r), cutoff)
                .map_err(|e| SolverError::InvalidProblem(e.to_string()))?;
            if (&p_r * &w + &q_r).amax() > settings.tol {
                return Ok(SolveReport::without_solution(Status::Unbounded, n, n_dual, 0));
            }
            w
        }
    } else {
        let rows = Rows::from_dense(&a_r);
        let scale_b = 1.0 + b_r.amax();
        let feas_tol = 1e-9 * scale_b;
        let margin0 = (&b_r - rows.mul(&w0)).min();
        let start = if margin0 > 1e-6 * scale_b {
            w0
        } else {
            match phase_one(&rows, &b_r, &w0, feas_tol, &mut iters) {
                PhaseOne::Feasible(w) => w,
                PhaseOne::Weak(w, shift) => {
                    // Feasible set has (numerically) empty interior; solve on a
                    // slightly relaxed copy and report residuals honestly.
                    let b_relaxed = b_r.add_scalar(shift);
                    let it = main_solve(&p_r, &q_r, &rows, &b_relaxed, &w, settings, &mut iters);
                    return Ok(report(prob, lift(&it.0), &it.1, it.2, iters, settings));
                }
                PhaseOne::Infeasible(lam) => {
                    let mut rep = SolveReport::without_solution(Status::Infeasible, n, n_dual, iters);
                    let mut cert = DVector::zeros(n_dual);
                    let total = lam.sum().max(f64::MIN_POSITIVE);
                    cert.rows_mut(0, m_ineq).copy_from(&(lam / total));
                    rep.certificate = Some(cert);
                    return Ok(rep);
                }
                PhaseOne::Failed => {
                    return Ok(SolveReport::without_solution(Status::MaxIter, n, n_dual, iters));
                }
            }
        };
        let (w, lam, end) = main_solve(&p_r, &q_r, &rows, &b_r, &start, settings, &mut iters);
        return Ok(report(prob, lift(&w), &lam, end, iters, settings));
    };
    let lam = DVector::zeros(m_ineq);
    Ok(report(prob, lift(&w), &lam, IpmEndKind::Converged, iters, settings))
}

#[derive(Clone, Copy)]
enum IpmEndKind {
    Converged,
    MaxIter,
    Diverged,
}

fn main_solve(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    rows: &Rows,
    b: &DVector<f64>,
    w0: &DVector<f64>,
    settings: &QpSettings,
    iters: &mut usize,
) -> (DVector<f64>, DVector<f64>, IpmEndKind) {
    let m = rows.len();
    let s0 = b - rows.mul(w0);
    let s0 = s0.map(|v| v.max(1e-8));
    let scale = (1.0 + q.amax()).max(1.0);
    let lam0 = DVector::from_element(m, scale / m as f64).zip_map(&s0, |l, s| l.max(1e-3 / (1.0 + s)));
    let mut it = Iterate {
        z: w0.clone(),
        s: s0,
        lam: lam0,
    };
    let opts = IpmOptions {
        tol_primal: 0.05 * settings.tol,
        tol_dual: 0.05 * settings.tol,
        tol_gap: 0.05 * settings.tol,
        max_iter: *iters + settings.max_iter,
    };
    let end = mehrotra(p, q, rows, b, &mut it, &opts, &|_| false, iters);
    let kind = match end {
        IpmEnd::Converged | IpmEnd::EarlyStop => IpmEndKind::Converged,
        IpmEnd::MaxIter | IpmEnd::Stalled => IpmEndKind::MaxIter,
        IpmEnd::Diverged => IpmEndKind::Diverged,
    };
    (it.z, it.lam, kind)
}

enum PhaseOne {
    Feasible(DVector<f64>),
    Weak(DVector<f64>, f64),
    Infeasible(DVector<f64>),
    Failed,
}

fn phase_one(rows: &Rows, b: &DVector<f64>, w0: &DVector<f64>, feas_tol: f64, iters: &mut usize) -> PhaseOne {
    let n = w0.len();
    let m = rows.len();
    const CAP: f64 = 1.0;
    let mut aug: Vec<Vec<(usize, f64)>> = rows
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push((n, -1.0));
            r
        })
        .collect();
    aug.push(vec![(n, -1.0)]);
    let aug = Rows { rows: aug, ncols: n + 1 };
    let mut b1 = DVector::zeros(m + 1);
    b1.rows_mut(0, m).copy_from(b);
    b1[m] = CAP;

    let worst = (rows.mul(w0) - b).max();
    let t0 = (worst + 1.0).max(1.0 - CAP);
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(w0);
    z[n] = t0;
    let s = &b1 - aug.mul(&z);
    let mut it = Iterate {
        z,
        s,
        lam: DVector::from_element(m + 1, 1.0 / (m + 1) as f64),
    };
    let p = DMatrix::zeros(n + 1, n + 1);
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let opts = IpmOptions {
        tol_primal: 1e-11 * (1.0 + b.amax()),
        tol_dual: 1e-11,
        tol_gap: 1e-11,
        max_iter: *iters + 200,
    };
    let target = -0.5 * CAP;
    let early = |it: &Iterate| {
        if it.z[n] <= target {
            return true;
        }
        // Weak duality: −bᵀλ − CAP·λ_cap bounds t from below once dual feasible.
        let lam = &it.lam;
        let grad = aug.tmul(lam) + &c;
        grad.amax() < 1e-10 && -(b.dot(&lam.rows(0, m)) + CAP * lam[m]) > feas_tol
    };
    let end = mehrotra(&p, &c, &aug, &b1, &mut it, &opts, &early, iters);
    let t = it.z[n];
    let w = it.z.rows(0, n).into_owned();
    let true_margin = (b - rows.mul(&w)).min();
    match end {
        IpmEnd::Diverged => PhaseOne::Failed,
        _ if true_margin > 0.0 => PhaseOne::Feasible(w),
        IpmEnd::MaxIter if t > feas_tol => PhaseOne::Failed,
        _ => {
            let lam = it.lam.rows(0, m).into_owned();
            let lower = -(b.dot(&lam) + CAP * it.lam[m]);
            if t > feas_tol && lower > 0.0 {
                PhaseOne::Infeasible(lam)
            } else if t > feas_tol {
                PhaseOne::Failed
            } else {
                PhaseOne::Weak(w, (-true_margin).max(0.0) + 1e-10 * (1.0 + b.amax()))
            }
        }
    }
}

fn report(
    prob: &QpProblem,
    x: DVector<f64>,
    lam: &DVector<f64>,
    end: IpmEndKind,
    iterations: usize,
    settings: &QpSettings,
) -> SolveReport {
    let lam = lam.map(|v| v.max(0.0));
    let mut rep = assemble(prob, x, lam.clone(), iterations);
    // A final active-set Newton step usually gains several digits.
    if let Some((x_new, lam_new)) = polish(prob, &rep.x, &lam) {
        let alt = assemble(prob, x_new, lam_new, iterations);
        if alt.kkt_residual() < rep.kkt_residual() {
            rep = alt;
        }
    }
    rep.status = match end {
        IpmEndKind::Diverged => Status::Unbounded,
        _ if rep.kkt_residual() <= settings.tol => Status::Optimal,
        _ => Status::MaxIter,
    };
    rep
}

/// Newton correction on the active set: solve the KKT system of the
/// equality-constrained problem `A_act x = b_act` in the least-squares
/// sense starting at `x`, and read the multipliers off it.
fn polish(prob: &QpProblem, x: &DVector<f64>, lam: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let m_ineq = prob.a_ineq.nrows();
    let m_eq = prob.a_eq.nrows();
    if m_ineq == 0 {
        return None;
    }
    let n = x.len();
    let slack = &prob.b_ineq - &prob.a_ineq * x;
    let active: Vec<usize> = (0..m_ineq).filter(|&i| lam[i] > slack[i].max(0.0)).collect();
    let k = active.len() + m_eq;
    let mut kkt = DMatrix::zeros(n + k, n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&prob.p);
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&(-(&prob.p * x + &prob.q)));
    for (r, &i) in active.iter().enumerate() {
        for j in 0..n {
            let v = prob.a_ineq[(i, j)];
            kkt[(n + r, j)] = v;
            kkt[(j, n + r)] = v;
        }
        rhs[n + r] = slack[i];
    }
    let eq_resid = &prob.b_eq - &prob.a_eq * x;
    for e in 0..m_eq {
        let r = active.len() + e;
        for j in 0..n {
            let v = prob.a_eq[(e, j)];
            kkt[(n + r, j)] = v;
            kkt[(j, n + r)] = v;
        }
        rhs[n + r] = eq_resid[e];
    }
    let svd = kkt.svd(true, true);
    let cutoff = 1e-14 * svd.singular_values.max().max(1.0);
    let sol = svd.solve(&rhs, cutoff).ok()?;
    let x_new = x + sol.rows(0, n);
    let mut lam_new = DVector::zeros(m_ineq);
    for (r, &i) in active.iter().enumerate() {
        lam_new[i] = sol[n + r].max(0.0);
    }
    Some((x_new, lam_new))
}

fn assemble(prob: &QpProblem, x: DVector<f64>, lam: DVector<f64>, iterations: usize) -> SolveReport {
    let m_ineq = prob.a_ineq.nrows();
    let m_eq = prob.a_eq.nrows();
    let mut grad = &prob.p * &x + &prob.q + prob.a_ineq.transpose() * &lam;
    let nu = if m_eq > 0 {
        let et = prob.a_eq.transpose();
        let svd = et.clone().svd(true, true);
        let cutoff = 1e-12 * svd.singular_values.max().max(1.0);
        let nu = svd.solve(&(-&grad), cutoff).unwrap_or_else(|_| DVector::zeros(m_eq));
        grad += et * &nu;
        nu
    } else {
        DVector::zeros(0)
    };
    let mut dual = DVector::zeros(m_ineq + m_eq);
    dual.rows_mut(0, m_ineq).copy_from(&lam);
    dual.rows_mut(m_ineq, m_eq).copy_from(&nu);
    let objective = prob.objective(&x);
    let dual_obj = -0.5 * x.dot(&(&prob.p * &x)) - prob.b_ineq.dot(&lam) - prob.b_eq.dot(&nu);
    SolveReport {
        status: Status::Optimal,
        primal_residual: prob.max_violation(&x),
        dual_residual: grad.amax(),
        duality_gap: (objective - dual_obj).abs() / (1.0 + objective.abs()),
        x,
        dual,
        objective,
        iterations,
        certificate: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn solve(p: &QpProblem) -> SolveReport {
        solve_qp(p, &QpSettings::default()).unwrap()
    }

    #[test]
    fn scalar_with_lower_bound() {
        // min ½x² s.t. x ≥ 1
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]).with_inequalities(dmatrix![-1.0], dvector![-1.0]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-8);
        assert!((r.objective - 0.5).abs() < 1e-8);
        assert!(r.kkt_residual() <= 1e-8);
    }

    #[test]
    fn projection_onto_hyperplane() {
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0])
            .with_equalities(dmatrix![1.0, 1.0], dvector![2.0]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((&r.x - dvector![1.0, 1.0]).amax() < 1e-10);
        assert!(r.kkt_residual() <= 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let a = dmatrix![-1.0; 1.0];
        let b = dvector![-1.0, 0.0];
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]).with_inequalities(a.clone(), b.clone());
        let r = solve(&p);
        assert_eq!(r.status, Status::Infeasible);
        let y = r.certificate.unwrap();
        assert!(y.iter().all(|v| *v >= 0.0));
        assert!((a.transpose() * &y).amax() < 1e-8);
        assert!(b.dot(&y) < 0.0);
    }

    #[test]
    fn inconsistent_equalities_are_infeasible() {
        let e = dmatrix![1.0, 1.0; 1.0, 1.0];
        let p = QpProblem::new(DMatrix::identity(2, 2), dvector![0.0, 0.0]).with_equalities(e.clone(), dvector![1.0, 2.0]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Infeasible);
        let y = r.certificate.unwrap();
        assert!((e.transpose() * &y).amax() < 1e-10);
        assert!(dvector![1.0, 2.0].dot(&y) < 0.0);
    }

    #[test]
    fn zero_cost_on_some_variables() {
        // min (x - 3)² with y in [0, 1] and x ≤ 2 + y; degenerate, so x converges like √gap
        let p = QpProblem::new(dmatrix![2.0, 0.0; 0.0, 0.0], dvector![-6.0, 0.0]).with_inequalities(
            dmatrix![1.0, -1.0; 0.0, 1.0; 0.0, -1.0],
            dvector![2.0, 1.0, 0.0],
        );
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((&r.x - dvector![3.0, 1.0]).amax() < 1e-4, "{r:?}");
        assert!(r.kkt_residual() <= 1e-8, "{r:?}");
    }

    #[test]
    fn detects_nonconvex_cost() {
        let p = QpProblem::new(dmatrix![-1.0], dvector![0.0]);
        assert!(matches!(solve_qp(&p, &QpSettings::default()), Err(SolverError::NotConvex(_))));
    }

    #[test]
    fn strictly_feasible_guess_skips_phase_one() {
        let p = QpProblem::new(dmatrix![1.0], dvector![0.0]).with_inequalities(dmatrix![-1.0], dvector![-1.0]);
        let r = solve_qp_warm(&p, &QpSettings::default(), Some(&dvector![5.0])).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-8);
    }
}
