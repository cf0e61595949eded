//! Two-phase dense tableau simplex.
//!
//! The LPs in this crate are small (support functions, redundancy checks,
//! the per-row programs behind the tube matrices), so a dense tableau with
//! Dantzig pricing and a Bland fallback is plenty. Final primal and dual
//! values are recomputed from the optimal basis with an LU solve, which keeps
//! the reported residuals at roundoff level.

use nalgebra::{DMatrix, DVector};

use super::{check_finite, SolveReport, SolverError, Status, DEFAULT_TOL};

/// `min cᵀx  s.t.  A_ineq x ≤ b_ineq,  A_eq x = b_eq,  l ≤ x ≤ u`.
///
/// Without `bounds` every variable is free.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub bounds: Option<Vec<(f64, f64)>>,
}

impl LpProblem {
    pub fn new(c: DVector<f64>) -> Self {
        let n = c.len();
        LpProblem {
            c,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            bounds: None,
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

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    /// Shorthand for `x ≥ 0`.
    pub fn nonnegative(self) -> Self {
        let n = self.num_vars();
        self.with_bounds(vec![(0.0, f64::INFINITY); n])
    }

    pub fn num_vars(&self) -> usize {
        self.c.len()
    }

    fn bound(&self, j: usize) -> (f64, f64) {
        self.bounds
            .as_ref()
            .map(|b| b[j])
            .unwrap_or((f64::NEG_INFINITY, f64::INFINITY))
    }

    fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let bad = |what: &str| Err(SolverError::InvalidProblem(what.to_string()));
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return bad("inequality block has inconsistent dimensions");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return bad("equality block has inconsistent dimensions");
        }
        if let Some(b) = &self.bounds {
            if b.len() != n {
                return bad("bounds length differs from number of variables");
            }
            if b.iter().any(|(l, u)| l.is_nan() || u.is_nan() || *l == f64::INFINITY || *u == f64::NEG_INFINITY) {
                return bad("bounds contain NaN or inverted infinities");
            }
        }
        check_finite("c", self.c.as_slice())?;
        check_finite("A_ineq", self.a_ineq.as_slice())?;
        check_finite("b_ineq", self.b_ineq.as_slice())?;
        check_finite("A_eq", self.a_eq.as_slice())?;
        check_finite("b_eq", self.b_eq.as_slice())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LpSettings {
    fn default() -> Self {
        LpSettings {
            tol: DEFAULT_TOL,
            max_iter: 20_000,
        }
    }
}

const PIVOT_TOL: f64 = 1e-11;
const PRICE_TOL: f64 = 1e-11;
const DEGENERATE_STREAK: usize = 40;

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = offset + y
    Lower { col: usize, offset: f64 },
    /// x = offset − y
    Upper { col: usize, offset: f64 },
    /// x = y⁺ − y⁻
    Free { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy)]
enum RowKind {
    Ineq(usize),
    Eq(usize),
    /// Upper bound of a variable that also has a finite lower bound.
    UpperBound(usize),
}

/// `min c̃ᵀy  s.t.  Ã y = b̃,  y ≥ 0,  b̃ ≥ 0`, slacks included in `Ã`.
struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    sign: Vec<f64>,
    kinds: Vec<RowKind>,
    vars: Vec<VarMap>,
    slack_of_row: Vec<Option<usize>>,
}

impl StandardForm {
    fn build(p: &LpProblem) -> Self {
        let n = p.num_vars();
        let mut vars = Vec::with_capacity(n);
        let mut ncols = 0;
        let mut upper_rows = Vec::new();
        for j in 0..n {
            let (l, u) = p.bound(j);
            if l.is_finite() {
                vars.push(VarMap::Lower { col: ncols, offset: l });
                if u.is_finite() {
                    upper_rows.push((j, ncols, u - l));
                }
                ncols += 1;
            } else if u.is_finite() {
                vars.push(VarMap::Upper { col: ncols, offset: u });
                ncols += 1;
            } else {
                vars.push(VarMap::Free { pos: ncols, neg: ncols + 1 });
                ncols += 2;
            }
        }
        let n_struct = ncols;
        let m_ineq = p.a_ineq.nrows();
        let m_eq = p.a_eq.nrows();
        let n_slack = m_ineq + upper_rows.len();
        let m = m_ineq + m_eq + upper_rows.len();
        let mut a = DMatrix::zeros(m, n_struct + n_slack);
        let mut b = DVector::zeros(m);
        let mut c = DVector::zeros(n_struct + n_slack);
        let mut kinds = Vec::with_capacity(m);
        let mut slack_of_row = vec![None; m];

        for (j, vm) in vars.iter().enumerate() {
            match *vm {
                VarMap::Lower { col, .. } => c[col] = p.c[j],
                VarMap::Upper { col, .. } => c[col] = -p.c[j],
                VarMap::Free { pos, neg } => {
                    c[pos] = p.c[j];
                    c[neg] = -p.c[j];
                }
            }
        }

        let fill_row = |row: usize, coeffs: &dyn Fn(usize) -> f64, rhs: f64, a: &mut DMatrix<f64>, b: &mut DVector<f64>| {
            let mut shift = 0.0;
            for (j, vm) in vars.iter().enumerate() {
                let aij = coeffs(j);
                if aij == 0.0 {
                    continue;
                }
                match *vm {
                    VarMap::Lower { col, offset } => {
                        a[(row, col)] = aij;
                        shift += aij * offset;
                    }
                    VarMap::Upper { col, offset } => {
                        a[(row, col)] = -aij;
                        shift += aij * offset;
                    }
                    VarMap::Free { pos, neg } => {
                        a[(row, pos)] = aij;
                        a[(row, neg)] = -aij;
                    }
                }
            }
            b[row] = rhs - shift;
        };

        let mut row = 0;
        for i in 0..m_ineq {
            fill_row(row, &|j| p.a_ineq[(i, j)], p.b_ineq[i], &mut a, &mut b);
            let s = n_struct + i;
            a[(row, s)] = 1.0;
            slack_of_row[row] = Some(s);
            kinds.push(RowKind::Ineq(i));
            row += 1;
        }
        for i in 0..m_eq {
            fill_row(row, &|j| p.a_eq[(i, j)], p.b_eq[i], &mut a, &mut b);
            kinds.push(RowKind::Eq(i));
            row += 1;
        }
        for (k, &(j, col, width)) in upper_rows.iter().enumerate() {
            a[(row, col)] = 1.0;
            b[row] = width;
            let s = n_struct + m_ineq + k;
            a[(row, s)] = 1.0;
            slack_of_row[row] = Some(s);
            kinds.push(RowKind::UpperBound(j));
            row += 1;
        }

        let mut sign = vec![1.0; m];
        for i in 0..m {
            if b[i] < 0.0 {
                sign[i] = -1.0;
                b[i] = -b[i];
                for jj in 0..a.ncols() {
                    a[(i, jj)] = -a[(i, jj)];
                }
            }
        }

        StandardForm {
            a,
            b,
            c,
            sign,
            kinds,
            vars,
            slack_of_row,
        }
    }
}

/// Dense tableau; row `m` holds reduced costs, the last column holds the rhs.
struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    m: usize,
    ncols: usize,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    MaxIter,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let rhs = self.ncols;
        let piv = self.t[(r, c)];
        for j in 0..=rhs {
            self.t[(r, j)] /= piv;
        }
        self.t[(r, c)] = 1.0;
        for i in 0..=self.m {
            if i == r {
                continue;
            }
            let f = self.t[(i, c)];
            if f != 0.0 {
                for j in 0..=rhs {
                    let v = self.t[(r, j)];
                    if v != 0.0 {
                        self.t[(i, j)] -= f * v;
                    }
                }
                self.t[(i, c)] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn set_cost(&mut self, cost: &[f64]) {
        let rhs = self.ncols;
        for j in 0..=rhs {
            self.t[(self.m, j)] = if j < rhs { cost[j] } else { 0.0 };
        }
        for i in 0..self.m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for j in 0..=rhs {
                    self.t[(self.m, j)] -= cb * self.t[(i, j)];
                }
            }
        }
    }

    fn run(&mut self, allowed: &[bool], max_iter: usize, iters: &mut usize) -> PhaseEnd {
        let rhs = self.ncols;
        let mut degenerate = 0usize;
        loop {
            if *iters >= max_iter {
                return PhaseEnd::MaxIter;
            }
            let bland = degenerate > DEGENERATE_STREAK;
            let mut enter = None;
            let mut best = -PRICE_TOL;
            for j in 0..self.ncols {
                if !allowed[j] {
                    continue;
                }
                let d = self.t[(self.m, j)];
                if d < best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = enter else {
                return PhaseEnd::Optimal;
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.m {
                let a = self.t[(i, c)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, rhs)].max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            ratio < best_ratio - 1e-13
                                || (ratio <= best_ratio + 1e-13 && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        best_ratio = best_ratio.min(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return PhaseEnd::Unbounded;
            };
            if best_ratio <= 1e-13 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
            *iters += 1;
        }
    }
}

/// Solve an LP with the two-phase simplex method.
pub fn solve_lp(p: &LpProblem, settings: &LpSettings) -> Result<SolveReport, SolverError> {
    p.validate()?;
    let n = p.num_vars();
    let n_dual = p.a_ineq.nrows() + p.a_eq.nrows() + if p.bounds.is_some() { 2 * n } else { 0 };

    if let Some(bounds) = &p.bounds {
        if let Some(j) = bounds.iter().position(|(l, u)| l > u) {
            let mut cert = DVector::zeros(n_dual);
            let base = p.a_ineq.nrows() + p.a_eq.nrows();
            cert[base + j] = 1.0;
            cert[base + n + j] = 1.0;
            let mut rep = SolveReport::without_solution(Status::Infeasible, n, n_dual, 0);
            rep.certificate = Some(cert);
            return Ok(rep);
        }
    }

    let sf = StandardForm::build(p);
    let m = sf.a.nrows();
    let n_std = sf.a.ncols();

    // Artificials only where no slack with +1 can start in the basis.
    let mut basis = Vec::with_capacity(m);
    let mut art_rows = Vec::new();
    for i in 0..m {
        match sf.slack_of_row[i] {
            Some(s) if sf.sign[i] > 0.0 => basis.push(s),
            _ => {
                basis.push(n_std + art_rows.len());
                art_rows.push(i);
            }
        }
    }
    let n_art = art_rows.len();
    let ncols = n_std + n_art;
    let mut t = DMatrix::zeros(m + 1, ncols + 1);
    t.view_mut((0, 0), (m, n_std)).copy_from(&sf.a);
    for (k, &i) in art_rows.iter().enumerate() {
        t[(i, n_std + k)] = 1.0;
    }
    for i in 0..m {
        t[(i, ncols)] = sf.b[i];
    }
    let mut tab = Tableau { t, basis, m, ncols };
    let mut iters = 0;

    let full_matrix = |tab_cols: &[usize]| -> DMatrix<f64> {
        let mut bm = DMatrix::zeros(m, tab_cols.len());
        for (k, &col) in tab_cols.iter().enumerate() {
            if col < n_std {
                bm.set_column(k, &sf.a.column(col));
            } else {
                bm[(art_rows[col - n_std], k)] = 1.0;
            }
        }
        bm
    };

    if n_art > 0 {
        let mut cost1 = vec![0.0; ncols];
        for c in cost1.iter_mut().skip(n_std) {
            *c = 1.0;
        }
        tab.set_cost(&cost1);
        let allowed = vec![true; ncols];
        match tab.run(&allowed, settings.max_iter, &mut iters) {
            PhaseEnd::MaxIter => return Ok(SolveReport::without_solution(Status::MaxIter, n, n_dual, iters)),
            // Phase 1 is bounded below by zero.
            PhaseEnd::Unbounded | PhaseEnd::Optimal => {}
        }
        let bmat = full_matrix(&tab.basis);
        let lu = bmat.clone().lu();
        let xb = lu.solve(&sf.b).unwrap_or_else(|| tab.t.view((0, ncols), (m, 1)).into_owned().column(0).into_owned());
        let infeas: f64 = tab
            .basis
            .iter()
            .zip(xb.iter())
            .filter(|(&col, _)| col >= n_std)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let feas_tol = 1e-9 * (1.0 + sf.b.amax());
        if infeas > feas_tol {
            let cb = DVector::from_iterator(m, tab.basis.iter().map(|&col| cost1[col]));
            let pi = bmat.transpose().lu().solve(&cb).unwrap_or_else(|| DVector::zeros(m));
            let mut rep = SolveReport::without_solution(Status::Infeasible, n, n_dual, iters);
            let reduced1 = -(sf.a.transpose() * &pi);
            rep.certificate = Some(map_multipliers(p, &sf, &pi, &reduced1));
            return Ok(rep);
        }
        // Pivot zero-level artificials out where possible; rows where that
        // fails are redundant and keep their artificial at zero.
        for r in 0..m {
            if tab.basis[r] >= n_std {
                if let Some(c) = (0..n_std).find(|&c| tab.t[(r, c)].abs() > 1e-9) {
                    tab.pivot(r, c);
                }
            }
        }
    }

    let mut cost2 = vec![0.0; ncols];
    cost2[..n_std].copy_from_slice(sf.c.as_slice());
    tab.set_cost(&cost2);
    let mut allowed = vec![true; ncols];
    for a in allowed.iter_mut().skip(n_std) {
        *a = false;
    }
    match tab.run(&allowed, settings.max_iter, &mut iters) {
        PhaseEnd::MaxIter => return Ok(SolveReport::without_solution(Status::MaxIter, n, n_dual, iters)),
        PhaseEnd::Unbounded => return Ok(SolveReport::without_solution(Status::Unbounded, n, n_dual, iters)),
        PhaseEnd::Optimal => {}
    }

    let bmat = full_matrix(&tab.basis);
    let xb = match bmat.clone().lu().solve(&sf.b) {
        Some(v) => v,
        None => DVector::from_iterator(m, (0..m).map(|i| tab.t[(i, ncols)])),
    };
    let cb = DVector::from_iterator(m, tab.basis.iter().map(|&col| cost2[col]));
    let pi = bmat.transpose().lu().solve(&cb).unwrap_or_else(|| DVector::zeros(m));

    let mut y = DVector::zeros(n_std);
    for (r, &col) in tab.basis.iter().enumerate() {
        if col < n_std {
            y[col] = xb[r].max(0.0);
        }
    }
    let reduced = &sf.c - sf.a.transpose() * &pi;
    let x = DVector::from_iterator(
        n,
        sf.vars.iter().map(|vm| match *vm {
            VarMap::Lower { col, offset } => offset + y[col],
            VarMap::Upper { col, offset } => offset - y[col],
            VarMap::Free { pos, neg } => y[pos] - y[neg],
        }),
    );
    let dual = map_multipliers(p, &sf, &pi, &reduced);
    Ok(finish_report(p, x, dual, iters))
}

/// Translate standard-form row multipliers into the original Lagrangian
/// orientation, with bound multipliers taken from reduced costs.
fn map_multipliers(p: &LpProblem, sf: &StandardForm, pi: &DVector<f64>, reduced: &DVector<f64>) -> DVector<f64> {
    let n = p.num_vars();
    let m_ineq = p.a_ineq.nrows();
    let m_eq = p.a_eq.nrows();
    let has_bounds = p.bounds.is_some();
    let mut out = DVector::zeros(m_ineq + m_eq + if has_bounds { 2 * n } else { 0 });
    let lower_base = m_ineq + m_eq;
    let upper_base = lower_base + n;
    for (r, kind) in sf.kinds.iter().enumerate() {
        let y = -sf.sign[r] * pi[r];
        match *kind {
            RowKind::Ineq(i) => out[i] = y,
            RowKind::Eq(i) => out[m_ineq + i] = y,
            RowKind::UpperBound(j) => out[upper_base + j] = y,
        }
    }
    if has_bounds {
        for (j, vm) in sf.vars.iter().enumerate() {
            match *vm {
                VarMap::Lower { col, .. } => out[lower_base + j] = reduced[col],
                VarMap::Upper { col, .. } => out[upper_base + j] = reduced[col],
                VarMap::Free { .. } => {}
            }
        }
    }
    out
}

fn finish_report(p: &LpProblem, x: DVector<f64>, dual: DVector<f64>, iterations: usize) -> SolveReport {
    let n = p.num_vars();
    let m_ineq = p.a_ineq.nrows();
    let m_eq = p.a_eq.nrows();
    let y_ineq = dual.rows(0, m_ineq);
    let y_eq = dual.rows(m_ineq, m_eq);

    let mut primal: f64 = 0.0;
    if m_ineq > 0 {
        primal = primal.max((&p.a_ineq * &x - &p.b_ineq).max());
    }
    if m_eq > 0 {
        primal = primal.max((&p.a_eq * &x - &p.b_eq).amax());
    }

    let mut grad = &p.c + p.a_ineq.transpose() * y_ineq + p.a_eq.transpose() * y_eq;
    let mut dual_obj = -p.b_ineq.dot(&y_ineq) - p.b_eq.dot(&y_eq);
    let mut sign_violation: f64 = y_ineq.iter().fold(0.0, |acc, v| acc.max(-v));
    if p.bounds.is_some() {
        for j in 0..n {
            let (l, u) = p.bound(j);
            primal = primal.max(l - x[j]).max(x[j] - u);
            let yl = dual[m_ineq + m_eq + j];
            let yu = dual[m_ineq + m_eq + n + j];
            grad[j] += yu - yl;
            if l.is_finite() {
                dual_obj += l * yl;
            }
            if u.is_finite() {
                dual_obj -= u * yu;
            }
            sign_violation = sign_violation.max(-yl).max(-yu);
        }
    }
    let objective = p.c.dot(&x);
    SolveReport {
        status: Status::Optimal,
        x,
        dual,
        objective,
        primal_residual: primal.max(0.0),
        dual_residual: grad.amax().max(sign_violation),
        duality_gap: (objective - dual_obj).abs() / (1.0 + objective.abs()),
        iterations,
        certificate: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn solve(p: &LpProblem) -> SolveReport {
        solve_lp(p, &LpSettings::default()).unwrap()
    }

    #[test]
    fn single_lower_bound() {
        // min x s.t. x >= 1
        let p = LpProblem::new(dvector![1.0]).with_inequalities(dmatrix![-1.0], dvector![-1.0]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.x[0] - 1.0).abs() < 1e-12);
        assert!(r.kkt_residual() < 1e-10);
    }

    #[test]
    fn equality_pins_nonnegative_vector() {
        // min 1ᵀh s.t. hᵀI = (0.5, 0), h >= 0
        let p = LpProblem::new(dvector![1.0, 1.0])
            .with_equalities(DMatrix::identity(2, 2), dvector![0.5, 0.0])
            .nonnegative();
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((&r.x - dvector![0.5, 0.0]).amax() < 1e-12);
        assert!((r.objective - 0.5).abs() < 1e-12);
        assert!(r.kkt_residual() < 1e-10);
    }

    #[test]
    fn triangle_maximum() {
        // max x + y over the unit simplex, as min of the negation.
        let a = dmatrix![1.0, 1.0; -1.0, 0.0; 0.0, -1.0];
        let p = LpProblem::new(dvector![-1.0, -1.0]).with_inequalities(a, dvector![1.0, 0.0, 0.0]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective + 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds_are_infeasible_with_certificate() {
        // x >= 1 and x <= 0
        let a = dmatrix![-1.0; 1.0];
        let b = dvector![-1.0, 0.0];
        let p = LpProblem::new(dvector![0.0]).with_inequalities(a.clone(), b.clone());
        let r = solve(&p);
        assert_eq!(r.status, Status::Infeasible);
        let y = r.certificate.unwrap();
        assert!(y.iter().all(|v| *v >= -1e-12));
        assert!((a.transpose() * &y).amax() < 1e-12);
        assert!(b.dot(&y) < 0.0);
    }

    #[test]
    fn infeasible_with_bounds_certificate() {
        // x + y <= -1 with x, y >= 0
        let a = dmatrix![1.0, 1.0];
        let b = dvector![-1.0];
        let p = LpProblem::new(dvector![1.0, 0.0]).with_inequalities(a.clone(), b.clone()).nonnegative();
        let r = solve(&p);
        assert_eq!(r.status, Status::Infeasible);
        let y = r.certificate.unwrap();
        // layout: [ineq(1), lower(2), upper(2)]
        assert!(y.iter().all(|v| *v >= -1e-12));
        let combo = a.transpose() * y.rows(0, 1) - y.rows(1, 2) + y.rows(3, 2);
        assert!(combo.amax() < 1e-12);
        assert!(b.dot(&y.rows(0, 1)) < 0.0);
    }

    #[test]
    fn unbounded_direction() {
        let p = LpProblem::new(dvector![-1.0, 0.0]).with_inequalities(dmatrix![0.0, 1.0], dvector![1.0]);
        assert_eq!(solve(&p).status, Status::Unbounded);
    }

    #[test]
    fn boxed_variables_and_duals() {
        // min -x - 2y  s.t. x + y <= 3, 0 <= x <= 2, 0 <= y <= 2
        let p = LpProblem::new(dvector![-1.0, -2.0])
            .with_inequalities(dmatrix![1.0, 1.0], dvector![3.0])
            .with_bounds(vec![(0.0, 2.0), (0.0, 2.0)]);
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((&r.x - dvector![1.0, 2.0]).amax() < 1e-12);
        assert!(r.kkt_residual() < 1e-10, "{r:?}");
    }

    #[test]
    fn degenerate_redundant_equalities() {
        // duplicated equality rows must not break phase 1
        let a = dmatrix![1.0, 1.0; 2.0, 2.0];
        let p = LpProblem::new(dvector![1.0, 2.0])
            .with_equalities(a, dvector![1.0, 2.0])
            .nonnegative();
        let r = solve(&p);
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - 1.0).abs() < 1e-12);
        assert!(r.kkt_residual() < 1e-10, "{r:?}");
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let p = LpProblem::new(dvector![1.0, 1.0]).with_inequalities(dmatrix![1.0], dvector![1.0]);
        assert!(solve_lp(&p, &LpSettings::default()).is_err());
    }
}
