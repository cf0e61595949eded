//! λ-contractive subsets of `{x : C x ≤ 1}` for a finite family of linear maps.
//!
//! The backward iteration `S_{k+1} = S_k ∩ ⋂_j {x : Φ_j x ∈ λ S_k}` is run
//! on rows normalized to a unit right-hand side. Only rows added in the last
//! pass are propagated, since older rows already had their preimages added.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{maximize, GeometryError, Result, REDUNDANCY_TOL};
use crate::solvers::spectral_radius;

#[derive(Debug, Clone, Copy)]
pub struct ContractiveOptions {
    pub max_iter: usize,
    /// Tolerance used when checking each row's image under every map.
    pub verify_tol: f64,
}

impl Default for ContractiveOptions {
    fn default() -> Self {
        ContractiveOptions {
            max_iter: 200,
            verify_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractiveSet {
    /// Rows of `T` in `{x : T x ≤ 1}`.
    pub t: DMatrix<f64>,
    pub iterations: usize,
    /// `max_{i,j} max{ T_i Φ_j x : T x ≤ 1 }`, which is at most λ up to tolerance.
    pub max_ratio: f64,
}

pub fn contractive_set(
    phis: &[DMatrix<f64>],
    c: &DMatrix<f64>,
    lambda: f64,
    opts: &ContractiveOptions,
) -> Result<ContractiveSet> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(GeometryError::Invalid(format!("contraction factor {lambda} not in (0, 1]")));
    }
    let n = c.ncols();
    for (index, phi) in phis.iter().enumerate() {
        if phi.nrows() != n || phi.ncols() != n {
            return Err(GeometryError::DimensionMismatch { expected: n, got: phi.nrows() });
        }
        let radius = spectral_radius(phi);
        if radius >= 1.0 {
            return Err(GeometryError::UnstableVertex { index, radius });
        }
    }
    let mut rows: Vec<DVector<f64>> = (0..c.nrows())
        .map(|i| c.row(i).transpose())
        .filter(|r| r.amax() > 1e-14)
        .collect();
    rows = prune(rows)?;
    let mut frontier = rows.clone();

    for iter in 1..=opts.max_iter {
        let mut added: Vec<DVector<f64>> = Vec::new();
        for r in &frontier {
            for phi in phis {
                let cand = phi.transpose() * r / lambda;
                if cand.amax() < 1e-14 {
                    continue;
                }
                let current: Vec<&DVector<f64>> = rows.iter().chain(added.iter()).collect();
                if !implied_by(&current, &cand)? {
                    added.push(cand);
                }
            }
        }
        if added.is_empty() {
            let t = stack(&rows, n);
            let max_ratio = verify_contractive(&t, phis)?;
            if max_ratio > lambda + opts.verify_tol {
                return Err(GeometryError::Invalid(format!(
                    "contractive set check failed: ratio {max_ratio} exceeds {lambda}"
                )));
            }
            return Ok(ContractiveSet { t, iterations: iter, max_ratio });
        }
        let before = rows.len();
        rows.extend(added);
        let keep = prune_indices(&rows)?;
        frontier = keep.iter().filter(|&&i| i >= before).map(|&i| rows[i].clone()).collect();
        rows = keep.into_iter().map(|i| rows[i].clone()).collect();
    }
    Err(GeometryError::NoConvergence(opts.max_iter))
}

/// Largest `max{ T_i Φ_j x : T x ≤ 1 }` over rows `i` and maps `j`.
pub fn verify_contractive(t: &DMatrix<f64>, phis: &[DMatrix<f64>]) -> Result<f64> {
    let ones = DVector::from_element(t.nrows(), 1.0);
    let mut worst = f64::NEG_INFINITY;
    for phi in phis {
        let tp = t * phi;
        for i in 0..t.nrows() {
            let (v, _) = maximize(t, &ones, &tp.row(i).transpose())?;
            worst = worst.max(v);
        }
    }
    Ok(worst)
}

fn stack(rows: &[DVector<f64>], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j])
}

/// Whether `cand·x ≤ 1` already holds on `{x : rᵀx ≤ 1 for r in rows}`.
fn implied_by(rows: &[&DVector<f64>], cand: &DVector<f64>) -> Result<bool> {
    let n = cand.len();
    let m = rows.len();
    let mut a = DMatrix::zeros(m + 1, n);
    for (i, r) in rows.iter().enumerate() {
        a.set_row(i, &r.transpose());
    }
    a.set_row(m, &cand.transpose());
    let mut b = DVector::from_element(m + 1, 1.0);
    b[m] = 2.0;
    let (v, _) = maximize(&a, &b, cand)?;
    Ok(v <= 1.0 + REDUNDANCY_TOL)
}

fn prune_indices(rows: &[DVector<f64>]) -> Result<Vec<usize>> {
    let mut keep: Vec<usize> = (0..rows.len()).collect();
    let mut k = 0;
    while k < keep.len() {
        let i = keep[k];
        let others: Vec<&DVector<f64>> = keep.iter().filter(|&&j| j != i).map(|&j| &rows[j]).collect();
        if implied_by(&others, &rows[i])? {
            keep.remove(k);
        } else {
            k += 1;
        }
    }
    Ok(keep)
}

fn prune(rows: Vec<DVector<f64>>) -> Result<Vec<DVector<f64>>> {
    let keep = prune_indices(&rows)?;
    Ok(keep.into_iter().map(|i| rows[i].clone()).collect())
}
