//! Vertex enumeration by the double description method.
//!
//! `{x : A x ≤ b}` is lifted to the cone `{(x, s) : A x − b s ≤ 0, s ≥ 0}`
//! and its extreme rays are built one constraint at a time. Rays with
//! `s > 0` are vertices after scaling; rays with `s = 0` are recession
//! directions, which means the polytope is unbounded.

use nalgebra::{DMatrix, DVector};

use super::{GeometryError, Result, VERTEX_TOL};

pub(crate) const MAX_DIM: usize = 8;
const ZERO_TOL: f64 = 1e-10;

#[derive(Clone)]
struct Ray {
    r: DVector<f64>,
    zeros: Bits,
}

#[derive(Clone, PartialEq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

/// Vertices of a nonempty polytope; the caller checks emptiness first.
pub(crate) fn enumerate(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
    let n = a.ncols();
    let d = n + 1;
    // Homogenized, normalized rows. The last one is s ≥ 0.
    let mut h: Vec<DVector<f64>> = Vec::with_capacity(a.nrows() + 1);
    for i in 0..a.nrows() {
        let mut row = DVector::zeros(d);
        for j in 0..n {
            row[j] = a[(i, j)];
        }
        row[n] = -b[i];
        let scale = row.rows(0, n).amax();
        if scale <= ZERO_TOL {
            // 0ᵀx ≤ bᵢ: either vacuous or the set is empty.
            if b[i] < -ZERO_TOL {
                return Err(GeometryError::Infeasible);
            }
            continue;
        }
        h.push(row / scale);
    }
    let mut s_row = DVector::zeros(d);
    s_row[n] = -1.0;
    h.push(s_row);

    let basis = independent_rows(&h, d).ok_or(GeometryError::Unbounded)?;
    let m = DMatrix::from_fn(d, d, |i, j| h[basis[i]][j]);
    let inv = m.try_inverse().ok_or(GeometryError::Unbounded)?;

    let mut rays: Vec<Ray> = (0..d)
        .map(|k| {
            let r = -inv.column(k).into_owned();
            let r = &r / r.norm();
            let mut zeros = Bits::new(h.len());
            for (j, &row) in basis.iter().enumerate() {
                if j != k {
                    zeros.set(row);
                }
            }
            Ray { r, zeros }
        })
        .collect();

    for (idx, row) in h.iter().enumerate() {
        if basis.contains(&idx) {
            continue;
        }
        let vals: Vec<f64> = rays.iter().map(|ray| row.dot(&ray.r)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > ZERO_TOL).collect();
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < -ZERO_TOL).collect();
        for (i, ray) in rays.iter_mut().enumerate() {
            if vals[i].abs() <= ZERO_TOL {
                ray.zeros.set(idx);
            }
        }
        if pos.is_empty() {
            continue;
        }
        let mut new_rays = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let common = rays[p].zeros.and(&rays[q].zeros);
                if common.count() + 2 < d {
                    continue;
                }
                let adjacent = (0..rays.len())
                    .filter(|&k| k != p && k != q)
                    .all(|k| !common.subset_of(&rays[k].zeros));
                if !adjacent {
                    continue;
                }
                let r = &rays[q].r * vals[p] - &rays[p].r * vals[q];
                let r = &r / r.norm();
                let mut zeros = common;
                zeros.set(idx);
                new_rays.push(Ray { r, zeros });
            }
        }
        let mut kept: Vec<Ray> = (0..rays.len())
            .filter(|&i| vals[i] <= ZERO_TOL)
            .map(|i| rays[i].clone())
            .collect();
        kept.extend(new_rays);
        rays = kept;
    }

    let mut out: Vec<DVector<f64>> = Vec::new();
    for ray in &rays {
        let s = ray.r[n];
        if s <= ZERO_TOL {
            return Err(GeometryError::Unbounded);
        }
        let v = ray.r.rows(0, n) / s;
        if !out.iter().any(|w| (w - &v).amax() <= VERTEX_TOL) {
            out.push(v);
        }
    }
    if out.is_empty() {
        return Err(GeometryError::Infeasible);
    }
    Ok(out)
}

/// Greedy choice of `d` linearly independent rows, or `None` if the rank is short.
fn independent_rows(h: &[DVector<f64>], d: usize) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(d);
    let mut ortho: Vec<DVector<f64>> = Vec::with_capacity(d);
    // Prefer the last row (s ≥ 0) so the initial cone is pointed in s.
    let order = std::iter::once(h.len() - 1).chain(0..h.len() - 1);
    for i in order {
        let mut v = h[i].clone();
        for u in &ortho {
            let c = u.dot(&v);
            v -= u * c;
        }
        let nv = v.norm();
        if nv > 1e-9 {
            ortho.push(v / nv);
            chosen.push(i);
            if chosen.len() == d {
                return Some(chosen);
            }
        }
    }
    None
}
