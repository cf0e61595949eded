//! Discrete Lyapunov equation `P − ΦᵀPΦ = S`.
//!
//! Solved through the vectorized system `(I − Φᵀ⊗Φᵀ) vec(P) = vec(S)`.
//! State dimensions here are tiny, so the dense `n²×n²` solve is fine.

use nalgebra::DMatrix;

use super::SolverError;

/// Largest eigenvalue modulus.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

pub fn dlyap(phi: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>, SolverError> {
    let n = phi.nrows();
    if phi.ncols() != n || s.nrows() != n || s.ncols() != n {
        return Err(SolverError::InvalidProblem("dlyap expects square matrices of equal size".into()));
    }
    let rho = spectral_radius(phi);
    if rho >= 1.0 - 1e-12 {
        return Err(SolverError::UnstablePhi(rho));
    }
    let pt = phi.transpose();
    let kron = pt.kronecker(&pt);
    let lhs = DMatrix::<f64>::identity(n * n, n * n) - kron;
    let rhs = nalgebra::DVector::from_column_slice(s.as_slice());
    let vec_p = lhs.lu().solve(&rhs).ok_or(SolverError::Singular)?;
    let p = DMatrix::from_column_slice(n, n, vec_p.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}
