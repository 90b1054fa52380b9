//! Dense complex linear algebra helpers shared across the crate.
//!
//! Everything is built on nalgebra's SVD and Hermitian eigendecomposition;
//! matrices at desk scale (n ≤ ~2048) are decomposed in full.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Singular values of `m`, descending.
pub fn singular_values(m: &CMatrix) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Smallest singular value. For an `n×m` matrix this is `s_min(n,m)(M)`;
/// zero-sized matrices report 0.
pub fn smin(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    if sv.is_empty() {
        return 0.0;
    }
    sv.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Operator (spectral) norm; zero-sized matrices report 0.
pub fn opnorm(m: &CMatrix) -> f64 {
    singular_values(m).iter().copied().fold(0.0, f64::max)
}

/// Eigenvalues of a Hermitian matrix, descending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> DVector<f64> {
    let mut ev: Vec<f64> = h
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
    DVector::from_vec(ev)
}

/// Numerical rank with threshold `tol` on the singular values.
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    singular_values(m).iter().filter(|&&s| s > tol).count()
}

/// Orthonormal basis of `ker(m)` as matrix columns.
///
/// Computed from the Hermitian eigendecomposition of `mᴴm`, so the basis is
/// full even for wide matrices (nalgebra's SVD is thin). Eigenvectors whose
/// singular value `√λ` is at most `tol` span the kernel.
pub fn nullspace(m: &CMatrix, tol: f64) -> CMatrix {
    let gram = m.adjoint() * m;
    let eig = gram.symmetric_eigen();
    let mut cols: Vec<CVector> = Vec::new();
    for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda.max(0.0).sqrt() <= tol {
            cols.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    if cols.is_empty() {
        return CMatrix::zeros(m.ncols(), 0);
    }
    CMatrix::from_columns(&cols)
}

/// Solve `a · x = b` by LU with partial pivoting.
pub fn lu_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Numerical("LU solve failed: matrix is singular".into()))
}

/// Extract the submatrix indexed by `rows × cols`.
pub fn submatrix(m: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
}
