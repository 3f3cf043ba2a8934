//! Small dense Hermitian helpers shared by the relaxation solver.

use nalgebra::{Cholesky, Dyn, SymmetricEigen};

use crate::{CMatrix, C64};

/// `(A + Aᴴ)/2`.
pub fn hermitize(a: &CMatrix) -> CMatrix {
    let mut out = a.clone();
    let n = a.nrows();
    for r in 0..n {
        out[(r, r)] = C64::new(a[(r, r)].re, 0.0);
        for c in (r + 1)..n {
            let v = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            out[(r, c)] = v;
            out[(c, r)] = v.conj();
        }
    }
    out
}

/// Real inner product `Re Tr(Aᴴ B)`.
pub fn real_inner(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// Eigen-decomposition of a Hermitian matrix with eigenvalues in descending
/// order; column `k` of the returned matrix pairs with eigenvalue `k`.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Frobenius-nearest PSD matrix: negative eigenvalues are clipped to zero.
pub fn project_psd(a: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(hermitize(a));
    let n = a.nrows();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > 0.0).collect();
    if keep.is_empty() {
        return CMatrix::zeros(n, n);
    }
    let factor = CMatrix::from_fn(n, keep.len(), |r, c| {
        let k = keep[c];
        eig.eigenvectors[(r, k)] * eig.eigenvalues[k].sqrt()
    });
    hermitize(&(&factor * factor.adjoint()))
}

/// Cholesky factorization of a Hermitian matrix, `None` unless it is positive
/// definite. nalgebra's complex factorization takes square roots of negative
/// pivots without complaint, so the pivots are checked here.
pub fn cholesky_pd(a: &CMatrix) -> Option<Cholesky<C64, Dyn>> {
    let chol = Cholesky::new(a.clone())?;
    chol.l_dirty()
        .diagonal()
        .iter()
        .all(|z| z.re > 0.0 && z.re.is_finite() && z.im.abs() <= 1e-12 * z.re)
        .then_some(chol)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &CMatrix) -> f64 {
    SymmetricEigen::new(hermitize(a))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
