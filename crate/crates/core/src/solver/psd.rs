use nalgebra::linalg::SymmetricEigen;

use crate::{CMatrix, Error, Result, C64};

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITERS: usize = 0; // unlimited

/// Frobenius-nearest positive semidefinite matrix.
///
/// Only the lower triangle of `h` is read; the input is treated as Hermitian.
pub fn project_psd(h: &CMatrix) -> Result<CMatrix> {
    if !h.is_square() {
        return Err(Error::Shape(format!(
            "PSD projection needs a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h.clone(), EIGEN_EPS, EIGEN_MAX_ITERS).ok_or(Error::Eigen)?;
    let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.0).collect();

    // B = Q_+ diag(sqrt(lambda_+)), result B B^H
    let mut b = CMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let s = C64::new(eig.eigenvalues[i].sqrt(), 0.0);
        b.set_column(j, &(eig.eigenvectors.column(i) * s));
    }
    let mut out = &b * b.adjoint();
    hermitize(&mut out);
    Ok(out)
}

/// Replace `a` by `(a + a^H) / 2` in place.
pub fn hermitize(a: &mut CMatrix) {
    let n = a.nrows();
    for r in 0..n {
        a[(r, r)].im = 0.0;
        for c in r + 1..n {
            let avg = (a[(r, c)] + a[(c, r)].conj()) * 0.5;
            a[(r, c)] = avg;
            a[(c, r)] = avg.conj();
        }
    }
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(h: &CMatrix) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(h.clone(), EIGEN_EPS, EIGEN_MAX_ITERS).ok_or(Error::Eigen)?;
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
