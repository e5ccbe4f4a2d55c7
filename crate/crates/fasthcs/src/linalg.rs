//! Thin wrappers around nalgebra's decompositions.
//!
//! Everything downstream assumes descending spectral order and a fixed sign
//! convention for loading columns; nalgebra guarantees neither, so the sorting
//! and sign fixing live here and nowhere else.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD with singular values sorted descending.
///
/// Returns `(u, sigma, v)` with `u` being `m x k`, `sigma` length `k`, and `v`
/// being `n x k` (right singular vectors as columns), `k = min(m, n)`.
pub(crate) fn thin_svd_sorted(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
    let svd = m
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sigma = svd.singular_values;

    let k = sigma.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));

    let u_sorted = DMatrix::from_fn(u.nrows(), k, |i, j| u[(i, order[j])]);
    let v_sorted = DMatrix::from_fn(v_t.ncols(), k, |i, j| v_t[(order[j], i)]);
    let s_sorted = DVector::from_fn(k, |j, _| sigma[order[j]]);
    Ok((u_sorted, s_sorted, v_sorted))
}

/// Symmetric eigendecomposition with eigenvalues sorted descending.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub(crate) fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let vals = DVector::from_fn(k, |j, _| eig.eigenvalues[order[j]]);
    let vecs = DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Flip each column so its largest-magnitude entry is positive.
///
/// Ties go to the lowest row index, which keeps the convention deterministic
/// for symmetric data. Resolves the sign ambiguity of singular vectors so
/// repeated runs and rotated reruns agree up to an honest column sign.
pub(crate) fn fix_column_signs(m: &mut DMatrix<f64>) {
    for j in 0..m.ncols() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..m.nrows() {
            let a = m[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if m[(best, j)] < 0.0 {
            for i in 0..m.nrows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

/// Number of eigenvalues counted as nonzero: strictly above
/// `largest * scale_rows * 1e-12`. `scale_rows` is the row count that produced
/// the spectrum, mirroring the usual `sigma_max * n * eps`-style rank cutoff.
pub(crate) fn rank_by_tolerance(eigenvalues: &DVector<f64>, scale_rows: usize) -> usize {
    let largest = eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    if largest <= 0.0 {
        return 0;
    }
    let tol = largest * scale_rows as f64 * 1e-12;
    eigenvalues.iter().filter(|&&l| l > tol).count()
}

/// Rows of `m` selected by `idx`, in the order given.
pub(crate) fn select_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)])
}

/// Column means of `m`.
pub(crate) fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_fn(m.ncols(), |j, _| m.column(j).sum() / n)
}
