//! Data validation, centering, and the lossless kernel reduction.
//!
//! High-dimensional input (more columns than the centered data has rank, the
//! typical case being p > n) is rotated into the span it actually occupies:
//! with the centered data Ỹ and its Gram matrix ỸỸᵀ = U L Uᵀ, the working
//! matrix is X = U L^{1/2} (n x r). The map is an isometry of the rows, so
//! every subset fit, distance, and eigenvalue computed on X agrees with the
//! same quantity on Ỹ, and `basis` (p x r, orthonormal columns) carries
//! results back: Ỹ = X basisᵀ exactly, up to float rounding.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Which subset search produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Congruence-driven incremental subset search.
    IIndex,
    /// Projection-pursuit outlyingness trimming.
    ProjectionPursuit,
    /// Plain PCA on a fixed subset (used as the simulation baseline).
    Classical,
}

impl std::fmt::Display for FitMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FitMethod::IIndex => write!(f, "i_index"),
            FitMethod::ProjectionPursuit => write!(f, "projection_pursuit"),
            FitMethod::Classical => write!(f, "classical"),
        }
    }
}

/// Validated n x p data. Construction rejects non-finite entries and
/// degenerate shapes; everything downstream can assume both.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Wrap and validate a data matrix: at least 3 rows, 2 columns, all
    /// entries finite.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        let (n, p) = values.shape();
        if n < 3 {
            return Err(Error::InvalidInput(format!("need at least 3 rows, got {n}")));
        }
        if p < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 columns, got {p}")));
        }
        for i in 0..n {
            for j in 0..p {
                if !values[(i, j)].is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "non-finite value at row {i}, column {j}"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    /// Build from a row-major flat slice.
    pub fn from_rows(n: usize, p: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {} values for a {n}x{p} matrix, got {}",
                n * p,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, p, data))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Centered data expressed on the basis of its own span.
#[derive(Debug, Clone)]
pub struct ReducedBasis {
    /// Working matrix, n x r. Equal to the centered data when no reduction
    /// applied (then `basis` is the identity embedding).
    pub x: DMatrix<f64>,
    /// Column means of the original data, length p.
    pub mean: DVector<f64>,
    /// Orthonormal p x r map from working coordinates back to the original
    /// space.
    pub basis: DMatrix<f64>,
    /// Rank of the centered data, r <= min(n-1, p).
    pub rank: usize,
}

impl ReducedBasis {
    /// Rows in original coordinates: X basisᵀ + mean. Exact (to rounding)
    /// because the reduction never discards a nonzero direction.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut y = &self.x * self.basis.transpose();
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                y[(i, j)] += self.mean[j];
            }
        }
        y
    }
}

/// A fitted q-component model. `center` and `loadings` live in whatever space
/// the fit ran in (final models are always full-space; intermediate candidate
/// fits use working coordinates).
#[derive(Debug, Clone)]
pub struct PcaModel {
    /// Location estimate, length p.
    pub center: DVector<f64>,
    /// Component variances, length q, descending, all >= 0.
    pub eigenvalues: DVector<f64>,
    /// p x q, orthonormal columns, each column's largest-magnitude entry
    /// positive.
    pub loadings: DMatrix<f64>,
    /// Rows the model was fitted on, sorted ascending.
    pub subset: Vec<usize>,
    /// Which search produced the fit.
    pub method: FitMethod,
}

impl PcaModel {
    /// Number of components.
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Ambient dimension of the space the model lives in.
    pub fn dim(&self) -> usize {
        self.loadings.nrows()
    }

    /// Scores of a single observation: (y - center) projected on the
    /// loadings. `y` must have length `dim()`.
    pub fn scores_row(&self, y: &[f64]) -> DVector<f64> {
        debug_assert_eq!(y.len(), self.dim());
        DVector::from_fn(self.q(), |k, _| {
            let mut acc = 0.0;
            for j in 0..self.dim() {
                acc += (y[j] - self.center[j]) * self.loadings[(j, k)];
            }
            acc
        })
    }
}

/// Center the data and, whenever p exceeds the centered rank r, rotate it onto
/// an r-dimensional working basis (see the module doc). For full-rank wide-n
/// data the result is simply the centered matrix with an identity embedding.
pub fn center_and_reduce(data: &DataMatrix) -> Result<ReducedBasis> {
    let (n, p) = (data.nrows(), data.ncols());
    let mean = linalg::column_means(data.values());
    let mut centered = data.values().clone();
    for i in 0..n {
        for j in 0..p {
            centered[(i, j)] -= mean[j];
        }
    }

    // Eigendecompose the smaller Gram form to find the rank.
    let (vals, vecs, gram_is_rows) = if p > n {
        let gram = &centered * centered.transpose(); // n x n
        let (vals, vecs) = linalg::symmetric_eigen_sorted(&gram);
        (vals, vecs, true)
    } else {
        let gram = centered.transpose() * &centered; // p x p
        let (vals, vecs) = linalg::symmetric_eigen_sorted(&gram);
        (vals, vecs, false)
    };
    let rank = linalg::rank_by_tolerance(&vals, n);
    if rank == 0 {
        return Err(Error::DegenerateInput(
            "all rows are identical; no variance to analyze".into(),
        ));
    }

    if rank == p {
        // Nothing to reduce; basis is the identity embedding.
        return Ok(ReducedBasis {
            x: centered,
            mean,
            basis: DMatrix::identity(p, p),
            rank,
        });
    }

    // basis = the rank leading right singular vectors of the centered data.
    let mut basis = if gram_is_rows {
        // right vectors from the row Gram: V = Ỹᵀ U L^{-1/2}
        let u_r = vecs.columns(0, rank).into_owned();
        let mut v = centered.transpose() * u_r;
        for j in 0..rank {
            let s = vals[j].sqrt();
            for i in 0..p {
                v[(i, j)] /= s;
            }
        }
        v
    } else {
        vecs.columns(0, rank).into_owned()
    };
    linalg::fix_column_signs(&mut basis);
    let x = &centered * &basis;
    Ok(ReducedBasis { x, mean, basis, rank })
}

/// PCA of the rows `subset` of `data`: center at the subset mean, SVD of the
/// centered rows divided by `scale_denominator`, keep the top `q` components.
///
/// The denominator is the caller's choice of variance normalization: sqrt(q)
/// for seed-subset fits, sqrt(|H| - 1) for final fits (then the eigenvalues
/// are the sample variances of the subset's scores). Trailing eigenvalues may
/// be zero when the subset spans fewer than q directions; the corresponding
/// loading columns are still orthonormal.
pub fn pca_fit_on_subset(
    data: &DMatrix<f64>,
    subset: &[usize],
    q: usize,
    scale_denominator: f64,
    method: FitMethod,
) -> Result<PcaModel> {
    let d = data.ncols();
    if q < 1 || q > d {
        return Err(Error::InvalidConfig(format!(
            "q = {q} out of range for {d}-dimensional data"
        )));
    }
    if subset.len() < q + 1 {
        return Err(Error::SubsetTooSmall { need: q + 1, got: subset.len() });
    }
    if !(scale_denominator > 0.0) {
        return Err(Error::InvalidConfig("scale denominator must be positive".into()));
    }
    let rows = linalg::select_rows(data, subset);
    let center = linalg::column_means(&rows);
    let mut b = rows;
    for i in 0..b.nrows() {
        for j in 0..d {
            b[(i, j)] = (b[(i, j)] - center[j]) / scale_denominator;
        }
    }
    let (_, s, mut v) = linalg::thin_svd_sorted(&b)?;
    if s.len() < q {
        // fewer singular values than components requested: |H| <= q rows can
        // never reach here because |H| >= q + 1 is enforced above, so this
        // means d < q, already rejected.
        return Err(Error::Numerical("SVD returned too few components".into()));
    }
    let mut eigenvalues = DVector::from_fn(q, |j, _| s[j] * s[j]);
    // clamp float dust so eigenvalues are exactly nonnegative and descending
    for j in 0..q {
        if eigenvalues[j] < 0.0 {
            eigenvalues[j] = 0.0;
        }
    }
    let mut loadings = v.columns_mut(0, q).into_owned();
    linalg::fix_column_signs(&mut loadings);
    let mut sorted_subset = subset.to_vec();
    sorted_subset.sort_unstable();
    Ok(PcaModel {
        center,
        eigenvalues,
        loadings,
        subset: sorted_subset,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> DataMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
        DataMatrix::new(m).unwrap()
    }

    #[test]
    fn rejects_non_finite_and_tiny_shapes() {
        let bad = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, f64::NAN, 0.0, 1.0, 1.0]);
        assert!(matches!(DataMatrix::new(bad), Err(Error::InvalidInput(_))));
        let narrow = DMatrix::from_element(5, 1, 1.0);
        assert!(DataMatrix::new(narrow).is_err());
        let short = DMatrix::from_element(2, 3, 1.0);
        assert!(DataMatrix::new(short).is_err());
    }

    #[test]
    fn identical_rows_are_degenerate() {
        let m = DMatrix::from_fn(5, 3, |_, j| j as f64);
        let data = DataMatrix::new(m).unwrap();
        assert!(matches!(center_and_reduce(&data), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn three_rows_in_r5_reduce_to_rank_two() {
        let data = gaussian(3, 5, 7);
        let red = center_and_reduce(&data).unwrap();
        assert_eq!(red.rank, 2);
        assert_eq!(red.x.shape(), (3, 2));
        assert_eq!(red.basis.shape(), (5, 2));
        // orthonormal basis, exact reconstruction
        let g = red.basis.transpose() * &red.basis;
        assert_relative_eq!(g, DMatrix::identity(2, 2), epsilon = 1e-10);
        assert_relative_eq!(red.reconstruct(), *data.values(), epsilon = 1e-10);
    }

    #[test]
    fn full_rank_tall_data_is_left_alone() {
        let data = gaussian(40, 6, 1);
        let red = center_and_reduce(&data).unwrap();
        assert_eq!(red.rank, 6);
        assert_eq!(red.basis, DMatrix::identity(6, 6));
        // pairwise distances are those of the centered data trivially here,
        // but check the Gram matrix anyway (the invariant the search relies on)
        let g1 = &red.x * red.x.transpose();
        let mean = linalg::column_means(data.values());
        let mut c = data.values().clone();
        for i in 0..40 {
            for j in 0..6 {
                c[(i, j)] -= mean[j];
            }
        }
        let g2 = &c * c.transpose();
        assert_relative_eq!(g1, g2, epsilon = 1e-8);
    }

    #[test]
    fn gram_matrix_preserved_under_reduction() {
        let data = gaussian(12, 30, 3);
        let red = center_and_reduce(&data).unwrap();
        assert_eq!(red.rank, 11);
        let mean = linalg::column_means(data.values());
        let mut c = data.values().clone();
        for i in 0..12 {
            for j in 0..30 {
                c[(i, j)] -= mean[j];
            }
        }
        let g_orig = &c * c.transpose();
        let g_red = &red.x * red.x.transpose();
        assert_relative_eq!(g_red, g_orig, epsilon = 1e-8 * g_orig.norm());
    }

    /// Working eigenvalues match the nonzero sample-covariance eigenvalues
    /// computed independently in the original space.
    #[test]
    fn reduced_spectrum_matches_covariance_oracle() {
        let n = 50;
        let p = 200;
        let data = gaussian(n, p, 11);
        let red = center_and_reduce(&data).unwrap();
        assert_eq!(red.rank, n - 1);
        // X'X / (n-1) spectrum
        let xtx = red.x.transpose() * &red.x / (n as f64 - 1.0);
        let (vals_red, _) = linalg::symmetric_eigen_sorted(&xtx);
        // oracle: p x p sample covariance, eigenvalues via the same backend but
        // on the untouched original data
        let mean = linalg::column_means(data.values());
        let mut c = data.values().clone();
        for i in 0..n {
            for j in 0..p {
                c[(i, j)] -= mean[j];
            }
        }
        let cov = c.transpose() * &c / (n as f64 - 1.0);
        let (vals_cov, _) = linalg::symmetric_eigen_sorted(&cov);
        for j in 0..red.rank {
            assert_relative_eq!(vals_red[j], vals_cov[j], epsilon = 1e-8, max_relative = 1e-8);
        }
    }

    #[test]
    fn re_reducing_reconstruction_gives_same_working_matrix() {
        let data = gaussian(10, 25, 5);
        let red = center_and_reduce(&data).unwrap();
        let back = DataMatrix::new(red.reconstruct()).unwrap();
        let red2 = center_and_reduce(&back).unwrap();
        assert_eq!(red2.rank, red.rank);
        // same up to column sign; signs are pinned by the convention, so the
        // matrices should agree directly
        assert_relative_eq!(red2.x, red.x, epsilon = 1e-10 * red.x.norm());
    }

    #[test]
    fn subset_fit_matches_sample_covariance_on_full_subset() {
        let n = 30;
        let data = gaussian(n, 4, 9);
        let all: Vec<usize> = (0..n).collect();
        let model =
            pca_fit_on_subset(data.values(), &all, 4, ((n - 1) as f64).sqrt(), FitMethod::Classical).unwrap();
        let mean = linalg::column_means(data.values());
        let mut c = data.values().clone();
        for i in 0..n {
            for j in 0..4 {
                c[(i, j)] -= mean[j];
            }
        }
        let cov = c.transpose() * &c / (n as f64 - 1.0);
        let (vals, _) = linalg::symmetric_eigen_sorted(&cov);
        for j in 0..4 {
            assert_relative_eq!(model.eigenvalues[j], vals[j], epsilon = 1e-8, max_relative = 1e-8);
        }
        // orthonormal loadings
        let g = model.loadings.transpose() * &model.loadings;
        assert_relative_eq!(g, DMatrix::identity(4, 4), epsilon = 1e-10);
    }

    #[test]
    fn collinear_subset_gives_zero_trailing_eigenvalue() {
        // points on the line t * (1, 2, 2)/3 + noise-free
        let dir = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        let mut rows = Vec::new();
        for t in 0..6 {
            for d in &dir {
                rows.push(t as f64 * d);
            }
        }
        let m = DMatrix::from_row_slice(6, 3, &rows);
        let model = pca_fit_on_subset(&m, &[0, 1, 2, 3, 4, 5], 2, (5.0f64).sqrt(), FitMethod::Classical).unwrap();
        assert!(model.eigenvalues[0] > 0.0);
        assert!(model.eigenvalues[1].abs() < 1e-12);
        // first loading parallel to the line (sign fixed to positive entries)
        for (a, b) in model.loadings.column(0).iter().zip(dir.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        // second loading still unit length and orthogonal
        assert_relative_eq!(model.loadings.column(1).norm(), 1.0, epsilon = 1e-10);
        assert!(model.loadings.column(0).dot(&model.loadings.column(1)).abs() < 1e-10);
    }

    #[test]
    fn subset_too_small_is_rejected() {
        let data = gaussian(10, 4, 2);
        let err = pca_fit_on_subset(data.values(), &[0, 1], 2, 1.0, FitMethod::Classical);
        assert!(matches!(err, Err(Error::SubsetTooSmall { need: 3, got: 2 })));
    }

    /// Rotating the data rotates the loadings and fixes the eigenvalues: fit
    /// on rotated data, rotate the loadings back, compare up to column sign.
    #[test]
    fn subset_fit_is_rotation_equivariant() {
        let n = 25;
        let data = gaussian(n, 4, 13);
        let all: Vec<usize> = (0..n).collect();
        let scale = ((n - 1) as f64).sqrt();
        let base = pca_fit_on_subset(data.values(), &all, 3, scale, FitMethod::Classical).unwrap();

        // a fixed rotation from the QR of a deterministic matrix
        let seed_mat = DMatrix::from_fn(4, 4, |i, j| ((i * 4 + j) as f64 * 0.7).sin() + if i == j { 2.0 } else { 0.0 });
        let rot = seed_mat.qr().q();
        let rotated = data.values() * &rot;
        let fit_rot = pca_fit_on_subset(&rotated, &all, 3, scale, FitMethod::Classical).unwrap();

        for j in 0..3 {
            assert_relative_eq!(fit_rot.eigenvalues[j], base.eigenvalues[j], max_relative = 1e-8);
        }
        let back = &rot * &fit_rot.loadings; // rotate loadings back
        for j in 0..3 {
            let col_back = back.column(j);
            let col_base = base.loadings.column(j);
            let dot = col_back.dot(&col_base);
            assert_relative_eq!(dot.abs(), 1.0, epsilon = 1e-8);
        }
    }
}
