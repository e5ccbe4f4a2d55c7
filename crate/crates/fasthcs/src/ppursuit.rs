//! Projection-pursuit outlyingness and the fallback h-subset.
//!
//! Each observation is scored by the largest robustly standardized deviation
//! of its projections over a set of random directions,
//!
//!   o_i = max_v |y_i·v − med_j(y_j·v)| / MAD_j(y_j·v),
//!
//! where every direction v is the difference of two distinct rows, and MAD
//! is the raw median absolute deviation (no consistency factor — it cancels
//! in the ranking). Observations far from the bulk in *any* sampled
//! direction score high regardless of how the outliers are arranged, which
//! is exactly the complementary strength the subset search lacks: rows whose
//! projections look ordinary inside the fitted subspace but sit far outside
//! it still produce extreme projections along directions pointing at them.
//!
//! The h rows with the smallest scores form H^PP, refitted in the original
//! coordinates like the search winner.

use nalgebra::DMatrix;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::iindex::subset_size_h;
use crate::reduce::{pca_fit_on_subset, FitMethod, PcaModel, ReducedBasis};

/// Direction k draws from stream DIRECTION_STREAM_BASE + k, disjoint from
/// the subset search's candidate streams.
const DIRECTION_STREAM_BASE: u64 = 2 << 32;

/// Tuning knobs for the projection-pursuit scoring.
#[derive(Debug, Clone)]
pub struct PPConfig {
    /// Number of random projection directions.
    pub n_directions: usize,
    /// Master seed; each direction derives an independent stream.
    pub seed: u64,
    /// Redraw budget when a drawn row pair coincides (zero direction). A
    /// direction whose budget is exhausted is skipped.
    pub max_resample: usize,
}

impl PPConfig {
    /// Defaults: 1000 directions, 50 redraws.
    pub fn new(seed: u64) -> Self {
        Self { n_directions: 1000, seed, max_resample: 50 }
    }
}

/// Outlyingness of one direction's projections: |z_i − med| / MAD, with a
/// zero MAD sending positive deviations to +∞ and exact-median points to 0.
fn direction_outlyingness(projections: &[f64]) -> Vec<f64> {
    let med = crate::stats::median(projections);
    let deviations: Vec<f64> = projections.iter().map(|z| (z - med).abs()).collect();
    let mad = crate::stats::median(&deviations);
    deviations
        .iter()
        .map(|&dev| {
            if mad > 0.0 {
                dev / mad
            } else if dev > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .collect()
}

/// Score every row of `y` by its maximal standardized projection deviation
/// over `cfg.n_directions` random difference-of-rows directions. Directions
/// are evaluated in parallel and reduced in a fixed order, so results do not
/// depend on the number of worker threads.
pub fn pp_outlyingness(y: &DMatrix<f64>, cfg: &PPConfig) -> Result<Vec<f64>> {
    let (n, p) = y.shape();
    if n < 3 {
        return Err(Error::InvalidInput(format!("need at least 3 rows, got {n}")));
    }
    if cfg.n_directions == 0 || cfg.max_resample == 0 {
        return Err(Error::InvalidConfig(
            "direction count and resample budget must be positive".into(),
        ));
    }

    let per_direction: Vec<Option<Vec<f64>>> = (0..cfg.n_directions)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(DIRECTION_STREAM_BASE + k as u64);
            // draw two distinct rows whose difference is nonzero
            let mut direction: Option<Vec<f64>> = None;
            for _ in 0..cfg.max_resample {
                let pair = index::sample(&mut rng, n, 2);
                let (a, b) = (pair.index(0), pair.index(1));
                let v: Vec<f64> = (0..p).map(|j| y[(a, j)] - y[(b, j)]).collect();
                if v.iter().any(|&c| c != 0.0) {
                    direction = Some(v);
                    break;
                }
            }
            let v = direction?;
            let projections: Vec<f64> = (0..n)
                .map(|i| {
                    let mut acc = 0.0;
                    for j in 0..p {
                        acc += y[(i, j)] * v[j];
                    }
                    acc
                })
                .collect();
            Some(direction_outlyingness(&projections))
        })
        .collect();

    let mut scores = vec![0.0f64; n];
    for column in per_direction.into_iter().flatten() {
        for (s, o) in scores.iter_mut().zip(column) {
            if o > *s {
                *s = o;
            }
        }
    }
    Ok(scores)
}

/// Build H^PP — the h rows with the smallest outlyingness, ties broken by
/// index — and fit q components to them in the original coordinates.
pub fn pp_subset_and_fit(
    reduced: &ReducedBasis,
    q: usize,
    cfg: &PPConfig,
) -> Result<(Vec<usize>, PcaModel)> {
    let n = reduced.x.nrows();
    // scores are computed on the working coordinates: the reduction is an
    // isometry of the rows, so projections onto difference directions agree
    // with the full-space ones
    let scores = pp_outlyingness(&reduced.x, cfg)?;
    let h = subset_size_h(n, q);
    let mut ranked: Vec<(f64, usize)> =
        scores.iter().copied().zip(0..n).collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut subset: Vec<usize> = ranked[..h].iter().map(|&(_, i)| i).collect();
    subset.sort_unstable();

    let y = reduced.reconstruct();
    let model = pca_fit_on_subset(
        &y,
        &subset,
        q,
        ((h - 1) as f64).sqrt(),
        FitMethod::ProjectionPursuit,
    )?;
    Ok((subset, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::{center_and_reduce, DataMatrix};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, sigma: &[f64], seed: u64) -> DMatrix<f64> {
        let p = sigma.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, j| sigma[j].sqrt() * rng.sample::<f64, _>(StandardNormal))
    }

    /// Eleven collinear points embedded in R³: every direction reduces to
    /// the same 1-dim problem, where median = 5 and MAD = 3, so the scores
    /// are |t − 5|/3 exactly.
    #[test]
    fn collinear_points_match_scalar_oracle() {
        let u = [1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0];
        let mut rows = Vec::new();
        for t in 0..=10 {
            for c in &u {
                rows.push(t as f64 * c);
            }
        }
        let y = DMatrix::from_row_slice(11, 3, &rows);
        let scores = pp_outlyingness(&y, &PPConfig::new(4)).unwrap();
        for (t, s) in scores.iter().enumerate() {
            assert_relative_eq!(s, &((t as f64 - 5.0).abs() / 3.0), epsilon = 1e-10);
        }
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        assert_relative_eq!(max, 5.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(scores[0], 5.0 / 3.0, epsilon = 1e-10);
        assert_relative_eq!(scores[10], 5.0 / 3.0, epsilon = 1e-10);
    }

    #[test]
    fn shift_leaves_scores_unchanged() {
        let y = gaussian(30, &[4.0, 1.0, 0.5, 0.5], 8);
        let cfg = PPConfig { n_directions: 200, ..PPConfig::new(2) };
        let base = pp_outlyingness(&y, &cfg).unwrap();
        let mut shifted = y.clone();
        let b = [100.0, -3.5, 0.25, 7.0];
        for i in 0..30 {
            for j in 0..4 {
                shifted[(i, j)] += b[j];
            }
        }
        let moved = pp_outlyingness(&shifted, &cfg).unwrap();
        for (a, m) in base.iter().zip(&moved) {
            assert_relative_eq!(a, m, epsilon = 1e-9, max_relative = 1e-9);
        }
    }

    /// Rotating the data rotates the difference directions with it, so
    /// projections — and the scores — are preserved.
    #[test]
    fn rotation_preserves_scores_and_ranking() {
        let y = gaussian(25, &[3.0, 2.0, 1.0, 0.5, 0.5], 6);
        let seed_mat = DMatrix::from_fn(5, 5, |i, j| {
            ((i * 5 + j) as f64 * 1.3).cos() + if i == j { 2.0 } else { 0.0 }
        });
        let rot = seed_mat.qr().q();
        let rotated = &y * &rot;
        let cfg = PPConfig { n_directions: 300, ..PPConfig::new(9) };
        let base = pp_outlyingness(&y, &cfg).unwrap();
        let turned = pp_outlyingness(&rotated, &cfg).unwrap();
        for (a, b) in base.iter().zip(&turned) {
            assert_relative_eq!(a, b, epsilon = 1e-8, max_relative = 1e-8);
        }
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]).then_with(|| i.cmp(&j)));
            idx
        };
        assert_eq!(rank(&base), rank(&turned));
    }

    #[test]
    fn duplicate_rows_trigger_mad_zero_rules() {
        // four identical rows and one distinct: along any usable direction
        // the deviations are (0,0,0,0,positive), so MAD = 0; the distinct
        // row must score +inf, the duplicates 0
        let mut rows = vec![1.0, 2.0, 3.0].repeat(4);
        rows.extend_from_slice(&[4.0, -1.0, 0.0]);
        let y = DMatrix::from_row_slice(5, 3, &rows);
        let scores = pp_outlyingness(&y, &PPConfig::new(3)).unwrap();
        for s in &scores[..4] {
            assert_eq!(*s, 0.0);
        }
        assert_eq!(scores[4], f64::INFINITY);
    }

    /// One row a million units from a tight cloud: it must carry the
    /// strictly largest score in every one of 100 seeded runs.
    #[test]
    fn planted_far_outlier_is_always_most_outlying() {
        for seed in 0..100u64 {
            let mut y = gaussian(20, &[1.0, 1.0, 1.0], 500 + seed);
            y[(7, 0)] = 1.0e6;
            y[(7, 1)] = -1.0e6;
            y[(7, 2)] = 0.5e6;
            let cfg = PPConfig { n_directions: 100, ..PPConfig::new(seed) };
            let scores = pp_outlyingness(&y, &cfg).unwrap();
            let (argmax, _) = scores
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            assert_eq!(argmax, 7, "seed {seed}: outlier not ranked first");
            for (i, s) in scores.iter().enumerate() {
                if i != 7 {
                    assert!(s < &scores[7], "seed {seed}: row {i} ties the outlier");
                }
            }
        }
    }

    /// Exploding contamination at the largest count that still admits a
    /// clean h-subset (n − h rows replaced): the subset must avoid every
    /// replaced row and the fitted spread must stay at the clean scale.
    #[test]
    fn explosion_at_subset_boundary_is_resisted() {
        let n = 100;
        let q = 3;
        let sigma = [5.0, 3.0, 2.0, 1.0, 1.0, 1.0];
        let h = subset_size_h(n, q);
        let replaced = n - h; // 48
        for seed in [1u64, 2, 3, 4, 5] {
            let clean = gaussian(n, &sigma, seed);
            let all: Vec<usize> = (0..n).collect();
            let clean_fit = pca_fit_on_subset(
                &clean,
                &all,
                q,
                ((n - 1) as f64).sqrt(),
                FitMethod::Classical,
            )
            .unwrap();

            let mut contaminated = clean.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            for i in (n - replaced)..n {
                let dir: Vec<f64> = (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let norm = dir.iter().map(|c| c * c).sum::<f64>().sqrt();
                for j in 0..6 {
                    contaminated[(i, j)] = 1.0e9 * dir[j] / norm;
                }
            }
            let data = DataMatrix::new(contaminated).unwrap();
            let reduced = center_and_reduce(&data).unwrap();
            let (subset, model) = pp_subset_and_fit(&reduced, q, &PPConfig::new(seed)).unwrap();
            assert_eq!(subset.len(), h);
            assert!(
                subset.iter().all(|&i| i < n - replaced),
                "seed {seed}: replaced row in H^PP"
            );
            assert!(
                model.eigenvalues[0] < 10.0 * clean_fit.eigenvalues[0],
                "seed {seed}: spread exploded ({} vs clean {})",
                model.eigenvalues[0],
                clean_fit.eigenvalues[0]
            );
        }
    }

    #[test]
    fn scores_and_subset_are_bit_identical_across_thread_counts() {
        let y = gaussian(40, &[4.0, 2.0, 1.0, 0.5], 11);
        let data = DataMatrix::new(y.clone()).unwrap();
        let reduced = center_and_reduce(&data).unwrap();
        let cfg = PPConfig::new(21);
        let ref_scores = pp_outlyingness(&y, &cfg).unwrap();
        let (ref_subset, ref_model) = pp_subset_and_fit(&reduced, 2, &cfg).unwrap();
        for threads in [1usize, 2, 8] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let scores = pool.install(|| pp_outlyingness(&y, &cfg)).unwrap();
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&scores), bits(&ref_scores));
            let (subset, model) = pool.install(|| pp_subset_and_fit(&reduced, 2, &cfg)).unwrap();
            assert_eq!(subset, ref_subset);
            assert_eq!(
                bits(model.eigenvalues.as_slice()),
                bits(ref_model.eigenvalues.as_slice())
            );
        }
    }
}
