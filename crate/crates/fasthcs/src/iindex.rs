//! Incremental subset search driven by hyperplane congruence.
//!
//! The search looks for an h-subset of rows, h = ⌈(n + q + 1)/2⌉, on which a
//! q-component fit is unaffected by contamination. Each of M candidate runs
//! starts from q + 1 random rows, fits q components to them, and scores every
//! observation against K random hyperplanes drawn through q of the starting
//! points in score space: the hyperplane through scores s_{i_1} .. s_{i_q}
//! solves s_{i_j}·a = 1, and the squared distance of any score z to it is
//! (z·a − 1)² / ‖a‖². Observations congruent with the starting subset sit
//! close to those hyperplanes relative to the subset itself, so the candidate
//! grows by repeatedly keeping the rows with the smallest average distance
//! ratio until it reaches size h.
//!
//! Candidates are compared by the incongruence index
//!
//!   I(H) = (1/K) Σ_k ln( mean_{i∈H} d²_{ik} / mean_{i∈H*_k} d²_{ik} ),
//!
//! where H*_k collects the h smallest d² for direction k. Each term is
//! nonnegative because the denominator is the best achievable h-subset mean
//! for that direction; I(H) = 0 means H is simultaneously optimal for every
//! direction. The candidate with the smallest index wins (ties go to the
//! lowest candidate number) and is refitted on the full-dimensional rows.
//!
//! Rows lying exactly on a q-dimensional flat are a special case: distances
//! degenerate to 0/0 and the index carries no signal. Candidates therefore
//! check, right after the starting fit, whether at least h rows have zero
//! residual against the starting fit's span; if so the candidate returns the
//! h rows with the smallest residuals and an index of exactly 0, which
//! outranks every regular candidate and flags the exact fit to the caller.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::reduce::{pca_fit_on_subset, FitMethod, PcaModel, ReducedBasis};

/// Candidate m draws from stream CANDIDATE_STREAM_BASE + m, keeping the
/// search's randomness disjoint from every other consumer of the master seed.
const CANDIDATE_STREAM_BASE: u64 = 1 << 32;

/// A starting fit is unusable when its q-th eigenvalue vanishes relative to
/// the first, meaning the q + 1 points span fewer than q directions.
const RANK_RTOL: f64 = 1e-12;

/// Acceptance threshold for |s·a − 1| after solving a hyperplane system.
const DIRECTION_RESIDUAL_TOL: f64 = 1e-8;

/// Cheap screening tolerance for the exact-fit check: squared residual
/// estimates below 1e-8 × trace(L₀) are verified directly.
const EXACT_FIT_SCREEN_RTOL: f64 = 1e-8;

/// A row counts as exactly on the candidate's flat when its squared residual
/// is below 1e-12 × trace(L₀).
const EXACT_FIT_RTOL: f64 = 1e-12;

/// Contribution of a positive distance over a zero denominator during
/// growing: large enough to push the row to the back of every ordering,
/// small enough that sums of K of them stay finite.
const ZERO_DENOM_PENALTY: f64 = 1e300;

/// Hard limit on the number of starting subsets either mode may enumerate.
const MAX_CANDIDATES: u64 = u32::MAX as u64;

/// Tuning knobs for the subset search.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Number of components to fit; at least 2 and smaller than both the
    /// number of rows and the number of columns.
    pub q: usize,
    /// Assumed number of uncontaminated rows, used to size the random design
    /// so that at least one all-clean start is drawn with probability 0.99.
    /// Must satisfy h ≤ e < n; defaults to h, the most conservative choice.
    pub e: Option<usize>,
    /// Hyperplane directions scored per candidate (K).
    pub directions_per_candidate: usize,
    /// Number of enlargements from q + 1 rows to h (W).
    pub growing_steps: usize,
    /// Master seed; every candidate derives an independent stream from it.
    pub seed: u64,
    /// Redraw budget for degenerate starting subsets and for singular
    /// hyperplane systems.
    pub max_resample: usize,
    /// Evaluate every (q + 1)-subset in lexicographic order instead of the
    /// random design. Only feasible for tiny n; meant for cross-checks.
    pub exhaustive: bool,
}

impl SearchConfig {
    /// Defaults for everything but `q` and `seed`: e = h, K = 25, W = 5,
    /// 50 redraws, random design.
    pub fn new(q: usize, seed: u64) -> Self {
        Self {
            q,
            e: None,
            directions_per_candidate: 25,
            growing_steps: 5,
            seed,
            max_resample: 50,
            exhaustive: false,
        }
    }
}

/// The winning subset and its full-dimensional refit.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Fit of the winning h rows in the original coordinates, eigenvalues
    /// normalized by h − 1.
    pub model: PcaModel,
    /// Winning rows, sorted ascending, length h.
    pub subset: Vec<usize>,
    /// Incongruence index of the winner; exactly 0.0 when the winner's rows
    /// lie on a q-dimensional flat.
    pub i_value: f64,
    /// Which candidate won, `None` when every candidate collapsed and the
    /// subset came from the degenerate-data rescue fit.
    pub winner_index: Option<usize>,
}

/// Target subset size h = ⌈(n + q + 1)/2⌉.
pub fn subset_size_h(n: usize, q: usize) -> usize {
    (n + q + 1).div_ceil(2)
}

/// Number of starting subsets M = ⌈ln(0.01) / ln(1 − (e/n)^{q+1})⌉: the
/// smallest design in which, with e of the n rows clean, at least one start
/// is entirely clean with probability 0.99.
pub fn num_starting_subsets(n: usize, q: usize, e: usize) -> Result<usize> {
    let frac = (e as f64 / n as f64).powi(q as i32 + 1);
    let m = (0.01f64.ln() / (1.0 - frac).ln()).ceil();
    if !m.is_finite() || m < 1.0 || m > MAX_CANDIDATES as f64 {
        return Err(Error::InvalidConfig(format!(
            "design needs {m:.2e} starting subsets for n = {n}, q = {q}, e = {e}; \
             raise e or lower q"
        )));
    }
    Ok(m as usize)
}

/// Subset sizes visited by the growing steps: ω_w = ⌈(n − q − 1)w / (2W)⌉ +
/// q + 1 for w = 1..W. The last size always equals h.
pub fn growing_sizes(n: usize, q: usize, steps: usize) -> Vec<usize> {
    (1..=steps)
        .map(|w| ((n - q - 1) * w).div_ceil(2 * steps) + q + 1)
        .collect()
}

/// The random stream candidate `m` draws from, given the master seed.
pub fn candidate_rng(seed: u64, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(CANDIDATE_STREAM_BASE + m as u64);
    rng
}

/// Draw q + 1 distinct row indices, sorted ascending.
pub fn starting_subset(rng: &mut ChaCha8Rng, n: usize, q: usize) -> Vec<usize> {
    let mut subset = index::sample(rng, n, q + 1).into_vec();
    subset.sort_unstable();
    subset
}

fn fit_is_degenerate(model: &PcaModel) -> bool {
    let l1 = model.eigenvalues[0];
    let lq = model.eigenvalues[model.q() - 1];
    lq <= l1 * model.subset.len() as f64 * RANK_RTOL
}

/// Scores of every row against a model fitted in the same coordinates:
/// row i of the result is (x_i − center)ᵀ P, length q.
fn compute_scores(x: &DMatrix<f64>, model: &PcaModel) -> DMatrix<f64> {
    let (n, d) = x.shape();
    let q = model.q();
    let mut scores = DMatrix::zeros(n, q);
    for i in 0..n {
        for k in 0..q {
            let mut acc = 0.0;
            for j in 0..d {
                acc += (x[(i, j)] - model.center[j]) * model.loadings[(j, k)];
            }
            scores[(i, k)] = acc;
        }
    }
    scores
}

/// Solve for the hyperplane {z : z·a = 1} through q of the q + 1 starting
/// scores, redrawing the q rows while the system is singular or inaccurate.
/// Returns the normal and its squared norm.
fn draw_direction(
    rng: &mut ChaCha8Rng,
    start_scores: &DMatrix<f64>,
    q: usize,
    max_resample: usize,
) -> Option<(DVector<f64>, f64)> {
    let rhs = DVector::from_element(q, 1.0);
    for _ in 0..max_resample {
        let picked = index::sample(rng, q + 1, q);
        let mut system = DMatrix::zeros(q, q);
        for (row, i) in picked.iter().enumerate() {
            for c in 0..q {
                system[(row, c)] = start_scores[(i, c)];
            }
        }
        if let Some(a) = system.clone().lu().solve(&rhs) {
            let residual = (&system * &a - &rhs).amax();
            let norm2 = a.norm_squared();
            if residual <= DIRECTION_RESIDUAL_TOL && norm2 > 0.0 {
                return Some((a, norm2));
            }
        }
    }
    None
}

/// Squared distances of every score row to the hyperplane (a, ‖a‖²),
/// written into column k of d².
fn fill_squared_distances(
    d2: &mut DMatrix<f64>,
    k: usize,
    scores: &DMatrix<f64>,
    a: &DVector<f64>,
    norm2: f64,
) {
    let q = scores.ncols();
    for i in 0..scores.nrows() {
        let mut dot = 0.0;
        for c in 0..q {
            dot += scores[(i, c)] * a[c];
        }
        let dev = dot - 1.0;
        d2[(i, k)] = dev * dev / norm2;
    }
}

/// One enlargement: rank all rows by their average distance ratio against
/// the current subset and keep the `target` best. Ratios are 0 for 0/0 and
/// a large finite penalty for positive-over-zero, so rows collinear with a
/// degenerate denominator never crowd out genuinely close rows.
fn growing_step(d2: &DMatrix<f64>, current: &[usize], target: usize) -> Vec<usize> {
    let (n, k) = d2.shape();
    let mut denom = vec![0.0; k];
    for (kk, d) in denom.iter_mut().enumerate() {
        let mut acc = 0.0;
        for &j in current {
            acc += d2[(j, kk)];
        }
        *d = acc / current.len() as f64;
    }
    let mut ranked: Vec<(f64, usize)> = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (kk, &den) in denom.iter().enumerate() {
                let num = d2[(i, kk)];
                if den > 0.0 {
                    acc += num / den;
                } else if num > 0.0 {
                    acc += ZERO_DENOM_PENALTY;
                }
            }
            (acc / k as f64, i)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut next: Vec<usize> = ranked[..target].iter().map(|&(_, i)| i).collect();
    next.sort_unstable();
    next
}

/// Incongruence index of a subset: per direction, the log of the subset's
/// mean squared distance over the smallest achievable h-row mean, averaged
/// over directions. 0/0 terms contribute 0; a positive mean over a zero
/// optimum makes the index +∞.
fn i_index(d2: &DMatrix<f64>, subset: &[usize], h: usize) -> f64 {
    let (n, k) = d2.shape();
    let mut total = 0.0;
    let mut column = vec![0.0; n];
    for kk in 0..k {
        let mut num = 0.0;
        for &i in subset {
            num += d2[(i, kk)];
        }
        num /= subset.len() as f64;
        for i in 0..n {
            column[i] = d2[(i, kk)];
        }
        column.sort_by(f64::total_cmp);
        let mut den = 0.0;
        for v in &column[..h] {
            den += v;
        }
        den /= h as f64;
        if den > 0.0 {
            total += (num / den).ln().max(0.0);
        } else if num > 0.0 {
            return f64::INFINITY;
        }
    }
    total / k as f64
}

struct Candidate {
    subset: Vec<usize>,
    i_value: f64,
}

/// If at least h rows lie exactly on the starting fit's q-flat, return the h
/// of them with the smallest residuals. Screens with the cheap estimate
/// ‖x − t‖² − ‖s‖² before computing any residual vector.
fn exact_fit_subset(
    x: &DMatrix<f64>,
    model: &PcaModel,
    scores: &DMatrix<f64>,
    h: usize,
) -> Option<Vec<usize>> {
    let (n, d) = x.shape();
    let q = model.q();
    let trace: f64 = model.eigenvalues.iter().sum();
    let screen_tol = EXACT_FIT_SCREEN_RTOL * trace;
    let mut screened = 0usize;
    for i in 0..n {
        let mut norm2 = 0.0;
        for j in 0..d {
            let dx = x[(i, j)] - model.center[j];
            norm2 += dx * dx;
        }
        let mut s2 = 0.0;
        for kk in 0..q {
            s2 += scores[(i, kk)] * scores[(i, kk)];
        }
        if (norm2 - s2).max(0.0) <= screen_tol {
            screened += 1;
        }
    }
    if screened < h {
        return None;
    }
    // Screen passed; verify with the actual residual vectors, which are
    // immune to the cancellation the estimate suffers from.
    let tol = EXACT_FIT_RTOL * trace;
    let mut on_flat: Vec<(f64, usize)> = Vec::new();
    for i in 0..n {
        let mut res2 = 0.0;
        for j in 0..d {
            let mut proj = 0.0;
            for kk in 0..q {
                proj += model.loadings[(j, kk)] * scores[(i, kk)];
            }
            let r = (x[(i, j)] - model.center[j]) - proj;
            res2 += r * r;
        }
        if res2 <= tol {
            on_flat.push((res2, i));
        }
    }
    if on_flat.len() < h {
        return None;
    }
    on_flat.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut subset: Vec<usize> = on_flat[..h].iter().map(|&(_, i)| i).collect();
    subset.sort_unstable();
    Some(subset)
}

/// Run one candidate end to end. `fixed_start` supplies the starting subset
/// in exhaustive mode; otherwise starts are drawn (and degenerate ones
/// redrawn) from the candidate's stream. Returns None when no usable start
/// or direction could be produced within the resample budget.
fn evaluate_candidate(
    x: &DMatrix<f64>,
    h: usize,
    cfg: &SearchConfig,
    m: usize,
    fixed_start: Option<&[usize]>,
) -> Option<Candidate> {
    let n = x.nrows();
    let q = cfg.q;
    let scale = (q as f64).sqrt();
    let mut rng = candidate_rng(cfg.seed, m);

    let (start, base) = if let Some(start) = fixed_start {
        let model = pca_fit_on_subset(x, start, q, scale, FitMethod::IIndex).ok()?;
        if fit_is_degenerate(&model) {
            return None;
        }
        (start.to_vec(), model)
    } else {
        let mut found = None;
        for _ in 0..cfg.max_resample {
            let start = starting_subset(&mut rng, n, q);
            let model = pca_fit_on_subset(x, &start, q, scale, FitMethod::IIndex).ok()?;
            if !fit_is_degenerate(&model) {
                found = Some((start, model));
                break;
            }
        }
        found?
    };

    let scores = compute_scores(x, &base);
    if let Some(subset) = exact_fit_subset(x, &base, &scores, h) {
        return Some(Candidate { subset, i_value: 0.0 });
    }

    let mut start_scores = DMatrix::zeros(q + 1, q);
    for (row, &i) in start.iter().enumerate() {
        for c in 0..q {
            start_scores[(row, c)] = scores[(i, c)];
        }
    }
    let k = cfg.directions_per_candidate;
    let mut d2 = DMatrix::zeros(n, k);
    for kk in 0..k {
        let (a, norm2) = draw_direction(&mut rng, &start_scores, q, cfg.max_resample)?;
        fill_squared_distances(&mut d2, kk, &scores, &a, norm2);
    }

    let mut current = start;
    for target in growing_sizes(n, q, cfg.growing_steps) {
        current = growing_step(&d2, &current, target);
    }
    debug_assert_eq!(current.len(), h);
    let i_value = i_index(&d2, &current, h);
    Some(Candidate { subset: current, i_value })
}

fn validate(cfg: &SearchConfig, n: usize, p: usize) -> Result<(usize, usize)> {
    if cfg.q < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least two components, got q = {}",
            cfg.q
        )));
    }
    if cfg.q + 1 >= n {
        return Err(Error::InvalidConfig(format!(
            "q = {} needs at least q + 2 = {} rows, got {n}",
            cfg.q,
            cfg.q + 2
        )));
    }
    if cfg.q >= p {
        return Err(Error::InvalidConfig(format!(
            "q = {} must be smaller than the number of columns, {p}",
            cfg.q
        )));
    }
    if cfg.directions_per_candidate == 0 || cfg.growing_steps == 0 || cfg.max_resample == 0 {
        return Err(Error::InvalidConfig(
            "directions, growing steps, and the resample budget must be positive".into(),
        ));
    }
    let h = subset_size_h(n, cfg.q);
    let e = cfg.e.unwrap_or(h);
    if e < h || e >= n {
        return Err(Error::InvalidConfig(format!(
            "e must satisfy h = {h} ≤ e < n = {n}, got {e}"
        )));
    }
    Ok((h, e))
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

fn enumerate_subsets(n: usize, k: usize) -> Result<Vec<Vec<usize>>> {
    const MAX_EXHAUSTIVE: u64 = 1_000_000;
    match binomial(n, k) {
        Some(count) if count <= MAX_EXHAUSTIVE => {}
        _ => {
            return Err(Error::InvalidConfig(format!(
                "exhaustive mode over C({n}, {k}) subsets is not feasible"
            )));
        }
    }
    let mut subsets = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        subsets.push(current.clone());
        // advance to the next combination in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(subsets);
            }
            i -= 1;
            if current[i] != i + n - k {
                break;
            }
        }
        current[i] += 1;
        for j in i + 1..k {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Find the h-subset with the smallest incongruence index and refit it in
/// the original coordinates. Candidates run in parallel but are reduced in
/// candidate order, so results are identical for any thread count.
///
/// When every candidate collapses (each start degenerate beyond the resample
/// budget), the data itself is suspected of lying on a low-dimensional flat:
/// a q-component fit of all rows is probed, and if at least h rows have zero
/// residual against it the search returns those rows exactly as an exact-fit
/// candidate would. Otherwise the input is reported as degenerate.
pub fn search(reduced: &ReducedBasis, cfg: &SearchConfig) -> Result<SearchOutcome> {
    let x = &reduced.x;
    let n = x.nrows();
    let p = reduced.basis.nrows();
    let (h, e) = validate(cfg, n, p)?;

    let candidates: Vec<Option<Candidate>> = if cfg.exhaustive {
        let starts = enumerate_subsets(n, cfg.q + 1)?;
        starts
            .par_iter()
            .enumerate()
            .map(|(m, start)| evaluate_candidate(x, h, cfg, m, Some(start)))
            .collect()
    } else {
        let total = num_starting_subsets(n, cfg.q, e)?;
        (0..total)
            .into_par_iter()
            .map(|m| evaluate_candidate(x, h, cfg, m, None))
            .collect()
    };

    let mut best: Option<(usize, &Candidate)> = None;
    for (m, candidate) in candidates.iter().enumerate() {
        if let Some(c) = candidate {
            let better = match best {
                None => true,
                Some((_, b)) => c.i_value.total_cmp(&b.i_value) == Ordering::Less,
            };
            if better {
                best = Some((m, c));
            }
        }
    }

    let y = reduced.reconstruct();
    let final_scale = ((h - 1) as f64).sqrt();
    if let Some((m, c)) = best {
        let model = pca_fit_on_subset(&y, &c.subset, cfg.q, final_scale, FitMethod::IIndex)?;
        return Ok(SearchOutcome {
            model,
            subset: c.subset.clone(),
            i_value: c.i_value,
            winner_index: Some(m),
        });
    }

    // Degenerate-data rescue: fit all rows and look for an exact flat.
    let all: Vec<usize> = (0..n).collect();
    let probe = pca_fit_on_subset(&y, &all, cfg.q, ((n - 1) as f64).sqrt(), FitMethod::IIndex)?;
    let probe_scores = compute_scores(&y, &probe);
    if let Some(subset) = exact_fit_subset(&y, &probe, &probe_scores, h) {
        let model = pca_fit_on_subset(&y, &subset, cfg.q, final_scale, FitMethod::IIndex)?;
        return Ok(SearchOutcome { model, subset, i_value: 0.0, winner_index: None });
    }
    Err(Error::DegenerateInput(
        "no starting subset of q + 1 rows spans q directions; \
         the data have too little variation for the requested q"
            .into(),
    ))
}
