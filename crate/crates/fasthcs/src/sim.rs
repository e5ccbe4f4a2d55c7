//! Monte-Carlo contamination harness: generate datasets with a known
//! diagonal covariance and a planted fraction of outliers, fit both the
//! robust estimator and a classical baseline on the same draws, and measure
//! how far each fitted model strays from the truth.
//!
//! Outliers sit along the (q+1)-th eigenvector of the true covariance — the
//! direction just outside the fitted subspace — at a controlled distance ν,
//! either sharing the clean covariance (shift) or collapsed to a near-point
//! (point-mass). Three measures compare a fit against the truth: the shape
//! bias (log condition number of the truth-whitened fitted covariance,
//! restricted to the true q-dimensional subspace), and the maximal and total
//! subspace angles between fitted and true loadings.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::iindex::{search, subset_size_h, SearchConfig};
use crate::linalg;
use crate::ppursuit::{pp_subset_and_fit, PPConfig};
use crate::reduce::{center_and_reduce, pca_fit_on_subset, DataMatrix, FitMethod, PcaModel};
use crate::select::select_final;
use crate::stats;
use crate::svg::{LinearScale, SvgCanvas};

/// How the planted outliers are drawn around their common displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationKind {
    /// Outliers share the clean covariance, displaced as a group.
    Shift,
    /// Outliers collapse onto one point (covariance scaled by 1e-4).
    PointMass,
}

impl std::fmt::Display for ContaminationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ContaminationKind::Shift => "shift",
            ContaminationKind::PointMass => "point_mass",
        })
    }
}

/// One dataset recipe: dimensions, contamination fraction and distance.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Fraction of rows replaced by outliers, in [0, 0.5).
    pub epsilon: f64,
    /// Standardized distance of the nearest outlier, per the generator's
    /// min-Mahalanobis constraint.
    pub nu: f64,
    pub kind: ContaminationKind,
    pub seed: u64,
}

/// What the generator actually planted, for scoring fits against.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// Diagonal of the true covariance, descending.
    pub sigma_u: Vec<f64>,
    /// True loadings: the first q identity columns.
    pub pi_q: DMatrix<f64>,
    /// Per-row label, true marks an outlier.
    pub labels: Vec<bool>,
}

/// Measures of one fitted model on one replicate.
#[derive(Debug, Clone, Copy)]
pub struct ReplicateMeasures {
    pub bias_vq: f64,
    pub maxsub: f64,
    pub sumsub: f64,
    /// True when the fit itself failed and the sentinels above were
    /// substituted (bias +∞, maxsub π/2, sumsub 0).
    pub failed: bool,
}

/// True covariance diagonal: the first q Fibonacci numbers descending, then
/// a linear ramp from 0.1 down to 0.001 over the remaining p − q entries.
pub fn make_sigma_u(p: usize, q: usize) -> Vec<f64> {
    assert!(q >= 2 && p > q, "need p > q >= 2, got p = {p}, q = {q}");
    let mut fib = Vec::with_capacity(q);
    let (mut a, mut b) = (1u64, 1u64);
    for _ in 0..q {
        fib.push(a as f64);
        let next = a + b;
        a = b;
        b = next;
    }
    fib.reverse();
    let tail = p - q;
    for k in 0..tail {
        let t = if tail == 1 { 0.0 } else { k as f64 / (tail - 1) as f64 };
        fib.push(0.1 + (0.001 - 0.1) * t);
    }
    fib
}

fn standard_normal_row(rng: &mut ChaCha8Rng, p: usize) -> Vec<f64> {
    (0..p).map(|_| StandardNormal.sample(rng)).collect()
}

/// Generate a contaminated dataset with an explicit covariance diagonal.
/// Clean rows are centered Gaussian with that covariance; outlier rows are
/// displaced along the (q+1)-th coordinate axis until the closest one sits
/// at standardized distance ν, with covariance Σ^u (shift) or 1e-4·Σ^u
/// (point-mass). Clean rows come first.
pub fn generate_with_sigma(
    spec: &ContaminationSpec,
    sigma_u: &[f64],
) -> Result<(DataMatrix, GroundTruth)> {
    let (n, p, q) = (spec.n, spec.p, spec.q);
    if sigma_u.len() != p {
        return Err(Error::InvalidConfig(format!(
            "covariance diagonal has {} entries for p = {p}",
            sigma_u.len()
        )));
    }
    if !(q >= 2 && q < p) {
        return Err(Error::InvalidConfig(format!("need 2 <= q < p, got q = {q}, p = {p}")));
    }
    if !(0.0..0.5).contains(&spec.epsilon) {
        return Err(Error::InvalidConfig(format!(
            "contamination fraction must lie in [0, 0.5), got {}",
            spec.epsilon
        )));
    }
    if !(spec.nu > 0.0) {
        return Err(Error::InvalidConfig(format!("nu must be positive, got {}", spec.nu)));
    }
    let n_out = (spec.epsilon * n as f64).floor() as usize;
    let n_clean = n - n_out;
    let h = subset_size_h(n, q);
    if n_clean < h {
        return Err(Error::InvalidConfig(format!(
            "{n_clean} clean rows cannot cover the subset size h = {h}"
        )));
    }

    let sd: Vec<f64> = sigma_u.iter().map(|s| s.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows = DMatrix::zeros(n, p);
    for i in 0..n_clean {
        let z = standard_normal_row(&mut rng, p);
        for c in 0..p {
            rows[(i, c)] = sd[c] * z[c];
        }
    }
    if n_out > 0 {
        let noise_scale = match spec.kind {
            ContaminationKind::Shift => 1.0,
            ContaminationKind::PointMass => 1e-2, // covariance 1e-4·Σ^u
        };
        let mut noise = vec![vec![0.0; p]; n_out];
        for w in noise.iter_mut() {
            let z = standard_normal_row(&mut rng, p);
            for c in 0..p {
                w[c] = noise_scale * sd[c] * z[c];
            }
        }
        let chi = stats::chi2_quantile(0.975, p as f64);
        // standardized distance of the nearest outlier when the group sits
        // at displacement d along coordinate q
        let achieved = |d: f64| -> f64 {
            noise
                .iter()
                .map(|w| {
                    let mut m = 0.0;
                    for c in 0..p {
                        let x = if c == q { d + w[c] } else { w[c] };
                        m += x * x / sigma_u[c];
                    }
                    (m / chi).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        };
        if achieved(0.0) > spec.nu {
            return Err(Error::Generation(format!(
                "nu = {} is below the distance the outlier noise already attains",
                spec.nu
            )));
        }
        let mut lo = 0.0;
        let mut hi = spec.nu * (sigma_u[q] * chi).sqrt() + 1.0;
        while achieved(hi) < spec.nu {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Generation("displacement search diverged".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if achieved(mid) < spec.nu {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let d = 0.5 * (lo + hi);
        let realized = achieved(d);
        if ((realized - spec.nu) / spec.nu).abs() > 1e-3 {
            return Err(Error::Generation(format!(
                "displacement calibration stalled: realized {realized} for nu = {}",
                spec.nu
            )));
        }
        for (k, w) in noise.iter().enumerate() {
            let i = n_clean + k;
            for c in 0..p {
                rows[(i, c)] = if c == q { d + w[c] } else { w[c] };
            }
        }
    }

    let mut labels = vec![false; n];
    for label in labels.iter_mut().skip(n_clean) {
        *label = true;
    }
    let pi_q = DMatrix::from_fn(p, q, |r, c| if r == c { 1.0 } else { 0.0 });
    let data = DataMatrix::new(rows)?;
    Ok((data, GroundTruth { sigma_u: sigma_u.to_vec(), pi_q, labels }))
}

/// Generate with the standard Fibonacci-plus-ramp covariance diagonal.
pub fn generate(spec: &ContaminationSpec) -> Result<(DataMatrix, GroundTruth)> {
    generate_with_sigma(spec, &make_sigma_u(spec.p, spec.q))
}

/// Shape bias of a fitted model: whiten the fitted rank-q covariance by the
/// true one (both normalized to unit pseudo-determinant, both restricted to
/// the true q-dimensional subspace) and take the log condition number of
/// what remains. Zero iff the fit reproduces the true shape; +∞ when the
/// fitted spectrum or its overlap with the true subspace has collapsed.
pub fn shape_bias(eigenvalues: &[f64], loadings: &DMatrix<f64>, truth: &GroundTruth) -> f64 {
    let q = eigenvalues.len();
    assert_eq!(loadings.ncols(), q, "loadings and eigenvalues disagree on q");
    if eigenvalues.iter().any(|&l| l <= 0.0) {
        return f64::INFINITY;
    }
    let log_gm_sigma =
        truth.sigma_u[..q].iter().map(|s| s.ln()).sum::<f64>() / q as f64;
    let gamma: Vec<f64> = truth.sigma_u[..q].iter().map(|s| s / log_gm_sigma.exp()).collect();
    let log_gm_l = eigenvalues.iter().map(|l| l.ln()).sum::<f64>() / q as f64;
    let normalized: Vec<f64> = eigenvalues.iter().map(|l| l / log_gm_l.exp()).collect();
    // the fitted rank-q covariance restricted to the true subspace: with
    // Π_q = identity columns this is just the first q rows of the loadings
    let mut m = DMatrix::zeros(q, q);
    for r in 0..q {
        for c in 0..q {
            let mut acc = 0.0;
            for j in 0..q {
                acc += loadings[(r, j)] * normalized[j] * loadings[(c, j)];
            }
            m[(r, c)] = acc / (gamma[r] * gamma[c]).sqrt();
        }
    }
    let (eigs, _) = linalg::symmetric_eigen_sorted(&m);
    let top = eigs[0];
    let bottom = eigs[q - 1];
    if top <= 0.0 || bottom <= top * 1e-14 {
        return f64::INFINITY;
    }
    (top / bottom).ln()
}

/// Largest principal angle between the two q-dimensional subspaces:
/// arccos(√λ_min(Π_qᵀ P P ᵀ Π_q)).
pub fn maxsub(p_q: &DMatrix<f64>, pi_q: &DMatrix<f64>) -> f64 {
    let overlap = pi_q.transpose() * p_q;
    let d = &overlap * overlap.transpose();
    let (eigs, _) = linalg::symmetric_eigen_sorted(&d);
    let smallest = eigs[eigs.len() - 1].clamp(0.0, 1.0);
    smallest.sqrt().acos()
}

/// Total subspace overlap, trace(Π_qᵀ P P ᵀ Π_q) ∈ [0, q]: q for identical
/// subspaces, 0 for orthogonal ones.
pub fn sumsub(p_q: &DMatrix<f64>, pi_q: &DMatrix<f64>) -> f64 {
    let overlap = pi_q.transpose() * p_q;
    let d = &overlap * overlap.transpose();
    d.trace()
}

/// Which estimators the harness runs on each replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Fasthcs,
    Classical,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Fasthcs => "fasthcs",
            Method::Classical => "classical",
        })
    }
}

fn default_e_over_n() -> f64 {
    0.6
}

fn default_methods() -> Vec<Method> {
    vec![Method::Fasthcs, Method::Classical]
}

/// Full experiment grid: the cartesian product of the axes, `replicates`
/// seeded draws per cell, every method fit on the same draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub p: Vec<usize>,
    pub q: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub nu: Vec<f64>,
    pub configs: Vec<ContaminationKind>,
    pub replicates: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub master_seed: u64,
    /// Assumed clean fraction handed to the subset search (its `e` becomes
    /// ⌊e_over_n · n⌋). The default 0.6 covers every grid up to ε = 0.4.
    #[serde(default = "default_e_over_n")]
    pub e_over_n: f64,
}

/// One grid cell.
#[derive(Debug, Clone, Copy)]
struct Cell {
    p: usize,
    q: usize,
    epsilon: f64,
    nu: f64,
    kind: ContaminationKind,
}

/// One summary line: a (cell, method, statistic) triple with its median and
/// 75th percentile over the replicates.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub epsilon: f64,
    pub nu: f64,
    pub kind: ContaminationKind,
    pub method: Method,
    pub statistic: &'static str,
    pub median: f64,
    pub p75: f64,
    pub replicates: usize,
    pub failures: usize,
}

/// Ordered summary table of a full experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentResults {
    pub summaries: Vec<SummaryRow>,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Independent seed for (cell, replicate, domain); domain 0 draws the data,
/// domain 1 drives the estimator.
fn derive_seed(master: u64, cell: u64, rep: u64, domain: u64) -> u64 {
    let mut s = splitmix64(master);
    s = splitmix64(s ^ cell);
    s = splitmix64(s ^ rep);
    s = splitmix64(s ^ domain);
    s
}

fn fit_fasthcs(data: &DataMatrix, q: usize, e: usize, seed: u64) -> Result<PcaModel> {
    let reduced = center_and_reduce(data)?;
    let mut cfg = SearchConfig::new(q, seed);
    cfg.e = Some(e);
    let outcome = search(&reduced, &cfg)?;
    let (pp_subset, pp_model) = pp_subset_and_fit(&reduced, q, &PPConfig::new(seed))?;
    let selection = select_final(data.values(), &outcome, &pp_subset, &pp_model)?;
    Ok(selection.model)
}

fn fit_classical(data: &DataMatrix, q: usize) -> Result<PcaModel> {
    let n = data.nrows();
    let all: Vec<usize> = (0..n).collect();
    pca_fit_on_subset(data.values(), &all, q, ((n - 1) as f64).sqrt(), FitMethod::Classical)
}

fn measure(model: &PcaModel, truth: &GroundTruth) -> ReplicateMeasures {
    let eigenvalues: Vec<f64> = model.eigenvalues.iter().copied().collect();
    ReplicateMeasures {
        bias_vq: shape_bias(&eigenvalues, &model.loadings, truth),
        maxsub: maxsub(&model.loadings, &truth.pi_q),
        sumsub: sumsub(&model.loadings, &truth.pi_q),
        failed: false,
    }
}

fn failure_sentinel() -> ReplicateMeasures {
    ReplicateMeasures {
        bias_vq: f64::INFINITY,
        maxsub: std::f64::consts::FRAC_PI_2,
        sumsub: 0.0,
        failed: true,
    }
}

impl ExperimentConfig {
    fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &p in &self.p {
            for &q in &self.q {
                for &epsilon in &self.epsilon {
                    for &nu in &self.nu {
                        for &kind in &self.configs {
                            cells.push(Cell { p, q, epsilon, nu, kind });
                        }
                    }
                }
            }
        }
        cells
    }

    fn validate(&self) -> Result<()> {
        if self.p.is_empty()
            || self.q.is_empty()
            || self.epsilon.is_empty()
            || self.nu.is_empty()
            || self.configs.is_empty()
        {
            return Err(Error::InvalidConfig("every grid axis needs at least one value".into()));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("need at least one replicate".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("need at least one method".into()));
        }
        if !(self.e_over_n > 0.0 && self.e_over_n < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "e_over_n must lie strictly between 0 and 1, got {}",
                self.e_over_n
            )));
        }
        for cell in self.cells() {
            if !(cell.q >= 2 && cell.q < cell.p) {
                return Err(Error::InvalidConfig(format!(
                    "cell p = {}, q = {} violates 2 <= q < p",
                    cell.p, cell.q
                )));
            }
            if cell.q + 1 >= self.n {
                return Err(Error::InvalidConfig(format!(
                    "q = {} leaves no room for subsets at n = {}",
                    cell.q, self.n
                )));
            }
            if !(0.0..0.5).contains(&cell.epsilon) {
                return Err(Error::InvalidConfig(format!(
                    "epsilon = {} outside [0, 0.5)",
                    cell.epsilon
                )));
            }
            if !(cell.nu > 0.0) {
                return Err(Error::InvalidConfig(format!("nu = {} must be positive", cell.nu)));
            }
            let n_out = (cell.epsilon * self.n as f64).floor() as usize;
            let h = subset_size_h(self.n, cell.q);
            if self.n - n_out < h {
                return Err(Error::InvalidConfig(format!(
                    "epsilon = {} leaves fewer clean rows than h = {h}",
                    cell.epsilon
                )));
            }
            let e = (self.e_over_n * self.n as f64).floor() as usize;
            if e < h || e >= self.n {
                return Err(Error::InvalidConfig(format!(
                    "e_over_n = {} maps to e = {e}, outside [h = {h}, n)",
                    self.e_over_n
                )));
            }
        }
        Ok(())
    }
}

/// Run the whole grid. Replicates are an independent parallel map with
/// per-replicate derived seeds; the summary pass is sequential, so the
/// output is bit-identical for a fixed config regardless of thread count.
/// Prints one progress line per completed cell to stderr.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let cells = config.cells();
    let reps = config.replicates;
    let n = config.n;
    let e = (config.e_over_n * n as f64).floor() as usize;
    let done_counts: Vec<AtomicUsize> = (0..cells.len()).map(|_| AtomicUsize::new(0)).collect();

    let per_replicate: Vec<Vec<ReplicateMeasures>> = (0..cells.len() * reps)
        .into_par_iter()
        .map(|job| {
            let cell_idx = job / reps;
            let rep = job % reps;
            let cell = cells[cell_idx];
            let spec = ContaminationSpec {
                n,
                p: cell.p,
                q: cell.q,
                epsilon: cell.epsilon,
                nu: cell.nu,
                kind: cell.kind,
                seed: derive_seed(config.master_seed, cell_idx as u64, rep as u64, 0),
            };
            let method_seed = derive_seed(config.master_seed, cell_idx as u64, rep as u64, 1);
            let outcomes: Vec<ReplicateMeasures> = match generate(&spec) {
                Ok((data, truth)) => config
                    .methods
                    .iter()
                    .map(|method| {
                        let fit = match method {
                            Method::Fasthcs => fit_fasthcs(&data, cell.q, e, method_seed),
                            Method::Classical => fit_classical(&data, cell.q),
                        };
                        match fit {
                            Ok(model) => measure(&model, &truth),
                            Err(_) => failure_sentinel(),
                        }
                    })
                    .collect(),
                Err(_) => config.methods.iter().map(|_| failure_sentinel()).collect(),
            };
            let done = done_counts[cell_idx].fetch_add(1, Ordering::Relaxed) + 1;
            if done == reps {
                eprintln!(
                    "cell {}/{}: p={} q={} eps={} nu={} {} done",
                    cell_idx + 1,
                    cells.len(),
                    cell.p,
                    cell.q,
                    cell.epsilon,
                    cell.nu,
                    cell.kind
                );
            }
            outcomes
        })
        .collect();

    let mut summaries = Vec::new();
    for (cell_idx, cell) in cells.iter().enumerate() {
        for (m_idx, &method) in config.methods.iter().enumerate() {
            let measures: Vec<&ReplicateMeasures> = (0..reps)
                .map(|rep| &per_replicate[cell_idx * reps + rep][m_idx])
                .collect();
            let failures = measures.iter().filter(|m| m.failed).count();
            for (statistic, values) in [
                ("bias", measures.iter().map(|m| m.bias_vq).collect::<Vec<f64>>()),
                ("maxsub", measures.iter().map(|m| m.maxsub).collect()),
                ("sumsub", measures.iter().map(|m| m.sumsub).collect()),
            ] {
                let median = stats::percentile(&values, 0.5);
                let p75 = stats::percentile(&values, 0.75);
                debug_assert!(!median.is_nan() && !p75.is_nan());
                summaries.push(SummaryRow {
                    p: cell.p,
                    q: cell.q,
                    n,
                    epsilon: cell.epsilon,
                    nu: cell.nu,
                    kind: cell.kind,
                    method,
                    statistic,
                    median,
                    p75,
                    replicates: reps,
                    failures,
                });
            }
        }
    }
    Ok(ExperimentResults { summaries })
}

impl ExperimentResults {
    /// One row per (cell, method, statistic); medians and percentiles carry
    /// 17 significant digits, infinities render as "inf".
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("p,q,n,epsilon,nu,config,method,statistic,median,p75,replicates,failures\n");
        for row in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.p,
                row.q,
                row.n,
                row.epsilon,
                row.nu,
                row.kind,
                row.method,
                row.statistic,
                stats::format_float(row.median),
                stats::format_float(row.p75),
                row.replicates,
                row.failures
            ));
        }
        out
    }

    /// Bias-curve panels, one per (p, q, ε, kind): ν on the x-axis, the
    /// median bias as a solid line and the 75th percentile dotted, one color
    /// per method. Returns (file name, SVG document) pairs.
    pub fn panels(&self) -> Vec<(String, String)> {
        let bias_rows: Vec<&SummaryRow> =
            self.summaries.iter().filter(|r| r.statistic == "bias").collect();
        let mut keys: Vec<(usize, usize, f64, ContaminationKind)> = Vec::new();
        for row in &bias_rows {
            let key = (row.p, row.q, row.epsilon, row.kind);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.iter()
            .map(|&(p, q, epsilon, kind)| {
                let rows: Vec<&&SummaryRow> = bias_rows
                    .iter()
                    .filter(|r| r.p == p && r.q == q && r.epsilon == epsilon && r.kind == kind)
                    .collect();
                let name = format!("bias_p{p}_q{q}_eps{epsilon}_{kind}.svg");
                (name, panel_svg(&rows, p, q, epsilon, kind))
            })
            .collect()
    }
}

fn method_color(method: Method) -> &'static str {
    match method {
        Method::Fasthcs => "#c44e52",
        Method::Classical => "#4878a8",
    }
}

fn panel_svg(
    rows: &[&&SummaryRow],
    p: usize,
    q: usize,
    epsilon: f64,
    kind: ContaminationKind,
) -> String {
    let (width, height) = (520u32, 400u32);
    let (left, right, top, bottom) = (60.0, 20.0, 36.0, 50.0);
    let mut nus: Vec<f64> = rows.iter().map(|r| r.nu).collect();
    nus.sort_by(f64::total_cmp);
    nus.dedup();
    let x_min = *nus.first().unwrap_or(&0.0);
    let x_max = *nus.last().unwrap_or(&1.0);
    let y_peak = rows
        .iter()
        .flat_map(|r| [r.median, r.p75])
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let y_max = (1.1 * y_peak).max(1.0);
    let x_scale = LinearScale {
        domain: (x_min, if x_max > x_min { x_max } else { x_min + 1.0 }),
        range: (left, width as f64 - right),
    };
    let y_scale = LinearScale { domain: (0.0, y_max), range: (height as f64 - bottom, top) };

    let mut canvas = SvgCanvas::new(width, height);
    let (x0, x1) = x_scale.range;
    let (y0, y1) = y_scale.range;
    canvas.line(x0, y0, x1, y0, "#333333", None);
    canvas.line(x0, y0, x0, y1, "#333333", None);
    for &nu in &nus {
        canvas.line(x_scale.map(nu), y0, x_scale.map(nu), y0 + 5.0, "#333333", None);
        canvas.text(x_scale.map(nu), y0 + 18.0, "middle", 11, &format!("{nu}"), false);
    }
    for value in [0.0, y_max] {
        canvas.line(x0 - 5.0, y_scale.map(value), x0, y_scale.map(value), "#333333", None);
        canvas.text(x0 - 9.0, y_scale.map(value) + 4.0, "end", 11, &format!("{value:.1}"), false);
    }
    canvas.text((x0 + x1) / 2.0, height as f64 - 12.0, "middle", 13, "nu", false);
    canvas.text(16.0, (y0 + y1) / 2.0, "middle", 13, "shape bias", true);
    canvas.text(
        (x0 + x1) / 2.0,
        20.0,
        "middle",
        13,
        &format!("p={p} q={q} eps={epsilon} {kind}"),
        false,
    );

    let mut methods: Vec<Method> = Vec::new();
    for row in rows {
        if !methods.contains(&row.method) {
            methods.push(row.method);
        }
    }
    let clamp = |v: f64| if v.is_finite() { v.min(y_max) } else { y_max };
    for (k, &method) in methods.iter().enumerate() {
        let color = method_color(method);
        let mut med_points: Vec<(f64, f64)> = Vec::new();
        let mut p75_points: Vec<(f64, f64)> = Vec::new();
        for &nu in &nus {
            if let Some(row) =
                rows.iter().find(|r| r.method == method && r.nu == nu)
            {
                med_points.push((x_scale.map(nu), y_scale.map(clamp(row.median))));
                p75_points.push((x_scale.map(nu), y_scale.map(clamp(row.p75))));
            }
        }
        canvas.polyline(&med_points, color, None);
        canvas.polyline(&p75_points, color, Some("2 4"));
        canvas.text(x1 - 4.0, top + 16.0 * (k as f64 + 1.0), "end", 11, &method.to_string(), false);
        canvas.line(
            x1 - 70.0,
            top + 16.0 * (k as f64 + 1.0) - 4.0,
            x1 - 58.0,
            top + 16.0 * (k as f64 + 1.0) - 4.0,
            color,
            None,
        );
    }
    canvas.finish()
}
