//! Final model selection between the subset-search fit and the
//! projection-pursuit fit.
//!
//! The subset search delivers the statistically efficient candidate, but its
//! distances all live inside fitted subspaces, so contamination arranged to
//! look ordinary there can slip into its subset. The projection-pursuit
//! subset is the safety net. The choice runs through the criterion
//!
//!   D = avg_j ln( avg_{i∈H_I}((y_i−t^I)·P^I_j)² / var_{i∈H•}(y_i·P^I_j) )
//!     − max_j ln( avg_{i∈H•}((y_i−t^PP)·P^PP_j)² / var_{i∈H⁻}(y_i·P^PP_j) ),
//!
//! where H• = H_I ∩ H_PP and H⁻ = H_PP \ H_I. The shared rows H• act as a
//! trusted yardstick: if H_I hides rows far from the consensus, the left
//! numerators blow up against the H• variances and D turns positive, which
//! hands the final model to the projection-pursuit fit. Degenerate spread of
//! H⁻ (including H⁻ too small to have a variance) also forces the
//! projection-pursuit fit. Otherwise the subset-search fit is kept.
//!
//! Selection never erases the exact-fit signal: when the winning search
//! candidate had an incongruence index of zero, the rows lying exactly on
//! its fitted flat are reported alongside whichever model was chosen.

use nalgebra::DMatrix;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::iindex::SearchOutcome;
use crate::reduce::PcaModel;
use crate::stats;

/// Rows are on the winning flat when their squared orthogonal residual is
/// at most this fraction of the model's eigenvalue trace; the same bound
/// decides whether the winning index counts as zero.
const EXACT_FIT_RTOL: f64 = 1e-12;

/// Value of the selection criterion: finite, or one of the two explicit
/// overflow states the decision rule treats specially.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DValue {
    Finite(f64),
    PosInf,
    NegInf,
}

impl DValue {
    pub fn from_f64(value: f64) -> Self {
        if value == f64::INFINITY {
            DValue::PosInf
        } else if value == f64::NEG_INFINITY {
            DValue::NegInf
        } else {
            DValue::Finite(value)
        }
    }

    /// The decision rule: positive D (including the +∞ guard) selects the
    /// projection-pursuit model.
    pub fn is_positive(&self) -> bool {
        match self {
            DValue::Finite(v) => *v > 0.0,
            DValue::PosInf => true,
            DValue::NegInf => false,
        }
    }
}

impl std::fmt::Display for DValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DValue::Finite(v) => write!(f, "{v}"),
            DValue::PosInf => write!(f, "inf"),
            DValue::NegInf => write!(f, "-inf"),
        }
    }
}

impl Serialize for DValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            DValue::Finite(v) => serializer.serialize_f64(*v),
            DValue::PosInf => serializer.serialize_str("inf"),
            DValue::NegInf => serializer.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for DValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Ok(DValue::from_f64(v)),
            Raw::Text(s) => match s.as_str() {
                "inf" => Ok(DValue::PosInf),
                "-inf" => Ok(DValue::NegInf),
                other => Err(de::Error::custom(format!("invalid D value {other:?}"))),
            },
        }
    }
}

/// The final model with the audit trail of how it was chosen.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    /// The selected fit, full-space.
    pub model: PcaModel,
    /// Value of the selection criterion.
    pub d_value: DValue,
    /// Whether the projection-pursuit model won.
    pub chose_pp: bool,
    /// Rows exactly on the search winner's flat, present iff the winning
    /// incongruence index was zero.
    pub exact_fit: Option<Vec<usize>>,
}

fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j >= b.len() || b[j] != x {
            out.push(x);
        }
    }
    out
}

/// Projection of row i onto column j of the model's loadings, optionally
/// centered at the model's location.
fn projection(y: &DMatrix<f64>, i: usize, model: &PcaModel, j: usize, centered: bool) -> f64 {
    let mut acc = 0.0;
    for c in 0..y.ncols() {
        let v = if centered { y[(i, c)] - model.center[c] } else { y[(i, c)] };
        acc += v * model.loadings[(c, j)];
    }
    acc
}

/// One log-ratio with the 0/0 := 0 convention; positive numerators over a
/// zero denominator are +∞ and zero numerators over positive denominators
/// are −∞, both of which the caller's combination rules handle.
fn log_ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        (num / den).ln()
    }
}

/// Evaluate the selection criterion for the two candidate subsets and their
/// fits. `h_i` and `h_pp` must be sorted ascending. Both fits must be
/// full-space models with the same number of components.
pub fn selection_criterion(
    y: &DMatrix<f64>,
    fit_i: &PcaModel,
    fit_pp: &PcaModel,
    h_i: &[usize],
    h_pp: &[usize],
) -> DValue {
    let q = fit_i.q();
    assert_eq!(fit_pp.q(), q, "candidate fits disagree on q");
    let shared = intersection(h_i, h_pp);
    assert!(
        shared.len() >= q,
        "subset intersection smaller than q ({} < {q})",
        shared.len()
    );
    let h_minus = difference(h_pp, h_i);

    // Guard: if the rows unique to the projection-pursuit subset have no
    // spread along any of its components, the criterion's right-hand side is
    // unusable and the projection-pursuit model is selected outright.
    let mut max_var: f64 = 0.0;
    for j in 0..q {
        let projections: Vec<f64> =
            h_minus.iter().map(|&i| projection(y, i, fit_pp, j, false)).collect();
        max_var = max_var.max(stats::sample_variance(&projections));
    }
    if max_var == 0.0 {
        return DValue::PosInf;
    }

    let mut left = 0.0;
    for j in 0..q {
        let mut num = 0.0;
        for &i in h_i {
            let s = projection(y, i, fit_i, j, true);
            num += s * s;
        }
        num /= h_i.len() as f64;
        let projections: Vec<f64> =
            shared.iter().map(|&i| projection(y, i, fit_i, j, false)).collect();
        left += log_ratio(num, stats::sample_variance(&projections));
    }
    left /= q as f64;

    let mut right = f64::NEG_INFINITY;
    for j in 0..q {
        let mut num = 0.0;
        for &i in &shared {
            let s = projection(y, i, fit_pp, j, true);
            num += s * s;
        }
        num /= shared.len() as f64;
        let projections: Vec<f64> =
            h_minus.iter().map(|&i| projection(y, i, fit_pp, j, false)).collect();
        right = right.max(log_ratio(num, stats::sample_variance(&projections)));
    }

    let d = left - right;
    if d.is_nan() {
        // only reachable when both sides are +∞; resolve toward the
        // breakdown-safe choice
        return DValue::PosInf;
    }
    DValue::from_f64(d)
}

/// All rows whose squared orthogonal residual against the model is at most
/// `tol` times the eigenvalue trace.
pub fn detect_exact_fit(model: &PcaModel, y: &DMatrix<f64>, tol: f64) -> Vec<usize> {
    let (n, p) = y.shape();
    let q = model.q();
    let threshold = tol * model.eigenvalues.iter().sum::<f64>();
    let mut on_flat = Vec::new();
    for i in 0..n {
        let mut scores = vec![0.0; q];
        for (j, s) in scores.iter_mut().enumerate() {
            *s = projection(y, i, model, j, true);
        }
        let mut res2 = 0.0;
        for c in 0..p {
            let mut proj = 0.0;
            for (j, s) in scores.iter().enumerate() {
                proj += model.loadings[(c, j)] * s;
            }
            let r = (y[(i, c)] - model.center[c]) - proj;
            res2 += r * r;
        }
        if res2 <= threshold {
            on_flat.push(i);
        }
    }
    on_flat
}

/// Run the selection rule and assemble the final outcome. The exact-fit row
/// set is derived from the search winner whenever its index was zero, no
/// matter which model the criterion selects.
pub fn select_final(
    y: &DMatrix<f64>,
    search: &SearchOutcome,
    pp_subset: &[usize],
    pp_model: &PcaModel,
) -> Result<SelectionOutcome> {
    if search.model.dim() != pp_model.dim() {
        return Err(Error::InvalidInput(
            "candidate fits live in different spaces".into(),
        ));
    }
    let d_value = selection_criterion(y, &search.model, pp_model, &search.subset, pp_subset);
    let chose_pp = d_value.is_positive();
    let model = if chose_pp { pp_model.clone() } else { search.model.clone() };
    let exact_fit = if search.i_value <= EXACT_FIT_RTOL {
        Some(detect_exact_fit(&search.model, y, EXACT_FIT_RTOL))
    } else {
        None
    };
    Ok(SelectionOutcome { model, d_value, chose_pp, exact_fit })
}
