//! Per-observation distances against a fitted model, the cutoffs that
//! calibrate them, and report/plot emission.
//!
//! Two distances describe how an observation relates to a fitted model: the
//! orthogonal distance (OD) from the observation to the model's affine
//! subspace, and the score distance (SD) of its projection inside that
//! subspace, standardized by the component variances. The OD cutoff comes
//! from a Wilson–Hilferty normal approximation of the OD^{2/3} values over
//! the fitting subset; the SD cutoff is the 97.5% χ² quantile with q degrees
//! of freedom. Distances divided by their cutoffs are plot-ready: anything
//! beyond 1.0 on either axis is flagged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduce::{DataMatrix, PcaModel};
use crate::stats;
use crate::svg::{LinearScale, SvgCanvas};

/// Outlier status of one observation relative to the two unit cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Regular,
    OdOutlier,
    SdOutlier,
    Both,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Regular => "regular",
            Flag::OdOutlier => "od_outlier",
            Flag::SdOutlier => "sd_outlier",
            Flag::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Flag> {
        match s {
            "regular" => Some(Flag::Regular),
            "od_outlier" => Some(Flag::OdOutlier),
            "sd_outlier" => Some(Flag::SdOutlier),
            "both" => Some(Flag::Both),
            _ => None,
        }
    }
}

impl std::fmt::Display for Flag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full per-observation diagnostic table for one model on one dataset.
#[derive(Debug, Clone)]
pub struct DiagnosticReport {
    pub od: Vec<f64>,
    pub sd: Vec<f64>,
    pub od_cutoff: f64,
    pub sd_cutoff: f64,
    pub scaled_od: Vec<f64>,
    pub scaled_sd: Vec<f64>,
    pub flags: Vec<Flag>,
    /// True when every fitting-subset OD was zero: the model reproduces its
    /// subset exactly, and the OD cutoff degenerates to zero.
    pub exact_fit: bool,
}

/// Euclidean distance from `y` to the model's affine subspace.
pub fn orthogonal_distance(model: &PcaModel, y: &[f64]) -> f64 {
    let p = model.dim();
    let q = model.q();
    debug_assert_eq!(y.len(), p);
    let mut scores = vec![0.0; q];
    for (j, s) in scores.iter_mut().enumerate() {
        let mut acc = 0.0;
        for c in 0..p {
            acc += (y[c] - model.center[c]) * model.loadings[(c, j)];
        }
        *s = acc;
    }
    let mut res2 = 0.0;
    for c in 0..p {
        let mut proj = 0.0;
        for (j, s) in scores.iter().enumerate() {
            proj += model.loadings[(c, j)] * s;
        }
        let r = (y[c] - model.center[c]) - proj;
        res2 += r * r;
    }
    res2.sqrt()
}

/// Standardized distance of `y`'s projection inside the model subspace,
/// √(Σ_j ((y−t)·P_j)² / L_j). Requires every component variance positive.
pub fn score_distance(model: &PcaModel, y: &[f64]) -> Result<f64> {
    let p = model.dim();
    let q = model.q();
    debug_assert_eq!(y.len(), p);
    if model.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::DegenerateModel(
            "score distances need every component variance positive; \
             reduce q to at most the model's rank"
                .into(),
        ));
    }
    let mut acc = 0.0;
    for j in 0..q {
        let mut s = 0.0;
        for c in 0..p {
            s += (y[c] - model.center[c]) * model.loadings[(c, j)];
        }
        acc += s * s / model.eigenvalues[j];
    }
    Ok(acc.sqrt())
}

/// Wilson–Hilferty OD cutoff from the fitting subset's orthogonal distances:
/// (mean(od^{2/3}) + z_{0.975}·√(var(od^{2/3})/χ²_{e/n,1}))^{3/2}.
///
/// An all-zero input means the model reproduces its subset exactly; the
/// cutoff is then zero and the caller should treat the model as an exact fit.
pub fn od_cutoff(ods_on_h: &[f64], e_over_n: f64) -> Result<f64> {
    if ods_on_h.len() < 2 {
        return Err(Error::InvalidInput(
            format!("OD cutoff needs at least 2 subset distances, got {}", ods_on_h.len()),
        ));
    }
    if !(e_over_n > 0.0 && e_over_n < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "e/n must lie strictly between 0 and 1, got {e_over_n}"
        )));
    }
    if ods_on_h.iter().all(|&d| d == 0.0) {
        return Ok(0.0);
    }
    let transformed: Vec<f64> = ods_on_h.iter().map(|d| d.powf(2.0 / 3.0)).collect();
    let mean = transformed.iter().sum::<f64>() / transformed.len() as f64;
    let var = stats::sample_variance(&transformed);
    let z = stats::norm_quantile(0.975);
    let chi = stats::chi2_quantile(e_over_n, 1.0);
    Ok((mean + z * (var / chi).sqrt()).powf(1.5))
}

/// SD cutoff √(χ²_{0.975,q}).
pub fn sd_cutoff(q: usize) -> f64 {
    assert!(q >= 1, "SD cutoff needs q >= 1");
    stats::chi2_quantile(0.975, q as f64).sqrt()
}

fn scale_by_cutoff(distance: f64, cutoff: f64) -> f64 {
    if distance == 0.0 && cutoff == 0.0 {
        0.0
    } else {
        distance / cutoff
    }
}

/// Compute the full diagnostic report of `model` on `data`. The OD cutoff is
/// estimated from the model's own fitting subset; `e_over_n` is the assumed
/// clean fraction entering the cutoff's χ² term (default choice: h/n).
pub fn diagnose(data: &DataMatrix, model: &PcaModel, e_over_n: f64) -> Result<DiagnosticReport> {
    let n = data.nrows();
    let p = data.ncols();
    if model.dim() != p {
        return Err(Error::InvalidInput(format!(
            "model is {}-dimensional but data has {p} columns",
            model.dim()
        )));
    }
    if let Some(&bad) = model.subset.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidInput(format!(
            "model subset row {bad} is out of range for n = {n}"
        )));
    }
    let values = data.values();
    let distances: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = (0..p).map(|c| values[(i, c)]).collect();
            let od = orthogonal_distance(model, &row);
            let sd = score_distance(model, &row)?;
            Ok((od, sd))
        })
        .collect();
    let mut od = Vec::with_capacity(n);
    let mut sd = Vec::with_capacity(n);
    for r in distances {
        let (o, s) = r?;
        od.push(o);
        sd.push(s);
    }

    let subset_ods: Vec<f64> = model.subset.iter().map(|&i| od[i]).collect();
    let od_cut = od_cutoff(&subset_ods, e_over_n)?;
    let sd_cut = sd_cutoff(model.q());
    let scaled_od: Vec<f64> = od.iter().map(|&d| scale_by_cutoff(d, od_cut)).collect();
    let scaled_sd: Vec<f64> = sd.iter().map(|&d| scale_by_cutoff(d, sd_cut)).collect();
    let flags: Vec<Flag> = scaled_od
        .iter()
        .zip(&scaled_sd)
        .map(|(&o, &s)| match (o > 1.0, s > 1.0) {
            (false, false) => Flag::Regular,
            (true, false) => Flag::OdOutlier,
            (false, true) => Flag::SdOutlier,
            (true, true) => Flag::Both,
        })
        .collect();
    Ok(DiagnosticReport {
        od,
        sd,
        od_cutoff: od_cut,
        sd_cutoff: sd_cut,
        scaled_od,
        scaled_sd,
        flags,
        exact_fit: od_cut == 0.0,
    })
}

impl DiagnosticReport {
    pub fn n(&self) -> usize {
        self.od.len()
    }

    /// One row per observation: index, od, sd, scaled_od, scaled_sd, flag.
    /// Floats carry 17 significant digits, so reparsing recovers them exactly.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,od,sd,scaled_od,scaled_sd,flag\n");
        for i in 0..self.n() {
            out.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                stats::format_float(self.od[i]),
                stats::format_float(self.sd[i]),
                stats::format_float(self.scaled_od[i]),
                stats::format_float(self.scaled_sd[i]),
                self.flags[i]
            ));
        }
        out
    }

    /// Scatter of scaled SD (x) against scaled OD (y) with dashed unit
    /// cutoff lines: everything beyond either line is an outlier. One circle
    /// per observation; non-finite scaled values are clamped onto the frame.
    pub fn to_svg(&self) -> String {
        let (width, height) = (640u32, 480u32);
        let (left, right, top, bottom) = (70.0, 20.0, 20.0, 55.0);
        let axis_max = |vals: &[f64]| -> f64 {
            let m = vals.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
            (1.15 * m).max(1.5)
        };
        let x_max = axis_max(&self.scaled_sd);
        let y_max = axis_max(&self.scaled_od);
        let x_scale =
            LinearScale { domain: (0.0, x_max), range: (left, width as f64 - right) };
        let y_scale =
            LinearScale { domain: (0.0, y_max), range: (height as f64 - bottom, top) };

        let mut canvas = SvgCanvas::new(width, height);
        let (x0, x1) = x_scale.range;
        let (y0, y1) = y_scale.range;
        // frame
        canvas.line(x0, y0, x1, y0, "#333333", None);
        canvas.line(x0, y0, x0, y1, "#333333", None);
        // dashed unit cutoff lines
        canvas.line(x_scale.map(1.0), y0, x_scale.map(1.0), y1, "#888888", Some("6 4"));
        canvas.line(x0, y_scale.map(1.0), x1, y_scale.map(1.0), "#888888", Some("6 4"));
        // ticks and labels
        for (value, label) in [(0.0, "0"), (1.0, "1")] {
            canvas.line(x_scale.map(value), y0, x_scale.map(value), y0 + 5.0, "#333333", None);
            canvas.text(x_scale.map(value), y0 + 18.0, "middle", 11, label, false);
            canvas.line(x0 - 5.0, y_scale.map(value), x0, y_scale.map(value), "#333333", None);
            canvas.text(x0 - 9.0, y_scale.map(value) + 4.0, "end", 11, label, false);
        }
        canvas.text(x_scale.map(x_max), y0 + 18.0, "middle", 11, &format!("{x_max:.1}"), false);
        canvas.text(x0 - 9.0, y_scale.map(y_max) + 4.0, "end", 11, &format!("{y_max:.1}"), false);
        canvas.text(
            (x0 + x1) / 2.0,
            height as f64 - 12.0,
            "middle",
            13,
            "Score distance / cutoff",
            false,
        );
        canvas.text(18.0, (y0 + y1) / 2.0, "middle", 13, "Orthogonal distance / cutoff", true);
        // one mark per observation, clamped onto the frame
        for i in 0..self.n() {
            let sx = self.scaled_sd[i];
            let sy = self.scaled_od[i];
            let cx = x_scale.map(if sx.is_finite() { sx.min(x_max) } else { x_max });
            let cy = y_scale.map(if sy.is_finite() { sy.min(y_max) } else { y_max });
            let fill = match self.flags[i] {
                Flag::Regular => "#5b7fa6",
                Flag::OdOutlier => "#c44e52",
                Flag::SdOutlier => "#dd8452",
                Flag::Both => "#8172b3",
            };
            canvas.circle(cx, cy, 3.0, fill);
        }
        canvas.finish()
    }
}
