//! On-disk model format: JSON with explicit shape fields, loadings stored
//! column-major as nested arrays. Human-auditable and language-neutral; the
//! reader validates shapes so a truncated or hand-edited file fails loudly.

use fasthcs::{DValue, FitMethod, PcaModel};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::commands::CliError;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub h: usize,
    /// Rank of the centered training data.
    pub rank: usize,
    pub method: FitMethod,
    pub seed: u64,
    pub center: Vec<f64>,
    /// Descending, length q.
    pub eigenvalues: Vec<f64>,
    /// Column-major: `loadings[j]` is the j-th loading vector, length p.
    pub loadings: Vec<Vec<f64>>,
    /// Kept rows of the training data, sorted, 0-based.
    pub subset: Vec<usize>,
    /// Incongruence index of the winning search candidate.
    pub i_value: DValue,
    /// Selection criterion that compared the two candidates.
    pub d_value: DValue,
    /// Rows exactly on the fitted flat, present only for exact fits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_fit: Option<Vec<usize>>,
}

impl ModelFile {
    pub fn new(
        n: usize,
        rank: usize,
        seed: u64,
        model: &PcaModel,
        i_value: f64,
        d_value: DValue,
        exact_fit: Option<Vec<usize>>,
    ) -> Self {
        let p = model.center.len();
        let q = model.eigenvalues.len();
        ModelFile {
            n,
            p,
            q,
            h: model.subset.len(),
            rank,
            method: model.method,
            seed,
            center: model.center.iter().copied().collect(),
            eigenvalues: model.eigenvalues.iter().copied().collect(),
            loadings: (0..q)
                .map(|j| model.loadings.column(j).iter().copied().collect())
                .collect(),
            subset: model.subset.clone(),
            i_value: DValue::from_f64(i_value),
            d_value,
            exact_fit,
        }
    }

    /// Rebuild the in-memory model, checking every declared shape.
    pub fn to_model(&self) -> Result<PcaModel, CliError> {
        let (p, q) = (self.p, self.q);
        if self.center.len() != p {
            return Err(CliError::input(format!(
                "model file: center has {} entries, p = {p}",
                self.center.len()
            )));
        }
        if self.eigenvalues.len() != q {
            return Err(CliError::input(format!(
                "model file: {} eigenvalues, q = {q}",
                self.eigenvalues.len()
            )));
        }
        if self.loadings.len() != q {
            return Err(CliError::input(format!(
                "model file: {} loading columns, q = {q}",
                self.loadings.len()
            )));
        }
        for (j, column) in self.loadings.iter().enumerate() {
            if column.len() != p {
                return Err(CliError::input(format!(
                    "model file: loading column {j} has {} entries, p = {p}",
                    column.len()
                )));
            }
        }
        if self.subset.is_empty() || self.subset.iter().any(|&i| i >= self.n) {
            return Err(CliError::input(
                "model file: subset indices must be non-empty and below n",
            ));
        }
        Ok(PcaModel {
            center: DVector::from_vec(self.center.clone()),
            eigenvalues: DVector::from_vec(self.eigenvalues.clone()),
            loadings: DMatrix::from_fn(p, q, |r, c| self.loadings[c][r]),
            subset: self.subset.clone(),
            method: self.method,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
    }
}
