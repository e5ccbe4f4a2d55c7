//! Outlier-resistant principal component analysis via congruent h-subsets.

pub mod diagnostics;
mod error;
pub mod iindex;
mod linalg;
pub mod ppursuit;
mod reduce;
pub mod select;
pub mod sim;
pub mod stats;
mod svg;

pub use diagnostics::{
    diagnose, od_cutoff, orthogonal_distance, score_distance, sd_cutoff, DiagnosticReport, Flag,
};
pub use error::{Error, Result};
pub use iindex::{search, subset_size_h, SearchConfig, SearchOutcome};
pub use ppursuit::{pp_outlyingness, pp_subset_and_fit, PPConfig};
pub use reduce::{
    center_and_reduce, pca_fit_on_subset, DataMatrix, FitMethod, PcaModel, ReducedBasis,
};
pub use select::{detect_exact_fit, select_final, selection_criterion, DValue, SelectionOutcome};
pub use sim::{
    generate, generate_with_sigma, make_sigma_u, maxsub, run_experiment, shape_bias, sumsub,
    ContaminationKind, ContaminationSpec, ExperimentConfig, ExperimentResults, GroundTruth,
    Method, SummaryRow,
};
