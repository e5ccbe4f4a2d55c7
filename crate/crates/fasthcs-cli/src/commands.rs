//! The three commands. Each one reads its inputs, runs the corresponding
//! library entry points, and writes its artifacts plus a manifest. All
//! heavy lifting and all parallelism live in the library.

use fasthcs::{
    center_and_reduce, diagnose, pp_subset_and_fit, run_experiment, search, select_final,
    subset_size_h, DataMatrix, ExperimentConfig, Flag, PPConfig, SearchConfig,
};

use crate::artifacts::{OutputDir, RunManifest};
use crate::csvio::read_matrix;
use crate::model_file::ModelFile;
use crate::{DiagnoseArgs, FitArgs, SimulateArgs};

/// A message plus the process exit code it maps to: 2 for input problems,
/// 3 for internal numerical failures.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError { message: message.into(), code: 2 }
    }
}

impl From<fasthcs::Error> for CliError {
    fn from(e: fasthcs::Error) -> Self {
        let code = match e {
            fasthcs::Error::Numerical(_) => 3,
            _ => 2,
        };
        CliError { message: e.to_string(), code }
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let matrix = read_matrix(&args.input, args.header)?;
    let (n, _p) = (matrix.nrows(), matrix.ncols());
    if 5 * args.q >= n {
        eprintln!(
            "warning: q = {} is large for n = {n} observations; advised q < n/5",
            args.q
        );
    }
    let data = DataMatrix::new(matrix)?;
    let reduced = center_and_reduce(&data)?;

    let mut search_cfg = SearchConfig::new(args.q, args.seed);
    search_cfg.directions_per_candidate = args.k;
    search_cfg.growing_steps = args.w;
    if let Some(fraction) = args.clean_fraction {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(CliError::input(format!(
                "--clean-fraction must lie in (0, 1], got {fraction}"
            )));
        }
        search_cfg.e = Some((fraction * n as f64).floor() as usize);
    }
    let outcome = search(&reduced, &search_cfg)?;

    let mut pp_cfg = PPConfig::new(args.seed);
    pp_cfg.n_directions = args.pp_directions;
    let (pp_subset, pp_model) = pp_subset_and_fit(&reduced, args.q, &pp_cfg)?;

    let selection = select_final(data.values(), &outcome, &pp_subset, &pp_model)?;

    let model_file = ModelFile::new(
        n,
        reduced.rank,
        args.seed,
        &selection.model,
        outcome.i_value,
        selection.d_value,
        selection.exact_fit.clone(),
    );
    let model_json = serde_json::to_string_pretty(&model_file)
        .map_err(|e| CliError::input(format!("model serialization: {e}")))? + "\n";
    let mut subset_csv = String::from("index\n");
    for &i in &selection.model.subset {
        subset_csv.push_str(&format!("{i}\n"));
    }

    let mut out = OutputDir::create(&args.out)?;
    out.emit("model.json", &model_json)?;
    out.emit("subset.csv", &subset_csv)?;
    let e = search_cfg.e.unwrap_or_else(|| subset_size_h(n, args.q));
    let mut manifest = RunManifest::new("fit", &[&args.input], &args.out);
    manifest.q = Some(args.q);
    manifest.seed = Some(args.seed);
    manifest.e_over_n = Some(e as f64 / n as f64);
    manifest.k = Some(args.k);
    manifest.w = Some(args.w);
    manifest.n_directions = Some(args.pp_directions);
    out.finish(manifest)
}

/// Returns whether any observation was flagged.
pub fn cmd_diagnose(args: &DiagnoseArgs) -> Result<bool, CliError> {
    let model_file = ModelFile::load(&args.model)?;
    let model = model_file.to_model()?;
    let matrix = read_matrix(&args.input, args.header)?;
    if matrix.ncols() != model_file.p {
        return Err(CliError::input(format!(
            "{}: {} columns, but the model was fit on p = {}",
            args.input.display(),
            matrix.ncols(),
            model_file.p
        )));
    }
    let n = matrix.nrows();
    if model.subset.iter().any(|&i| i >= n) {
        return Err(CliError::input(format!(
            "{}: {n} rows cannot contain the model's subset; diagnose the training data \
             or refit",
            args.input.display()
        )));
    }
    let data = DataMatrix::new(matrix)?;
    let e_over_n = match args.e_over_n {
        Some(value) => {
            if !(value > 0.0 && value < 1.0) {
                return Err(CliError::input(format!(
                    "--e-over-n must lie strictly between 0 and 1, got {value}"
                )));
            }
            value
        }
        None => model.subset.len() as f64 / n as f64,
    };
    let report = diagnose(&data, &model, e_over_n)?;
    let outliers_found = report.flags.iter().any(|f| *f != Flag::Regular);

    let mut out = OutputDir::create(&args.out)?;
    out.emit("report.csv", &report.to_csv())?;
    out.emit("diagnostics.svg", &report.to_svg())?;
    let mut manifest =
        RunManifest::new("diagnose", &[&args.input, &args.model], &args.out);
    manifest.q = Some(model_file.q);
    manifest.seed = Some(model_file.seed);
    manifest.e_over_n = Some(e_over_n);
    out.finish(manifest)?;
    Ok(outliers_found)
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::input(format!("{}: {e}", args.config.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&raw)
        .map_err(|e| CliError::input(format!("{}: {e}", args.config.display())))?;
    let results = run_experiment(&config)?;

    let mut out = OutputDir::create(&args.out)?;
    out.emit("results.csv", &results.to_csv())?;
    for (name, svg) in results.panels() {
        out.emit(&name, &svg)?;
    }
    let mut manifest = RunManifest::new("simulate", &[&args.config], &args.out);
    manifest.seed = Some(config.master_seed);
    manifest.e_over_n = Some(config.e_over_n);
    out.finish(manifest)
}
