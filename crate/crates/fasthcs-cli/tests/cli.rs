//! End-to-end tests driving the compiled binary: determinism, input
//! validation with named rows/columns, exit codes, and artifact integrity.

use std::path::Path;
use std::process::{Command, Output};

use fasthcs::{generate, ContaminationKind, ContaminationSpec};
use sha2::{Digest, Sha256};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fasthcs"))
        .args(args)
        .output()
        .expect("binary should launch")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn write_csv(path: &Path, matrix: &nalgebra::DMatrix<f64>) {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        let row: Vec<String> = (0..matrix.ncols()).map(|j| matrix[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

/// A small dataset with a visible 2-dim structure and a displaced minority.
fn contaminated_csv(dir: &Path) -> (std::path::PathBuf, Vec<bool>) {
    let spec = ContaminationSpec {
        n: 100,
        p: 10,
        q: 3,
        epsilon: 0.3,
        nu: 6.0,
        kind: ContaminationKind::Shift,
        seed: 19,
    };
    let (data, truth) = generate(&spec).unwrap();
    let path = dir.join("data.csv");
    write_csv(&path, data.values());
    (path, truth.labels)
}

#[test]
fn fit_is_deterministic_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = contaminated_csv(dir.path());
    let csv = csv.to_str().unwrap();
    let mut outputs = Vec::new();
    for (tag, threads) in [("a", "1"), ("b", "2"), ("c", "8"), ("d", "2")] {
        let out_dir = dir.path().join(tag);
        let output = run(&[
            "fit", "--input", csv, "--q", "3", "--seed", "11",
            "--threads", threads, "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        outputs.push((read(&out_dir.join("model.json")), read(&out_dir.join("subset.csv"))));
    }
    for other in &outputs[1..] {
        assert_eq!(outputs[0], *other, "outputs must be byte-identical");
    }
}

#[test]
fn fit_excludes_planted_outliers() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, labels) = contaminated_csv(dir.path());
    let out_dir = dir.path().join("fit");
    let output = run(&[
        "fit", "--input", csv.to_str().unwrap(), "--q", "3", "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let subset = read(&out_dir.join("subset.csv"));
    let kept: Vec<usize> =
        subset.lines().skip(1).map(|l| l.parse().unwrap()).collect();
    assert!(!kept.is_empty());
    let planted: Vec<usize> =
        labels.iter().enumerate().filter(|(_, &o)| o).map(|(i, _)| i).collect();
    assert_eq!(planted.len(), 30);
    for i in kept {
        assert!(!labels[i], "outlier row {i} kept in the subset");
    }
}

#[test]
fn oversized_q_warns_on_stderr_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = contaminated_csv(dir.path());
    let out_dir = dir.path().join("fit");
    // q = n/4 = 25 trips the q < n/5 advisory but still runs
    let output = run(&[
        "fit", "--input", csv.to_str().unwrap(), "--q", "5", "--clean-fraction",
        "0.7", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    assert!(!String::from_utf8_lossy(&output.stderr).contains("warning"));

    // 20 rows, 10 columns: q = n/4 = 5 trips the advisory yet stays < p
    let spec = ContaminationSpec {
        n: 20,
        p: 10,
        q: 5,
        epsilon: 0.0,
        nu: 1.0,
        kind: ContaminationKind::Shift,
        seed: 5,
    };
    let (small, _) = generate(&spec).unwrap();
    let small_csv = dir.path().join("small.csv");
    write_csv(&small_csv, small.values());
    let out_dir2 = dir.path().join("fit2");
    let output = run(&[
        "fit", "--input", small_csv.to_str().unwrap(), "--q", "5", "--out",
        out_dir2.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("warning") && stderr.contains("n/5"), "{stderr}");
}

#[test]
fn malformed_input_exits_2_naming_the_spot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let ragged = dir.path().join("ragged.csv");
    std::fs::write(&ragged, "1,2,3\n4,5\n6,7,8\n").unwrap();
    let output = run(&["fit", "--input", ragged.to_str().unwrap(), "--q", "2", "--out", out]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("row 2"), "{stderr}");

    let text = dir.path().join("text.csv");
    std::fs::write(&text, "1,2\n3,4\n5,x\n").unwrap();
    let output = run(&["fit", "--input", text.to_str().unwrap(), "--q", "2", "--out", out]);
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("row 3, column 2"), "{stderr}");

    // n = q + 1 rows is not enough to search
    let tiny = dir.path().join("tiny.csv");
    std::fs::write(&tiny, "1,2,3\n4,5,6\n7,8,10\n").unwrap();
    let output = run(&["fit", "--input", tiny.to_str().unwrap(), "--q", "2", "--out", out]);
    assert_eq!(output.status.code(), Some(2));

    let output = run(&["fit", "--input", dir.path().join("absent.csv").to_str().unwrap(), "--q", "2", "--out", out]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn diagnose_flags_planted_rows_and_honors_fail_flag() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, labels) = contaminated_csv(dir.path());
    let csv = csv.to_str().unwrap();
    let fit_dir = dir.path().join("fit");
    let output =
        run(&["fit", "--input", csv, "--q", "3", "--out", fit_dir.to_str().unwrap()]);
    assert!(output.status.success());
    let model = fit_dir.join("model.json");
    let model = model.to_str().unwrap();

    let diag_dir = dir.path().join("diag");
    let output = run(&[
        "diagnose", "--input", csv, "--model", model, "--out", diag_dir.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(0), "plain diagnose exits 0 even with outliers");

    let report = read(&diag_dir.join("report.csv"));
    let flagged: Vec<&str> = report
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    assert_eq!(flagged.len(), 100);
    for (i, &outlier) in labels.iter().enumerate() {
        if outlier {
            assert_ne!(flagged[i], "regular", "planted row {i} not flagged");
        }
    }
    let svg = read(&diag_dir.join("diagnostics.svg"));
    assert_eq!(svg.matches("<circle").count(), 100);

    let diag2 = dir.path().join("diag2");
    let output = run(&[
        "diagnose", "--input", csv, "--model", model, "--fail-on-outliers",
        "--out", diag2.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(1), "--fail-on-outliers flips the exit code");

    // mismatched column count is an input error
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "1,2\n3,4\n5,6\n").unwrap();
    let output = run(&[
        "diagnose", "--input", narrow.to_str().unwrap(), "--model", model,
        "--out", diag2.to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("columns"));
}

#[test]
fn simulate_is_deterministic_and_counts_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{"n": 60, "p": [8], "q": [2], "epsilon": [0.0, 0.2], "nu": [4, 8],
           "configs": ["shift", "point_mass"], "replicates": 2, "master_seed": 33}"#,
    )
    .unwrap();
    let config = config.to_str().unwrap();
    let mut tables = Vec::new();
    for tag in ["a", "b"] {
        let out_dir = dir.path().join(tag);
        let output = run(&["simulate", "--config", config, "--out", out_dir.to_str().unwrap()]);
        assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
        let stderr = String::from_utf8_lossy(&output.stderr).to_string();
        assert_eq!(stderr.matches("done").count(), 8, "one progress line per cell");
        tables.push(read(&out_dir.join("results.csv")));
    }
    assert_eq!(tables[0], tables[1], "fixed seed must reproduce the table");
    // 2 eps x 2 nu x 2 kinds = 8 cells x 2 methods x 3 statistics
    assert_eq!(tables[0].lines().count(), 1 + 8 * 2 * 3);
    // one bias panel per (p, q, epsilon, kind)
    let panels = std::fs::read_dir(dir.path().join("a"))
        .unwrap()
        .filter(|e| {
            e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".svg")
        })
        .count();
    assert_eq!(panels, 4);

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"n": 60, "p": [8], "q": [9], "epsilon": [0.0], "nu": [4],
           "configs": ["shift"], "replicates": 2, "master_seed": 1}"#,
    )
    .unwrap();
    let output = run(&["simulate", "--config", bad.to_str().unwrap(), "--out",
        dir.path().join("c").to_str().unwrap()]);
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn manifest_checksums_cover_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = contaminated_csv(dir.path());
    let out_dir = dir.path().join("fit");
    let output = run(&[
        "fit", "--input", csv.to_str().unwrap(), "--q", "3", "--seed", "2",
        "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&read(&out_dir.join("manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "fit");
    assert_eq!(manifest["seed"], 2);
    assert_eq!(manifest["K"], 25);
    let checksums = manifest["checksums"].as_object().unwrap();
    assert_eq!(checksums.len(), 2);
    for name in ["model.json", "subset.csv"] {
        let bytes = std::fs::read(out_dir.join(name)).unwrap();
        let mut hex = String::new();
        for b in Sha256::digest(&bytes) {
            hex.push_str(&format!("{b:02x}"));
        }
        assert_eq!(checksums[name].as_str().unwrap(), hex, "{name}");
    }
}
