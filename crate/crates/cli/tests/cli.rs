use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dade(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dade"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("running dade")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = dade(args, cwd);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(header: &str, name: &str) -> usize {
    header
        .split(',')
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

/// Synthetic data, both transforms, a calibration, ground truth and an IVF
/// index in a fresh directory.
fn workspace() -> TempDir {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("synth.txt"),
        "count = 2000\nqueries = 20\ndim = 32\nspectrum = power\nexponent = 1.0\nseed = 5\n",
    )
    .unwrap();
    ok(
        &[
            "synth",
            "--config",
            "synth.txt",
            "--out-data",
            "base.fvecs",
            "--out-queries",
            "q.fvecs",
        ],
        p,
    );
    ok(&["fit", "--data", "base.fvecs", "--out", "pca.bin"], p);
    ok(
        &[
            "fit",
            "--data",
            "base.fvecs",
            "--out",
            "rnd.bin",
            "--kind",
            "random",
            "--seed",
            "3",
        ],
        p,
    );
    ok(
        &[
            "calibrate",
            "--transform",
            "pca.bin",
            "--data",
            "base.fvecs",
            "--out",
            "cal.bin",
            "--delta-d",
            "8",
        ],
        p,
    );
    ok(
        &[
            "gt",
            "--data",
            "base.fvecs",
            "--queries",
            "q.fvecs",
            "-k",
            "10",
            "--out",
            "gt.ivecs",
        ],
        p,
    );
    ok(
        &[
            "build",
            "--index",
            "ivf",
            "--transform",
            "pca.bin",
            "--data",
            "base.fvecs",
            "--out",
            "ivf.bin",
            "--clusters",
            "16",
            "--layout",
            "split",
            "--delta-d",
            "8",
        ],
        p,
    );
    dir
}

fn sweep_args(extra: &[&'static str]) -> Vec<&'static str> {
    let mut v = vec![
        "sweep",
        "--transform",
        "pca.bin",
        "--data",
        "base.fvecs",
        "--queries",
        "q.fvecs",
        "--gt",
        "gt.ivecs",
        "--index",
        "ivf",
        "--index-file",
        "ivf.bin",
        "-k",
        "10",
        "--delta-d",
        "8",
    ];
    v.extend_from_slice(extra);
    v
}

#[test]
fn pipeline_produces_expected_artifacts() {
    let dir = workspace();
    for f in [
        "base.fvecs",
        "q.fvecs",
        "pca.bin",
        "rnd.bin",
        "cal.bin",
        "gt.ivecs",
        "ivf.bin",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let bytes = std::fs::read(dir.path().join("pca.bin")).unwrap();
    assert_eq!(&bytes[..4], b"DADE");
    // header + mean + eigenvalues + matrix
    assert_eq!(bytes.len(), 4 + 4 + 1 + 4 + 8 * (32 + 32 + 32 * 32));
    let gt = dade_core::read_ivecs(dir.path().join("gt.ivecs")).unwrap();
    assert_eq!(gt.len(), 20);
    assert!(gt.iter().all(|l| l.len() == 10));
}

#[test]
fn exhaustive_fd_sweep_has_full_recall() {
    let dir = workspace();
    let text = ok(
        &sweep_args(&["--dco", "fd", "--n-probe", "16", "--no-timing"]),
        dir.path(),
    );
    assert!(text.starts_with("# dade-sweep v1\n"));
    let header = text.lines().nth(1).unwrap();
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 1);
    let (recall, fraction) = (column(header, "recall"), column(header, "dim_fraction"));
    assert_eq!(rows[0][recall], "1.000000");
    assert_eq!(rows[0][fraction], "1.000000");
    assert_eq!(rows[0][column(header, "qps")], "NA");
}

#[test]
fn sweep_rows_are_ordered_and_bounded() {
    let dir = workspace();
    let text = ok(
        &sweep_args(&[
            "--dco",
            "dade",
            "--calibration",
            "cal.bin",
            "--n-probe",
            "1:16:5",
        ]),
        dir.path(),
    );
    let header = text.lines().nth(1).unwrap();
    let rows = csv_rows(&text);
    let probes: Vec<&str> = rows
        .iter()
        .map(|r| r[column(header, "traversal")].as_str())
        .collect();
    assert_eq!(probes, ["1", "6", "11", "16"]);
    for r in &rows {
        let recall: f64 = r[column(header, "recall")].parse().unwrap();
        let fraction: f64 = r[column(header, "dim_fraction")].parse().unwrap();
        let qps: f64 = r[column(header, "qps")].parse().unwrap();
        assert!((0.0..=1.0).contains(&recall));
        assert!(fraction > 0.0 && fraction <= 1.0);
        assert!(qps > 0.0);
    }
}

#[test]
fn repeated_sweeps_are_byte_identical() {
    let dir = workspace();
    let args = sweep_args(&[
        "--dco",
        "dade",
        "--p-s",
        "0.1,0.3",
        "--n-probe",
        "2,4",
        "--no-timing",
    ]);
    let a = ok(&args, dir.path());
    let b = ok(&args, dir.path());
    assert_eq!(a, b);
    assert_eq!(csv_rows(&a).len(), 4);
}

#[test]
fn hnsw_sweep_from_a_spec_file() {
    let dir = workspace();
    let p = dir.path();
    ok(
        &[
            "build",
            "--index",
            "hnsw",
            "--transform",
            "pca.bin",
            "--data",
            "base.fvecs",
            "--out",
            "hnsw.bin",
            "--ef-construction",
            "64",
            "--seed",
            "2",
        ],
        p,
    );
    std::fs::write(
        p.join("sweep.txt"),
        "index = hnsw\ndco = dade\ndecoupled = true\nk = 10\nef = 10,40\ndelta_d = 8\ntiming = false\n",
    )
    .unwrap();
    let text = ok(
        &[
            "sweep",
            "--spec",
            "sweep.txt",
            "--transform",
            "pca.bin",
            "--data",
            "base.fvecs",
            "--queries",
            "q.fvecs",
            "--gt",
            "gt.ivecs",
            "--index-file",
            "hnsw.bin",
            "--out",
            "out.csv",
        ],
        p,
    );
    assert!(text.is_empty());
    let csv = std::fs::read_to_string(p.join("out.csv")).unwrap();
    let rows = csv_rows(&csv);
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r[0] == "hnsw" && r[2] == "true"));
}

fn expect_config_error(args: &[&str], cwd: &Path, needles: &[&str]) {
    let out = dade(args, cwd);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(2), "{args:?}: {stderr}");
    for n in needles {
        assert!(stderr.contains(n), "{args:?}: {stderr:?} lacks {n:?}");
    }
}

#[test]
fn artifact_mismatches_exit_with_configuration_status() {
    let dir = workspace();
    let p = dir.path();
    let mut args = sweep_args(&[
        "--dco",
        "dade",
        "--calibration",
        "cal.bin",
        "--n-probe",
        "2",
    ]);
    let pos = args.iter().position(|a| *a == "8").unwrap();
    args[pos] = "16";
    expect_config_error(&args, p, &["delta_d=8", "delta_d=16"]);
    expect_config_error(
        &sweep_args(&["--dco", "ads", "--n-probe", "2"]),
        p,
        &["random", "pca"],
    );
    expect_config_error(
        &sweep_args(&[
            "--dco",
            "dade",
            "--calibration",
            "cal.bin",
            "--p-s",
            "0.2",
            "--n-probe",
            "2",
        ]),
        p,
        &["p_s=0.1", "p_s=0.2"],
    );
    expect_config_error(
        &sweep_args(&["--dco", "warp", "--n-probe", "2"]),
        p,
        &["warp"],
    );
    expect_config_error(
        &sweep_args(&["--dco", "fd", "--n-probe", "99"]),
        p,
        &["n_probe=99", "16"],
    );

    ok(&["synth", "--out-data", "other.fvecs"], p);
    expect_config_error(
        &[
            "calibrate",
            "--transform",
            "pca.bin",
            "--data",
            "other.fvecs",
            "--out",
            "x.bin",
        ],
        p,
        &["D=64", "D=32"],
    );
}

#[test]
fn unreadable_artifacts_exit_with_runtime_status() {
    let dir = workspace();
    let p = dir.path();
    std::fs::write(p.join("broken.bin"), b"DADE\x01").unwrap();
    let out = dade(
        &[
            "calibrate",
            "--transform",
            "broken.bin",
            "--data",
            "base.fvecs",
            "--out",
            "c.bin",
        ],
        p,
    );
    assert_eq!(out.status.code(), Some(1));
    let out = dade(&["fit", "--data", "missing.fvecs", "--out", "t.bin"], p);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.fvecs"));
}

fn feasibility(dir: &TempDir, extra: &[&str]) -> (String, Vec<Vec<String>>) {
    let mut args = vec![
        "feasibility",
        "--data",
        "base.fvecs",
        "--queries",
        "q.fvecs",
        "--gt",
        "gt.ivecs",
        "-k",
        "10",
    ];
    args.extend_from_slice(extra);
    let text = ok(&args, dir.path());
    assert!(text.starts_with("# dade-feasibility v1\n"));
    let header = text.lines().nth(1).unwrap().to_string();
    let rows = csv_rows(&text);
    (header, rows)
}

#[test]
fn feasibility_trends_in_p_s() {
    let dir = workspace();
    let (header, rows) = feasibility(&dir, &["--strategies", "dade", "--delta-d", "4"]);
    let (recall, fraction) = (column(&header, "recall"), column(&header, "dim_fraction"));
    assert_eq!(rows.len(), 7);
    let series: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[recall].parse().unwrap(), r[fraction].parse().unwrap()))
        .collect();
    for w in series.windows(2) {
        assert!(w[1].1 <= w[0].1, "fraction rose with p_s: {series:?}");
        assert!(w[1].0 <= w[0].0 + 0.01, "recall rose with p_s: {series:?}");
    }
    assert!(series[0].0 >= series[6].0);
    assert!(series[0].1 > series[6].1);
}

#[test]
fn fixed_pca_at_full_dimension_is_exact() {
    let dir = workspace();
    let (header, rows) = feasibility(
        &dir,
        &[
            "--strategies",
            "fixed-pca,fixed-random",
            "--d-fixed",
            "8,32",
        ],
    );
    let recall = column(&header, "recall");
    assert_eq!(rows.len(), 4);
    for r in rows.iter().filter(|r| r[3] == "32") {
        assert_eq!(r[recall], "1.000000");
    }
}

#[test]
fn delta_d_sensitivity_rows() {
    let dir = workspace();
    let (header, rows) = feasibility(
        &dir,
        &[
            "--strategies",
            "dade",
            "--p-s",
            "0.1",
            "--delta-d",
            "1,2,4,8,16,32",
        ],
    );
    let fraction = column(&header, "dim_fraction");
    let steps: Vec<&str> = rows.iter().map(|r| r[1].as_str()).collect();
    assert_eq!(steps, ["1", "2", "4", "8", "16", "32"]);
    // Finer steps stop earlier on average but run more tests per comparison.
    let fine: f64 = rows[0][fraction].parse().unwrap();
    let coarse: f64 = rows[5][fraction].parse().unwrap();
    assert!(fine < coarse, "{fine} vs {coarse}");
    let tests_per_dco = |r: &Vec<String>| -> f64 {
        let f: f64 = r[fraction].parse().unwrap();
        let step: f64 = r[1].parse().unwrap();
        f * 32.0 / step
    };
    assert!(tests_per_dco(&rows[0]) > 4.0 * tests_per_dco(&rows[5]));
}

#[test]
fn help_lists_subcommands() {
    let out = ok(&["--help"], &PathBuf::from("."));
    for sub in [
        "synth",
        "fit",
        "calibrate",
        "build",
        "gt",
        "sweep",
        "feasibility",
    ] {
        assert!(out.contains(sub), "{sub}");
    }
}
