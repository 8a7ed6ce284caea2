//! End-to-end runs of the `citecorr` binary on small run-specs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use citecorr::results::{read_results, CSV_HEADER};

fn citecorr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_citecorr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_spec(dir: &Path, name: &str, body: &str) -> PathBuf {
    let out = dir.join(format!("{name}-out"));
    let text = format!("{body}\noutput_dir = {:?}\n", out.display().to_string());
    let path = dir.join(format!("{name}.toml"));
    fs::write(&path, text).unwrap();
    path
}

const SMALL_SWEEP: &str = r#"
experiment = "sweep"
master_seed = 99
n = 300
iterations = 5
calibration_n = 20000
set1_mean = 20
set1_rhos = [0.3, 0.7]
set2_rhos = [0.2, 0.5, 0.8]
set2_means = [5, 20, 35]
"#;

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn sweep_writes_table_sidecar_and_figures_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "sweep", SMALL_SWEEP);
    let first = citecorr(&["sweep", spec.to_str().unwrap()]);
    assert_ok(&first);

    let out = dir.path().join("sweep-out");
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_results(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 2 * 3 * 3);
    assert!(rows.iter().all(|r| r.combined_rho_mean.is_some()));

    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("results.json")).unwrap()).unwrap();
    assert_eq!(sidecar["runspec"]["master_seed"], 99);
    assert_eq!(sidecar["rows"].as_array().unwrap().len(), rows.len());

    let figures: Vec<_> = fs::read_dir(out.join("figures")).unwrap().collect();
    assert_eq!(figures.len(), 2, "one figure per set-1 rho");

    let second = citecorr(&["sweep", spec.to_str().unwrap()]);
    assert_ok(&second);
    assert_eq!(csv, fs::read_to_string(out.join("results.csv")).unwrap());
}

#[test]
fn figures_regenerate_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "sweep", SMALL_SWEEP);
    assert_ok(&citecorr(&["sweep", spec.to_str().unwrap()]));
    let out = dir.path().join("sweep-out");
    let regen = dir.path().join("regen");
    assert_ok(&citecorr(&[
        "figures",
        out.join("results.csv").to_str().unwrap(),
        "--outdir",
        regen.to_str().unwrap(),
    ]));
    for entry in fs::read_dir(out.join("figures")).unwrap() {
        let entry = entry.unwrap();
        let original = fs::read(entry.path()).unwrap();
        let rebuilt = fs::read(regen.join(entry.file_name())).unwrap();
        assert_eq!(original, rebuilt, "{:?}", entry.file_name());
    }
}

#[test]
fn point_reports_interval_and_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "point",
        r#"
experiment = "point"
master_seed = 5
n = 500
iterations = 10
calibration_n = 20000
set1_mean = 20
set1_rho = 0.5
set2_mean = 10
set2_rho = 0.5
"#,
    );
    let out = citecorr(&["point", spec.to_str().unwrap()]);
    assert_ok(&out);
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mean = json["combined_rho"]["mean"].as_f64().unwrap();
    assert!((mean - 0.5).abs() < 0.1, "{mean}");
    let rows = read_results(&dir.path().join("point-out/point.csv")).unwrap();
    assert_eq!(rows.len(), 1);
}

#[test]
fn invert_by_table_and_by_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let table_spec = write_spec(
        dir.path(),
        "table",
        r#"
experiment = "sweep"
master_seed = 3
n = 500
iterations = 10
calibration_n = 20000
set1_mean = 20
set1_rhos = [0.1, 0.3, 0.5, 0.7, 0.9]
set2_rhos = [0.1, 0.3, 0.5, 0.7, 0.9]
set2_means = [10]
"#,
    );
    assert_ok(&citecorr(&["sweep", table_spec.to_str().unwrap()]));
    let table = dir.path().join("table-out/results.csv");

    let spec = write_spec(
        dir.path(),
        "invert",
        r#"
experiment = "invert"
master_seed = 3
n = 500
calibration_n = 20000
inversion_iterations = 10
set1_mean = 20
set2_mean = 10
"#,
    );
    let spec = spec.to_str().unwrap();
    let by_table = citecorr(&[
        "invert",
        spec,
        "--observed",
        "0.4",
        "--assumption",
        "equal",
        "--table",
        table.to_str().unwrap(),
    ]);
    assert_ok(&by_table);
    let by_sim = citecorr(&["invert", spec, "--observed", "0.4", "--assumption", "equal"]);
    assert_ok(&by_sim);
    let rho = |o: &Output| {
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap()["unknown_rho"]
            .as_f64()
            .unwrap()
    };
    assert!(
        (rho(&by_table) - rho(&by_sim)).abs() <= 0.05,
        "{} vs {}",
        rho(&by_table),
        rho(&by_sim)
    );

    let report: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("invert-out/inversion.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["mode"], "simulation");

    let fixed = citecorr(&[
        "invert",
        spec,
        "--observed",
        "0.4",
        "--assumption",
        "fixed:0.3",
    ]);
    assert_ok(&fixed);
    let est: serde_json::Value = serde_json::from_slice(&fixed.stdout).unwrap();
    assert_eq!(est["rhos"][0], 0.3);
    assert!(
        rho(&fixed) > 0.4,
        "the other subset must carry more correlation"
    );

    let impossible = citecorr(&[
        "invert",
        spec,
        "--observed",
        "0.999",
        "--assumption",
        "equal",
    ]);
    assert!(!impossible.status.success());
}

#[test]
fn scatter_is_deterministic_svg() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "scatter",
        r#"
experiment = "scatter"
master_seed = 14
n = 300
calibration_n = 20000
set1_mean = 20
set1_rho = 0.1
set2_mean = 20
set2_rho = 0.9
jitter_seed = 1
"#,
    );
    assert_ok(&citecorr(&["scatter", spec.to_str().unwrap()]));
    let path = dir.path().join("scatter-out/scatter.svg");
    let first = fs::read_to_string(&path).unwrap();
    roxmltree::Document::parse(&first).expect("well-formed SVG");
    assert_ok(&citecorr(&["scatter", spec.to_str().unwrap()]));
    assert_eq!(first, fs::read_to_string(&path).unwrap());
}

#[test]
fn calibration_cache_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache.csv");
    let body = format!(
        "{SMALL_SWEEP}calibration_cache = {:?}\n",
        cache.display().to_string()
    );
    let spec = write_spec(dir.path(), "cached", &body);
    assert_ok(&citecorr(&["sweep", spec.to_str().unwrap()]));
    let text = fs::read_to_string(&cache).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "dist,shape,mean,target_rho,calib_n,convention,sigma,achieved_rho"
    );
    // set 1 at two rhos, set 2 at three rhos times three means
    assert_eq!(lines.count(), 2 + 9);
}

#[test]
fn bad_runspecs_fail_with_a_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("no-seed", "experiment = \"sweep\"\n"),
        (
            "unknown-key",
            "experiment = \"sweep\"\nmaster_seed = 1\nsigma = 2\n",
        ),
        (
            "bad-rho",
            "experiment = \"sweep\"\nmaster_seed = 1\nset2_rhos = [1.5]\n",
        ),
    ];
    for (name, body) in cases {
        let spec = write_spec(dir.path(), name, body);
        let out = citecorr(&["sweep", spec.to_str().unwrap()]);
        assert!(!out.status.success(), "{name} should fail");
        let stderr = String::from_utf8_lossy(&out.stderr);
        assert!(stderr.starts_with("error: "), "{name}: {stderr}");
    }
    let wrong_kind = write_spec(dir.path(), "kind", SMALL_SWEEP);
    assert!(!citecorr(&["point", wrong_kind.to_str().unwrap()])
        .status
        .success());
}
