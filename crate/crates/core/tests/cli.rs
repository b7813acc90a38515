use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aion"))
}

fn shipped(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name);
    std::fs::read_to_string(path).unwrap()
}

/// Writes `text` into `dir` with `output.dir` pointing at `dir/out`.
fn staged(dir: &TempDir, text: &str) -> PathBuf {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with("output.dir"))
        .map(|l| format!("{l}\n"))
        .collect();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, format!("{body}output.dir = out\n")).unwrap();
    path
}

fn run(cmd: &mut Command) -> (i32, String, String) {
    let Output { status, stdout, stderr } = cmd.output().unwrap();
    (
        status.code().unwrap(),
        String::from_utf8(stdout).unwrap(),
        String::from_utf8(stderr).unwrap(),
    )
}

fn report(dir: &TempDir) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.path().join("out/report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn fit_demo_with_id_takes_one_outer_round() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(bin().arg("fit").arg(staged(&dir, &shipped("demo.conf"))));
    assert_eq!(code, 0, "{out}{err}");
    let r = report(&dir);
    assert_eq!(r["outer_iterations"], 1);
    assert_eq!(r["termination"], "Converged");
    assert!(r["final_loss"].as_f64().unwrap() <= 1e-12);
    assert!(dir.path().join("out/trajectory_id.csv").exists());
}

#[test]
fn fit_demo_with_sd_records_1000_iterations() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(bin().arg("fit").arg(staged(&dir, &shipped("demo_sd.conf"))));
    assert_eq!(code, 0, "{out}{err}");
    assert_eq!(report(&dir)["outer_iterations"], 1000);
    let csv = std::fs::read_to_string(dir.path().join("out/trajectory_sd.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 1001);
}

#[test]
fn fit_reports_max_iters_with_exit_2() {
    let dir = TempDir::new().unwrap();
    let text = shipped("demo_ncg.conf") + "solver.ncg_max_iters = 1\n";
    let (code, _, _) = run(bin().arg("fit").arg(staged(&dir, &text)));
    assert_eq!(code, 2);
    assert_eq!(report(&dir)["termination"], "MaxIters");
}

#[test]
fn fit_rejects_zero_rank_naming_the_key() {
    let dir = TempDir::new().unwrap();
    let text = shipped("demo.conf").replace("model.rank = 2", "model.rank = 0");
    let (code, _, err) = run(bin().arg("fit").arg(staged(&dir, &text)));
    assert_eq!(code, 1);
    assert!(err.contains("model.rank"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn fit_rejects_missing_config() {
    let (code, _, err) = run(bin().args(["fit", "/nonexistent/run.conf"]));
    assert_eq!(code, 1);
    assert!(err.contains("nonexistent"));
}

#[test]
fn fit_reads_csv_datasets_relative_to_the_config() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("points.csv"),
        "x1,y\n0.0,1.0\n0.25,0.5\n0.5,0.0\n0.75,-0.5\n1.0,-1.0\n",
    )
    .unwrap();
    let text = "\
model.rank = 1
model.dim = 1
init.kind = explicit
init.values = 1, 0, 1, 0
data.kind = csv_file
data.path = points.csv
solver.method = NCG
";
    let (code, out, err) = run(bin().arg("fit").arg(staged(&dir, text)));
    assert!(code == 0 || code == 2, "{out}{err}");
    assert_eq!(report(&dir)["method"], "NCG");

    let missing = text.replace("points.csv", "absent.csv");
    let (code, _, err) = run(bin().arg("fit").arg(staged(&dir, &missing)));
    assert_eq!(code, 1);
    assert!(err.contains("absent.csv"), "{err}");
}

#[test]
fn landscape_writes_both_demo_slices() {
    let dir = TempDir::new().unwrap();
    let (code, out, err) = run(bin().arg("landscape").arg(staged(&dir, &shipped("landscape.conf"))));
    assert_eq!(code, 0, "{out}{err}");
    for (file, header) in [
        ("landscape_alpha_1_phi_1.csv", "alpha_1,phi_1,loss"),
        ("landscape_A_1_omega_1.csv", "A_1,omega_1,loss"),
    ] {
        let csv = std::fs::read_to_string(dir.path().join("out").join(file)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(header));
        assert_eq!(lines.count(), 81 * 81);
    }
}

#[test]
fn landscape_single_cell_grid() {
    let dir = TempDir::new().unwrap();
    let text = shipped("demo.conf")
        + "output.landscape.1.axes = alpha_1, phi_1\n\
           output.landscape.1.grid1 = 0, 0, 1\n\
           output.landscape.1.grid2 = 0.5, 0.5, 1\n";
    let (code, _, err) = run(bin().arg("landscape").arg(staged(&dir, &text)));
    assert_eq!(code, 0, "{err}");
    let csv = std::fs::read_to_string(dir.path().join("out/landscape_alpha_1_phi_1.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn landscape_rejects_repeated_axis() {
    let dir = TempDir::new().unwrap();
    let text = shipped("landscape.conf").replace("alpha_1, phi_1", "phi_1, phi_1");
    let (code, _, err) = run(bin().arg("landscape").arg(staged(&dir, &text)));
    assert_eq!(code, 1);
    assert!(err.contains("output.landscape.1.axes"), "{err}");
}

#[test]
fn landscape_rejects_unknown_axis() {
    let dir = TempDir::new().unwrap();
    let text = shipped("landscape.conf").replace("A_1, omega_1", "A_1, omega_7");
    let (code, _, err) = run(bin().arg("landscape").arg(staged(&dir, &text)));
    assert_eq!(code, 1);
    assert!(err.contains("omega_7"), "{err}");
}

#[test]
fn demo_prints_table_and_writes_files() {
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("demo");
    let (code, out, err) = run(bin().arg("demo").arg("--out").arg(&out_dir));
    assert_eq!(code, 0, "{err}");
    for method in ["ID", "SD", "NCG"] {
        assert!(out.lines().any(|l| l.starts_with(method)), "{out}");
    }
    for file in [
        "table1.csv",
        "trajectory_id.csv",
        "trajectory_sd.csv",
        "trajectory_ncg.csv",
        "landscape_alpha_1_phi_1.csv",
        "landscape_A_1_omega_1.csv",
    ] {
        assert!(out_dir.join(file).exists(), "{file}");
    }
}

#[test]
fn demo_fails_on_unwritable_directory() {
    let dir = TempDir::new().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let (code, _, _) = run(bin().arg("demo").arg("--out").arg(blocker.join("sub")));
    assert_eq!(code, 1);
}

#[test]
fn verify_quick_and_default() {
    let (code, out, _) = run(bin().args(["verify", "--trials", "1"]));
    assert_eq!(code, 0, "{out}");
    let (code, out, _) = run(bin().arg("verify"));
    assert_eq!(code, 0, "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn verify_negative_control_fails() {
    let (code, out, _) = run(bin().args(["verify", "--trials", "3", "--corrupt-gradient"]));
    assert_eq!(code, 1);
    assert!(out.contains("FAIL gradient_vs_finite_differences"), "{out}");
}
