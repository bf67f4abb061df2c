use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use fnn_cli::manifest::RunManifest;

fn fnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnn"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("{key} missing from:\n{report}"))
        .to_string()
}

#[test]
fn max_violation_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(&["max-violation"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("max_violation.txt")).unwrap();
    assert_eq!(report, stdout(&o));
    let max: f64 = value(&report, "max_value").parse().unwrap();
    assert!((max - 13f64.sqrt()).abs() <= 1e-4);
    let t3: f64 = value(&report, "theta3").parse().unwrap();
    assert!((t3 - (3.0 / 13f64.sqrt()).acos()).abs() <= 1e-5);
    let prior: f64 = value(&report, "prior_work_value").parse().unwrap();
    assert!((prior - 5.0 / 2f64.sqrt()).abs() <= 1e-6);
    assert_eq!(value(&report, "violating"), "true");
}

#[test]
fn max_violation_at_given_angles() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(&["max-violation", "--angles", "1.5707963267948966,0,0.7853981633974483,-0.7853981633974483"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let v: f64 = value(&stdout(&o), "max_value").parse().unwrap();
    assert!((v - 5.0 / 2f64.sqrt()).abs() <= 1e-9);
}

#[test]
fn max_violation_off_the_aligned_axis_fails_the_oracle_gate() {
    // θ₂ = π/2 switches on the closed forms' odd term, so the pipeline and
    // the closed form disagree and the command reports a tolerance failure.
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(&["max-violation", "--angles", "0,1.5708,0.7854,-0.7854"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("max_violation.txt").exists());
}

#[test]
fn max_violation_with_noise() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(&["max-violation", "--visibility", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    let v: f64 = value(&report, "max_value").parse().unwrap();
    assert!((v - 0.25 * 13f64.sqrt()).abs() <= 1e-6);
    assert_eq!(value(&report, "violating"), "false");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["max-violation", "--visibility", "1.5"][..],
        &["max-violation", "--angles", "1,2,3"],
        &["sweep", "--mode", "passive", "--g-min", "0.9", "--g-max", "0.1"],
        &["sweep", "--mode", "passive", "--g-steps", "0"],
        &["sweep", "--mode", "active", "--theta3", "0.2"],
        &["sweep", "--mode", "sideways"],
        &["noise", "--visibility", "0.5"],
        &["reproduce-all", "--tolerance", "-1"],
        &["no-such-command"],
    ] {
        let o = fnn(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn passive_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(
        &["sweep", "--mode", "passive", "--g-min", "0.7", "--g-max", "0.9", "--g-steps", "21"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_passive.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("g,r1,r2,r_m,theta3,theta5"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 21);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
    assert!(rows.iter().all(|r| r.len() == 6 && r[3] == r[1].min(r[2])));
    // No grid point has both witnesses above 3.
    assert!(rows.iter().all(|r| r[3] <= 3.0));
    let peak: f64 = value(&stdout(&o), "peak_r_m").parse().unwrap();
    assert!((peak - 2.9596).abs() <= 5e-4);
}

#[test]
fn fixed_angle_sweep_at_custom_angles() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(
        &["sweep", "--mode", "fixed-angle", "--theta3", "0.2122", "--theta5", "0.2929", "--g-steps", "11"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("sweep_fixed_angle.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",0.2122,0.2929")));
}

#[test]
fn noise_check_flags_violation() {
    let dir = tempfile::tempdir().unwrap();
    let o = fnn(&["noise", "--check", "--mode", "standard", "--visibility", "0.95"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(value(&stdout(&o), "standard_status"), "violating");
    let o = fnn(&["noise", "--check", "--mode", "standard", "--visibility", "0.9"], dir.path());
    assert_eq!(value(&stdout(&o), "standard_status"), "non-violating");
}

#[test]
fn reproduce_all_with_tight_tolerance_fails_and_writes_a_valid_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fnn"))
        .args(["reproduce-all", "--tolerance", "1e-9", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains(",FAIL\n"));

    let manifest: RunManifest =
        serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.command, "reproduce-all");
    assert_eq!(manifest.parameters["tolerance"], "0.000000001");
    assert!(manifest.outputs.len() >= 4);
    assert!(manifest.verify(dir.path()).is_empty());
    assert!(manifest.checks.iter().all(|c| c.tolerance == 1e-9));
    // Reference values carry four digits, so at least the rounded ones fail.
    assert!(manifest.checks.iter().any(|c| !c.pass));
    for file in ["sweep_passive.csv", "sweep_active.csv", "sweep_fixed_angle.csv", "checks.csv"] {
        assert!(manifest.outputs.iter().any(|f| f == Path::new(file)), "{file}");
    }
}
