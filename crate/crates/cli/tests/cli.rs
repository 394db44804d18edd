use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_invz"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs")
        .join(name)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn sweep_reduced_low_frequency_magnitude_is_the_cpl_resistance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let run = bin()
        .args(["sweep-reduced", "--config"])
        .arg(config("fig5.json"))
        .args(["--grid", "0.01,100,10", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));

    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "f_hz,re_ohm,im_ohm");
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    let mag = (first[1] * first[1] + first[2] * first[2]).sqrt();
    assert!((mag - 98.0).abs() < 0.1, "low-frequency |Z| = {mag}");
}

#[test]
fn missing_design_field_exits_2_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config("fig5.json")).unwrap()).unwrap();
    cfg["design"].as_object_mut().unwrap().remove("v_dc_nominal");
    fs::write(&bad, serde_json::to_string(&cfg).unwrap()).unwrap();

    let out_csv = dir.path().join("z.csv");
    let run = bin()
        .args(["sweep-reduced", "--config"])
        .arg(&bad)
        .args(["--grid", "1,100,5", "--out"])
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
    assert!(
        stderr(&run).contains("design.v_dc_nominal"),
        "stderr: {}",
        stderr(&run)
    );
    // failed runs must not leave partial artifacts
    assert!(!out_csv.exists());
}

#[test]
fn scenarios_powers_writes_three_reports() {
    let dir = tempfile::tempdir().unwrap();
    let run = bin()
        .args(["scenarios", "--suite", "powers", "--skip-fra", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    let mut reports: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    reports.sort();
    assert_eq!(
        reports,
        ["powers_150kW.txt", "powers_40kW.txt", "powers_5kW.txt"]
    );
    for name in reports {
        let text = fs::read_to_string(dir.path().join(name)).unwrap();
        assert!(text.contains("result: PASS"), "{text}");
    }
}

#[test]
fn process_capture_recovers_known_impedance() {
    let dir = tempfile::tempdir().unwrap();
    let cap = dir.path().join("cap.csv");
    let fs_hz = 10_000.0;
    let f = 100.0;
    let mut text = String::from("t_s,v_V,i_A\n");
    for k in 0..2000 {
        let t = k as f64 / fs_hz;
        let ph = 2.0 * PI * f * t;
        // Z = 50 ohm resistive: v and i in phase
        text.push_str(&format!("{t},{},{}\n", 5.0 * ph.sin(), 0.1 * ph.sin()));
    }
    fs::write(&cap, text).unwrap();

    let run = bin()
        .args(["process-capture", "--capture"])
        .arg(&cap)
        .args(["--freq", "100"])
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(
        stdout(&run).contains("|Z| = 50.000000 ohm"),
        "stdout: {}",
        stdout(&run)
    );
}

#[test]
fn stability_builtin_source_writes_report_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let load = dir.path().join("load.csv");
    let report = dir.path().join("report.txt");
    // dense reduced-model curve across the source filter resonance
    let run = bin()
        .args(["sweep-reduced", "--config"])
        .arg(config("fig5.json"))
        .args(["--grid", "10,10000,40000", "--out"])
        .arg(&load)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));

    let run = bin()
        .args(["stability", "--source", "builtin:rlc:0.01,100e-6,24e-6", "--load"])
        .arg(&load)
        .args(["--report"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("verdict: Unstable"));
    let text = fs::read_to_string(&report).unwrap();
    assert!(text.contains("winding number: -2"), "{text}");

    let run = bin()
        .args(["stability", "--source", "builtin:rlc:0.5,100e-6,24e-6", "--load"])
        .arg(&load)
        .args(["--report"])
        .arg(&report)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", stderr(&run));
    assert!(stdout(&run).contains("verdict: Stable"));
}

#[test]
fn simulate_requires_source_and_rejects_divergence_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config("fig5.json")).unwrap()).unwrap();

    // strip the source section: validation error, exit 2
    let mut no_source = cfg.clone();
    no_source.as_object_mut().unwrap().remove("source");
    let p = dir.path().join("nosource.json");
    fs::write(&p, no_source.to_string()).unwrap();
    let out_csv = dir.path().join("trace.csv");
    let run = bin()
        .args(["simulate", "--config"])
        .arg(&p)
        .args(["--duration", "0.01", "--out"])
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));

    // absurd gain: closed loop diverges, exit 3, no output file
    cfg["controller"]["regulator"]["PI"]["k_p"] = 500.0.into();
    let p = dir.path().join("hot.json");
    fs::write(&p, cfg.to_string()).unwrap();
    let run = bin()
        .args(["simulate", "--config"])
        .arg(&p)
        .args(["--duration", "0.05", "--out"])
        .arg(&out_csv)
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(3), "{}", stderr(&run));
    assert!(!out_csv.exists());
}

#[test]
fn malformed_grid_argument_exits_2() {
    let run = bin()
        .args(["sweep-reduced", "--config"])
        .arg(config("fig5.json"))
        .args(["--grid", "100,1,5", "--out", "/tmp/never.csv"])
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn version_states_the_model_conventions() {
    let run = bin().arg("--version").output().unwrap();
    assert!(run.status.success());
    let text = stdout(&run);
    assert!(text.contains("amplitude-invariant"));
    assert!(text.contains("A sin(wt + p) -> A e^{jp}"));
    assert!(text.contains("into the converter DC port is positive"));
}

#[test]
fn config_round_trips_through_parse_and_serialize() {
    // parse -> serialize -> parse must be semantically identical
    let text = fs::read_to_string(config("table1.json")).unwrap();
    let a: serde_json::Value = serde_json::from_str(&text).unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&serde_json::to_string(&a).unwrap()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn all_shipped_configs_are_usable() {
    for name in ["fig5.json", "fig6.json", "fig7.json", "table1.json"] {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("z.csv");
        let run = bin()
            .args(["sweep-analytic", "--config"])
            .arg(config(name))
            .args(["--grid", "1,2000,20", "--out"])
            .arg(&out)
            .args(["--svg"])
            .arg(dir.path().join("z.svg"))
            .output()
            .unwrap();
        assert!(run.status.success(), "{name}: {}", stderr(&run));
        assert!(out.exists());
        assert!(dir.path().join("z.svg").exists());
    }
}
