use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = r#"
name = "small"

[source]
pump_wavelength_nm = 788.0
pump_fwhm_nm = 0.7
length_rule = "symmetric"

[source.slowness]
table = "ktp"
signal_axis = "y"
idler_axis = "z"
pump = "symmetric"

[grid]
n_points = 96
span = 0.06e15

[herald]
n = 1
chi = [0.0, 0.1, 0.2, 0.3]
"#;

fn bin(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockherald"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn only_file(dir: &Path, suffix: &str) -> PathBuf {
    let mut hits: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    assert_eq!(hits.len(), 1, "{hits:?}");
    hits.pop().unwrap()
}

#[test]
fn perfect_herald_has_zero_g2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = bin(&["herald"], &cfg, &out);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&only_file(&out, ".csv"));
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[6], "fixed");
    }
    let meta: serde_json::Value = serde_json::from_slice(&std::fs::read(only_file(&out, ".json")).unwrap()).unwrap();
    assert_eq!(meta["verb"], "herald");
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn solve_target_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("chi = [0.0, 0.1, 0.2, 0.3]", "target_fidelity = 0.9")
        + "\n[filter]\nkind = \"gaussian\"\nsigma_f = 1e12\neta = 0.5\n";
    let cfg = write_config(dir.path(), &text);
    let o = bin(&["herald"], &cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&only_file(dir.path(), ".csv"));
    assert_eq!(rows.len(), 1);
    let f: f64 = rows[0][5].parse().unwrap();
    assert!(f >= 0.9 && f - 0.9 < 1e-6 || rows[0][6] == "saturated", "{rows:?}");
}

#[test]
fn config_errors_exit_one_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("n_points = 96", "n_points = 96\nwidth = 3"));
    let o = bin(&["jsa"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("run.toml:17"), "{err}");

    let cfg = write_config(
        dir.path(),
        &SMALL.replace("chi = [0.0, 0.1, 0.2, 0.3]", "chi = 0.1\ntarget_fidelity = 0.9"),
    );
    let o = bin(&["herald"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[herald] chi"));

    let o = bin(&["jsa"], &dir.path().join("missing.toml"), dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_section_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = bin(&["sweep"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn never_overwrites_silently() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert!(bin(&["schmidt"], &cfg, &out).status.success());
    assert!(bin(&["schmidt"], &cfg, &out).status.success());
    let csv = only_file(&out, "_modes.csv");
    let original = std::fs::read(&csv).unwrap();
    std::fs::write(&csv, b"edited\n").unwrap();
    let o = bin(&["schmidt"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read(&csv).unwrap(), b"edited\n");
    assert!(bin(&["schmidt", "--force"], &cfg, &out).status.success());
    assert_eq!(std::fs::read(&csv).unwrap(), original);

    let cfg = write_config(dir.path(), &SMALL.replace("n_points = 96", "n_points = 98"));
    assert!(bin(&["schmidt"], &cfg, &out).status.success());
    let csvs = std::fs::read_dir(&out)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().to_string_lossy().ends_with("_modes.csv"))
        .count();
    assert_eq!(csvs, 2);
}

#[test]
fn schmidt_summary_reports_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = bin(&["schmidt"], &cfg, dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("E = 0.8"), "{stdout}");
}

#[test]
fn oracle_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SMALL}\n[oracle]\nseed = 3\ninstances = 12\n"));
    let o = bin(&["oracle-check"], &cfg, dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("all pass (12/12)"));
}
