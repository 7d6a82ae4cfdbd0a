use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn foldra(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_foldra"))
        .current_dir(dir)
        .env_remove("FOLDRA_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Three-entry table spanning only 20 degrees at 28 GHz.
fn narrow_table(dir: &Path) -> std::path::PathBuf {
    let mut s =
        String::from("freq_ghz,lx_mm,ly_mm,hu_mm,w1_mm,w2_mm,re_rxy,im_rxy,re_ryy,im_ryy\n");
    for (i, deg) in [0.0f64, 10.0, 20.0].iter().enumerate() {
        let (sn, cs) = deg.to_radians().sin_cos();
        s.push_str(&format!(
            "28,{},2,0.2,1,1,{},{},0,0\n",
            1.0 + i as f64,
            0.95 * cs,
            0.95 * sn
        ));
    }
    let p = dir.join("narrow.csv");
    fs::write(&p, s).unwrap();
    p
}

#[test]
fn synthesize_writes_a_full_design() {
    let t = tempfile::tempdir().unwrap();
    let o = foldra(t.path(), &["--out", "o", "synthesize"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = read_json(&t.path().join("o/design.json"));
    assert_eq!(d["elements"].as_array().unwrap().len(), 1984);
}

#[test]
fn out_dir_falls_back_to_environment() {
    let t = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_foldra"))
        .current_dir(t.path())
        .env("FOLDRA_OUT_DIR", "from_env")
        .arg("synthesize")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.path().join("from_env/design.json").is_file());
}

#[test]
fn report_prints_geometry_ratios() {
    let t = tempfile::tempdir().unwrap();
    let o = foldra(t.path(), &["--out", "o", "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("H/D = 0.208"), "{text}");
    assert!(text.contains("efficiency decomposition"));
    assert!(t.path().join("o/report.txt").is_file());
}

#[test]
fn ingest_reports_entries() {
    let t = tempfile::tempdir().unwrap();
    let csv = narrow_table(t.path());
    let o = foldra(t.path(), &["--out", "o", "ingest", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = read_json(&t.path().join("o/ingest.json"));
    assert_eq!(s["entries"], 3);
    assert!(t.path().join("o/phase_table.csv").is_file());
}

#[test]
fn bad_config_exits_2() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("c.json"), r#"{"bogus": 1}"#).unwrap();
    let o = foldra(t.path(), &["--config", "c.json", "synthesize"]);
    assert_eq!(o.status.code(), Some(2));
    let first = stderr(&o).lines().next().unwrap().to_owned();
    assert!(
        first.starts_with("FOLDRA_ERROR kind=config code=2 message="),
        "{first}"
    );
}

#[test]
fn malformed_table_exits_2() {
    let t = tempfile::tempdir().unwrap();
    fs::write(t.path().join("t.csv"), "freq,lx\n28,1\n").unwrap();
    let o = foldra(t.path(), &["--out", "o", "ingest", "t.csv"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn insufficient_coverage_exits_3() {
    let t = tempfile::tempdir().unwrap();
    narrow_table(t.path());
    fs::write(
        t.path().join("c.json"),
        r#"{"source": {"kind": "table", "path": "narrow.csv"}}"#,
    )
    .unwrap();
    let o = foldra(
        t.path(),
        &["--config", "c.json", "--out", "o", "synthesize"],
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).starts_with("FOLDRA_ERROR kind=coverage code=3"));
}

#[test]
fn missing_design_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let o = foldra(
        t.path(),
        &["--out", "o", "analyze", "--design", "absent.json"],
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn zero_threads_is_rejected() {
    let t = tempfile::tempdir().unwrap();
    let o = foldra(t.path(), &["--threads", "0", "synthesize"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let t = tempfile::tempdir().unwrap();
    for (n, dir) in [("1", "a"), ("4", "b")] {
        let o = foldra(
            t.path(),
            &["--threads", n, "--out", dir, "analyze", "--freq", "29"],
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "design.json",
        "metrics_29.000GHz.json",
        "pattern_29.000GHz.csv",
    ] {
        let a = fs::read(t.path().join("a").join(f)).unwrap();
        let b = fs::read(t.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between thread counts");
    }
}

#[test]
fn analyze_reuses_a_saved_design() {
    let t = tempfile::tempdir().unwrap();
    assert!(foldra(t.path(), &["--out", "s", "synthesize"])
        .status
        .success());
    let o = foldra(
        t.path(),
        &[
            "--out",
            "a",
            "analyze",
            "--design",
            "s/design.json",
            "--freq",
            "28",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let m = read_json(&t.path().join("a/metrics_28.000GHz.json"));
    let g = m["metrics"]["realized_gain_dbi"].as_f64().unwrap();
    assert!(g > 30.0 && g < 33.0, "{g}");
    assert!(!t.path().join("a/design.json").exists());
}
