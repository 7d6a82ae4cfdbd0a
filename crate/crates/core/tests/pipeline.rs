use std::fs;

use foldra::layout::{export_design, import_design, DesignedAperture};
use foldra::pipeline::{
    cmd_analyze, cmd_export_stl, cmd_report, cmd_sweep, cmd_synthesize, RunConfig,
};
use foldra::Error;

fn small_band() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.band.f_list_ghz = vec![27.0, 29.0, 31.0];
    cfg
}

#[test]
fn saved_design_reproduces_metrics() {
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mut d = cmd_synthesize(&cfg, dir.path()).unwrap();
    // four populated corner elements keep the check fast
    d.elements
        .retain(|e| !e.omitted && e.x_mm.abs() > 90.0 && e.y_mm.abs() > 90.0);
    assert_eq!(d.elements.len(), 4);
    let p = dir.path().join("four.json");
    export_design(&d, &p).unwrap();
    let back: DesignedAperture = import_design(&p).unwrap();
    assert_eq!(back, d);
    let a = cmd_analyze(&cfg, &d, Some(29.0), &dir.path().join("a")).unwrap();
    let b = cmd_analyze(&cfg, &back, Some(29.0), &dir.path().join("b")).unwrap();
    assert_eq!(a.metrics, b.metrics);
}

#[test]
fn unknown_schema_version_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = cmd_synthesize(&RunConfig::default(), dir.path()).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&d.to_json().unwrap()).unwrap();
    v["schema_version"] = 99.into();
    let p = dir.path().join("future.json");
    fs::write(&p, v.to_string()).unwrap();
    assert!(matches!(
        import_design(&p),
        Err(Error::SchemaVersion { found: 99, .. })
    ));
}

#[test]
fn outputs_carry_the_config_hash() {
    let cfg = small_band();
    let hash = cfg.config_hash();
    let dir = tempfile::tempdir().unwrap();
    let d = cmd_synthesize(&cfg, dir.path()).unwrap();
    assert_eq!(d.provenance.as_ref().unwrap().config_hash, hash);
    cmd_sweep(&cfg, &d, dir.path()).unwrap();
    let csv = fs::read_to_string(dir.path().join("band.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().contains(&hash));
    assert!(lines.next().unwrap().starts_with("freq_ghz,"));
    assert_eq!(lines.count(), 3);
    let band: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("band.json")).unwrap()).unwrap();
    assert_eq!(band["provenance"]["config_hash"], hash.as_str());
}

#[test]
fn export_writes_printable_parts() {
    let cfg = RunConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let d = cmd_synthesize(&cfg, dir.path()).unwrap();
    let s = cmd_export_stl(&cfg, &d, false, dir.path()).unwrap();
    assert!(s.rms.watertight && s.mpg.watertight);
    assert_eq!(s.mpg_strips, 181);
    for f in [
        "rms.stl",
        "mpg.stl",
        "metallization.txt",
        "fabrication.json",
    ] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let stl = fs::read(dir.path().join("rms.stl")).unwrap();
    assert_eq!(stl.len(), 84 + 50 * s.rms.triangles);
    assert!(stl[..80].starts_with(b"foldra "));
}

#[test]
fn report_lists_the_decomposition() {
    let cfg = small_band();
    let dir = tempfile::tempdir().unwrap();
    let d = cmd_synthesize(&cfg, dir.path()).unwrap();
    let text = cmd_report(&cfg, &d, dir.path()).unwrap();
    for needle in [
        "F/D = 0.4167",
        "H/D = 0.208",
        "spillover",
        "polarization chain",
        "realized gain",
    ] {
        assert!(text.contains(needle), "missing {needle}");
    }
    assert_eq!(
        fs::read_to_string(dir.path().join("report.txt")).unwrap(),
        text
    );
}

#[test]
fn relative_table_path_follows_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("cfg");
    fs::create_dir(&sub).unwrap();
    fs::write(
        sub.join("run.json"),
        r#"{"source": {"kind": "table", "path": "cells.csv"}}"#,
    )
    .unwrap();
    match RunConfig::from_path(sub.join("run.json")) {
        Err(Error::Config(m)) => assert!(m.contains("cells.csv"), "{m}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
