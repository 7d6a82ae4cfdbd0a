//! The six commands. Each writes deterministic artifacts into `out` and
//! returns what it wrote.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunConfig, REPORT_SCHEMA_VERSION, TOOLKIT_VERSION};
use crate::fabricate::{
    assemble_rms_mesh, export_stl_binary_labeled, mesh_volume, metallization_manifest,
    mpg_grid_mesh, mpg_strip_count, watertight_check,
};
use crate::layout::{export_design, generate_lattice, synthesize, DesignedAperture, Provenance};
use crate::pofield::{
    analyze, band_sweep, export_pattern_csv, spillover_efficiency, BandSweep, PatternMetrics,
};
use crate::unitcell::{ingest_phase_table, phase_coverage, PhaseTable};
use crate::{Error, Freq, Result};

fn ensure_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Malformed(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn csv_banner(p: &Provenance) -> String {
    format!("# foldra {} config {}\n", p.toolkit_version, p.config_hash)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyCoverage {
    pub freq_ghz: f64,
    pub qualifying_span_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub schema_version: u64,
    pub toolkit_version: String,
    /// SHA-256 of the ingested file.
    pub input_sha256: String,
    pub entries: usize,
    pub coverage: Vec<FrequencyCoverage>,
}

/// Validates a sweep table and writes its normalized form with a summary.
pub fn cmd_ingest(csv: &Path, min_cross_mag: f64, out: &Path) -> Result<IngestSummary> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(csv).map_err(|e| Error::io(csv, e))?;
    let table: PhaseTable = ingest_phase_table(&bytes[..])?;
    ensure_dir(out)?;
    table.write_path(out.join("phase_table.csv"))?;
    let coverage = table
        .frequencies()
        .into_iter()
        .map(|f| FrequencyCoverage {
            freq_ghz: f,
            qualifying_span_deg: Freq::new(f)
                .and_then(|fr| phase_coverage(&table, fr, min_cross_mag))
                .ok()
                .map(|c| c.span_deg),
        })
        .collect();
    let summary = IngestSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        input_sha256: Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
        entries: table.len(),
        coverage,
    };
    write_json(&out.join("ingest.json"), &summary)?;
    Ok(summary)
}

/// Lays out the aperture, assigns geometries at `f0` and writes
/// `design.json`.
pub fn cmd_synthesize(cfg: &RunConfig, out: &Path) -> Result<DesignedAperture> {
    let geom = cfg.folded_geometry()?;
    let layout = generate_lattice(&geom)?;
    let source = cfg.phase_source()?;
    let f0 = Freq::new(cfg.synthesis.f0_ghz)?;
    let mut design = synthesize(
        &layout,
        &geom,
        source.as_ref(),
        f0,
        &cfg.synthesis_options(),
    )?;
    design.provenance = Some(cfg.provenance());
    ensure_dir(out)?;
    export_design(&design, out.join("design.json"))?;
    Ok(design)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeOutput {
    pub schema_version: u64,
    pub provenance: Provenance,
    pub source: String,
    pub design_frequency_ghz: f64,
    pub feed_q: f64,
    pub metrics: PatternMetrics,
    #[serde(skip)]
    pub files: Vec<PathBuf>,
}

fn analysis_at(
    cfg: &RunConfig,
    design: &DesignedAperture,
    f: Freq,
) -> Result<(AnalyzeOutput, crate::pofield::Analysis)> {
    let source = cfg.phase_source()?;
    let feed = cfg.feed_model()?;
    let a = analyze(
        design,
        source.as_ref(),
        &feed,
        &cfg.mpg_model()?,
        f,
        &cfg.analysis_options(),
    )?;
    let out = AnalyzeOutput {
        schema_version: REPORT_SCHEMA_VERSION,
        provenance: cfg.provenance(),
        source: source.label(),
        design_frequency_ghz: design.frequency_ghz,
        feed_q: feed.q_exponent,
        metrics: a.metrics.clone(),
        files: Vec::new(),
    };
    Ok((out, a))
}

/// Illuminates the design at `freq` (default: the configured analysis
/// frequency) and writes the metrics JSON and the principal-cut CSV.
pub fn cmd_analyze(
    cfg: &RunConfig,
    design: &DesignedAperture,
    freq: Option<f64>,
    out: &Path,
) -> Result<AnalyzeOutput> {
    let f = Freq::new(freq.unwrap_or(cfg.analysis.freq_ghz))?;
    let (mut report, a) = analysis_at(cfg, design, f)?;
    ensure_dir(out)?;
    let tag = format!("{:.3}GHz", f.ghz());
    let metrics_path = out.join(format!("metrics_{tag}.json"));
    write_json(&metrics_path, &report)?;
    let pattern_path = out.join(format!("pattern_{tag}.csv"));
    let mut csv = csv_banner(&report.provenance).into_bytes();
    export_pattern_csv(&a.pattern, &mut csv).map_err(|e| Error::io(&pattern_path, e))?;
    fs::write(&pattern_path, csv).map_err(|e| Error::io(&pattern_path, e))?;
    report.files = vec![metrics_path, pattern_path];
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub schema_version: u64,
    pub provenance: Provenance,
    pub source: String,
    pub design_frequency_ghz: f64,
    pub sweep: BandSweep,
}

/// Analyzes the design over the configured band; writes `band.json` and a
/// per-frequency `band.csv`.
pub fn cmd_sweep(cfg: &RunConfig, design: &DesignedAperture, out: &Path) -> Result<SweepOutput> {
    let source = cfg.phase_source()?;
    let sweep = band_sweep(
        design,
        source.as_ref(),
        &cfg.feed_model()?,
        &cfg.mpg_model()?,
        &cfg.band.f_list_ghz,
        &cfg.analysis_options(),
    )?;
    let report = SweepOutput {
        schema_version: REPORT_SCHEMA_VERSION,
        provenance: cfg.provenance(),
        source: source.label(),
        design_frequency_ghz: design.frequency_ghz,
        sweep,
    };
    ensure_dir(out)?;
    write_json(&out.join("band.json"), &report)?;
    let mut csv = csv_banner(&report.provenance);
    csv.push_str("freq_ghz,realized_gain_dbi,directivity_dbi,hpbw_xoz_deg,hpbw_yoz_deg,sll_db,xpol_db,aperture_efficiency\n");
    for p in &report.sweep.points {
        let _ = writeln!(
            csv,
            "{:.3},{:.4},{:.4},{:.4},{:.4},{:.3},{:.3},{:.5}",
            p.freq_ghz,
            p.realized_gain_dbi,
            p.directivity_dbi,
            p.hpbw_xoz_deg,
            p.hpbw_yoz_deg,
            p.sll_db,
            p.xpol_level_db,
            p.aperture_efficiency
        );
    }
    write_text(&out.join("band.csv"), &csv)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub file: String,
    pub triangles: usize,
    pub volume_mm3: f64,
    pub watertight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FabricationSummary {
    pub schema_version: u64,
    pub provenance: Provenance,
    pub rms: MeshSummary,
    pub mpg: MeshSummary,
    pub mpg_strips: usize,
}

/// Writes `rms.stl`, `mpg.stl`, `metallization.txt` and
/// `fabrication.json`. Non-watertight meshes are refused unless `force`.
pub fn cmd_export_stl(
    cfg: &RunConfig,
    design: &DesignedAperture,
    force: bool,
    out: &Path,
) -> Result<FabricationSummary> {
    let g = &design.folded_geometry;
    let mpg = cfg.mpg_model()?;
    let fab = &cfg.fabrication;
    let rms = assemble_rms_mesh(design, g.lattice.substrate_h_s, g.aperture_d)?;
    let panel = fab.mpg_panel_mm;
    let grid = mpg_grid_mesh(
        &mpg,
        (panel, panel),
        g.lattice.substrate_h_s,
        fab.strip_h_mm,
    )?;
    ensure_dir(out)?;
    let summarize = |name: &str, mesh: &crate::fabricate::Mesh| -> Result<MeshSummary> {
        let label = format!("foldra {} {}", TOOLKIT_VERSION, cfg.config_hash());
        export_stl_binary_labeled(mesh, out.join(name), &label, force)?;
        Ok(MeshSummary {
            file: name.to_string(),
            triangles: mesh.triangle_count(),
            volume_mm3: mesh_volume(mesh),
            watertight: watertight_check(mesh).is_watertight(),
        })
    };
    let report = FabricationSummary {
        schema_version: REPORT_SCHEMA_VERSION,
        provenance: cfg.provenance(),
        rms: summarize("rms.stl", &rms)?,
        mpg: summarize("mpg.stl", &grid)?,
        mpg_strips: mpg_strip_count(panel, mpg.pitch_mm),
    };
    let p = &report.provenance;
    let manifest = format!(
        "{}{}",
        csv_banner(p),
        metallization_manifest(design, &mpg, fab.ink_mm)
    );
    write_text(&out.join("metallization.txt"), &manifest)?;
    write_json(&out.join("fabrication.json"), &report)?;
    Ok(report)
}

/// Published figures the report compares against. They are reference
/// values, not outputs of this toolkit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceValues {
    pub schema_version: u64,
    pub label: String,
    pub simulated: SimulatedReference,
    pub measured: MeasuredReference,
    pub geometry: GeometryReference,
    pub comparison_row: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedReference {
    pub peak_realized_gain_dbi: f64,
    pub peak_gain_freq_ghz: f64,
    pub aperture_efficiency: f64,
    pub hpbw_min_deg: f64,
    pub hpbw_max_deg: f64,
    pub sll_max_db: f64,
    pub xpol_max_db: f64,
    pub gain_bw_1db_percent: f64,
    pub gain_bw_3db_percent: f64,
    pub radiation_efficiency_min: f64,
    pub impedance_bw_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredReference {
    pub peak_realized_gain_dbi: f64,
    pub peak_gain_freq_ghz: f64,
    pub aperture_efficiency: f64,
    pub gain_bw_3db_percent: f64,
    pub impedance_bw_percent: f64,
    pub average_hpbw_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryReference {
    pub aperture_d_mm: f64,
    pub fold_height_mm: f64,
    pub f_over_d: f64,
    pub h_over_d: f64,
    pub unit_cells: usize,
    pub phase_coverage_min_deg: f64,
    pub mpg_strips: usize,
}

const REFERENCE_JSON: &str = include_str!("reference.json");

pub fn reference_values() -> ReferenceValues {
    serde_json::from_str(REFERENCE_JSON).expect("bundled reference values parse")
}

/// Human-readable summary: geometry, synthesis quality, the efficiency
/// decomposition at the analysis frequency, the band sweep and a
/// side-by-side with the published reference values. Written to
/// `report.txt`.
pub fn cmd_report(cfg: &RunConfig, design: &DesignedAperture, out: &Path) -> Result<String> {
    let g = &design.folded_geometry;
    let rep = design.report();
    let f = Freq::new(cfg.analysis.freq_ghz)?;
    let (a, _) = analysis_at(cfg, design, f)?;
    let source = cfg.phase_source()?;
    let sweep = band_sweep(
        design,
        source.as_ref(),
        &cfg.feed_model()?,
        &cfg.mpg_model()?,
        &cfg.band.f_list_ghz,
        &cfg.analysis_options(),
    )?;
    let coverage = phase_coverage(
        source.as_ref(),
        design.frequency()?,
        cfg.synthesis.min_cross_mag,
    )
    .ok();
    let r = reference_values();
    let m = &a.metrics;
    let e = &m.efficiency;
    let db = |x: f64| 10.0 * x.log10();

    let mut s = String::new();
    let _ = writeln!(s, "foldra {TOOLKIT_VERSION}");
    let _ = writeln!(s, "config sha256 {}", a.provenance.config_hash);
    if let Some(p) = &design.provenance {
        if p.config_hash != a.provenance.config_hash {
            let _ = writeln!(s, "note: design was produced with config {}", p.config_hash);
        }
    }
    let _ = writeln!(s, "source {}", a.source);
    let _ = writeln!(s);
    let _ = writeln!(s, "geometry");
    let _ = writeln!(
        s,
        "  D = {:.3} mm, H = {:.3} mm, F = {:.3} mm",
        g.aperture_d, g.fold_height_h, g.virtual_focal_f
    );
    let _ = writeln!(s, "  F/D = {:.4}", g.f_over_d());
    let _ = writeln!(s, "  H/D = {:.3}", g.h_over_d());
    let _ = writeln!(
        s,
        "  sites {} ({} populated, {} omitted at the feed cutout)",
        rep.element_count,
        rep.element_count - rep.omitted_count,
        rep.omitted_count
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "synthesis at {:.3} GHz", design.frequency_ghz);
    if let Some(c) = coverage {
        let _ = writeln!(s, "  phase coverage {:.1} deg", c.span_deg);
    }
    let _ = writeln!(
        s,
        "  phase error rms {:.3} deg, max {:.3} deg",
        rep.rms_phase_error_deg, rep.max_abs_phase_error_deg
    );
    let _ = writeln!(
        s,
        "  |r_xy| min {:.4}, mean {:.4}; {} distinct geometries",
        rep.cross_mag_min, rep.cross_mag_mean, rep.distinct_geometries
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "efficiency decomposition at {:.3} GHz", m.freq_ghz);
    let _ = writeln!(
        s,
        "  uniform-aperture directivity {:>8.2} dBi",
        m.uniform_directivity_dbi
    );
    let _ = writeln!(
        s,
        "  illumination loss            {:>8.2} dB",
        -m.illumination_loss_db
    );
    let _ = writeln!(
        s,
        "  directivity                  {:>8.2} dBi",
        m.directivity_dbi
    );
    let _ = writeln!(
        s,
        "  spillover                    {:>8.2} dB  ({:.4})",
        db(e.spillover),
        e.spillover
    );
    let _ = writeln!(
        s,
        "  cutout fill                  {:>8.2} dB  ({:.4})",
        db(e.cutout_fill),
        e.cutout_fill
    );
    let _ = writeln!(
        s,
        "  polarization chain           {:>8.2} dB  ({:.4})",
        db(e.polarization_chain),
        e.polarization_chain
    );
    let _ = writeln!(
        s,
        "  radiation                    {:>8.2} dB  ({:.4})",
        db(e.radiation),
        e.radiation
    );
    let _ = writeln!(
        s,
        "  realized gain                {:>8.2} dBi",
        m.realized_gain_dbi
    );
    let _ = writeln!(
        s,
        "  aperture efficiency          {:>8.1} %",
        100.0 * m.aperture_efficiency
    );
    let _ = writeln!(
        s,
        "  HPBW xoz {:.2} deg, yoz {:.2} deg; SLL {:.2} dB; X-pol {:.2} dB",
        m.hpbw_xoz_deg, m.hpbw_yoz_deg, m.sll_db, m.xpol_level_db
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "band");
    let _ = writeln!(
        s,
        "  freq_ghz  gain_dbi  hpbw_xoz  hpbw_yoz  sll_db  xpol_db"
    );
    for p in &sweep.points {
        let _ = writeln!(
            s,
            "  {:>8.3}  {:>8.2}  {:>8.2}  {:>8.2}  {:>6.2}  {:>7.2}",
            p.freq_ghz,
            p.realized_gain_dbi,
            p.hpbw_xoz_deg,
            p.hpbw_yoz_deg,
            p.sll_db,
            p.xpol_level_db
        );
    }
    let bw = |b: &crate::pofield::Bandwidth| {
        format!(
            "{:.2} % ({:.3}-{:.3} GHz{})",
            b.percent,
            b.f_lo_ghz,
            b.f_hi_ghz,
            if b.truncated {
                ", limited by the sweep"
            } else {
                ""
            }
        )
    };
    let _ = writeln!(
        s,
        "  peak {:.2} dBi at {:.3} GHz",
        sweep.peak_gain_dbi, sweep.peak_freq_ghz
    );
    let _ = writeln!(s, "  1 dB gain bandwidth {}", bw(&sweep.bw_1db));
    let _ = writeln!(s, "  3 dB gain bandwidth {}", bw(&sweep.bw_3db));
    let _ = writeln!(s);
    let _ = writeln!(s, "comparison with {}", r.label);
    let _ = writeln!(
        s,
        "  {:<30} {:>12} {:>12}",
        "quantity", "computed", "reference"
    );
    let mut row = |name: &str, computed: String, reference: String| {
        let _ = writeln!(s, "  {name:<30} {computed:>12} {reference:>12}");
    };
    row(
        "F/D",
        format!("{:.4}", g.f_over_d()),
        format!("{:.2}", r.geometry.f_over_d),
    );
    row(
        "H/D",
        format!("{:.3}", g.h_over_d()),
        format!("{:.3}", r.geometry.h_over_d),
    );
    row(
        "unit cells",
        format!("{}", rep.element_count),
        format!("{}", r.geometry.unit_cells),
    );
    if let Some(c) = coverage {
        row(
            "phase coverage, deg",
            format!("{:.1}", c.span_deg),
            format!("> {:.0}", r.geometry.phase_coverage_min_deg),
        );
    }
    row(
        "realized gain @ 29 GHz, dBi",
        format!("{:.2}", m.realized_gain_dbi),
        format!("{:.2}", r.simulated.peak_realized_gain_dbi),
    );
    row(
        "aperture efficiency, %",
        format!("{:.1}", 100.0 * m.aperture_efficiency),
        format!("{:.1}", 100.0 * r.simulated.aperture_efficiency),
    );
    let (hmin, hmax) = sweep
        .points
        .iter()
        .flat_map(|p| [p.hpbw_xoz_deg, p.hpbw_yoz_deg])
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
            (l.min(x), h.max(x))
        });
    row(
        "HPBW over band, deg",
        format!("{hmin:.2}-{hmax:.2}"),
        format!(
            "{:.1}-{:.1}",
            r.simulated.hpbw_min_deg, r.simulated.hpbw_max_deg
        ),
    );
    let sll = sweep
        .points
        .iter()
        .map(|p| p.sll_db)
        .fold(f64::NEG_INFINITY, f64::max);
    row(
        "worst SLL, dB",
        format!("{sll:.2}"),
        format!("< {:.0}", r.simulated.sll_max_db),
    );
    let xp = sweep
        .points
        .iter()
        .map(|p| p.xpol_level_db)
        .fold(f64::NEG_INFINITY, f64::max);
    row(
        "worst X-pol, dB",
        format!("{xp:.2}"),
        format!("< {:.0}", r.simulated.xpol_max_db),
    );
    row(
        "1 dB gain bandwidth, %",
        format!("{:.2}", sweep.bw_1db.percent),
        format!("{:.2}", r.simulated.gain_bw_1db_percent),
    );
    row(
        "3 dB gain bandwidth, %",
        format!("{:.2}", sweep.bw_3db.percent),
        format!("{:.2}", r.simulated.gain_bw_3db_percent),
    );
    row(
        "measured peak gain, dBi",
        "-".into(),
        format!("{:.1}", r.measured.peak_realized_gain_dbi),
    );
    row(
        "spillover (feed model)",
        format!("{:.4}", spillover_efficiency(&cfg.feed_model()?, g)),
        "-".into(),
    );

    ensure_dir(out)?;
    write_text(&out.join("report.txt"), &s)?;
    Ok(s)
}
