//! Run configuration and the end-to-end commands behind the CLI.
//!
//! A run is described by one JSON document. Every field has a default, so
//! `{}` describes the reference prototype. Relative file paths inside the
//! document are resolved against the directory holding it.

mod commands;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::layout::{FeedCutout, FoldedGeometry, LatticeSpec, Provenance, SynthesisOptions};
use crate::pofield::{AnalysisOptions, ElementFactor, FeedModel};
use crate::polarizer::{MpgModel, DEFAULT_RYY_DB, DEFAULT_TXX_DB};
use crate::unitcell::{
    IdealSource, PhaseSource, PhaseTable, SurrogateParams, SurrogateSource, SweepGrid,
    DEFAULT_MIN_CROSS_MAG,
};
use crate::{Error, Freq, Result};

pub use commands::{
    cmd_analyze, cmd_export_stl, cmd_ingest, cmd_report, cmd_sweep, cmd_synthesize,
    reference_values, AnalyzeOutput, FabricationSummary, IngestSummary, ReferenceValues,
    SweepOutput,
};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Version of the metrics, sweep and fabrication JSON documents.
pub const REPORT_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub fold_height_h_mm: f64,
    pub aperture_d_mm: f64,
    pub feed_cutout: FeedCutout,
    pub lattice: LatticeSpec,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        let g = FoldedGeometry::default();
        GeometryConfig {
            fold_height_h_mm: g.fold_height_h,
            aperture_d_mm: g.aperture_d,
            feed_cutout: g.feed_cutout,
            lattice: g.lattice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedConfig {
    /// Half-power beamwidth the `cos^q` model is fitted to.
    pub hpbw_deg: f64,
}

impl Default for FeedConfig {
    fn default() -> Self {
        FeedConfig { hpbw_deg: 40.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpgConfig {
    pub strip_width_mm: f64,
    pub pitch_mm: f64,
    pub r_parallel_db: f64,
    pub t_perp_db: f64,
    /// Validity band of the flat model.
    pub band_ghz: (f64, f64),
    /// Measured or simulated grid response; replaces the flat model.
    pub table: Option<PathBuf>,
}

impl Default for MpgConfig {
    fn default() -> Self {
        let m = MpgModel::default();
        MpgConfig {
            strip_width_mm: m.strip_width_mm,
            pitch_mm: m.pitch_mm,
            r_parallel_db: DEFAULT_RYY_DB,
            t_perp_db: DEFAULT_TXX_DB,
            band_ghz: m.band(),
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Surrogate {
        #[serde(default)]
        params: SurrogateParams,
        #[serde(default)]
        grid: SweepGrid,
    },
    Table {
        path: PathBuf,
    },
    Ideal,
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Surrogate {
            params: SurrogateParams::default(),
            grid: SweepGrid::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub f0_ghz: f64,
    pub min_cross_mag: f64,
    pub phase_offset_deg: Option<f64>,
    pub require_full_coverage: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            f0_ghz: 28.0,
            min_cross_mag: DEFAULT_MIN_CROSS_MAG,
            phase_offset_deg: None,
            require_full_coverage: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Frequency used by `analyze` and `report` unless overridden.
    pub freq_ghz: f64,
    pub element_factor: ElementFactor,
    pub quadrature_step: f64,
    pub radiation_efficiency: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let o = AnalysisOptions::default();
        AnalysisConfig {
            freq_ghz: 29.0,
            element_factor: o.element_factor,
            quadrature_step: o.quadrature_step,
            radiation_efficiency: o.radiation_efficiency,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BandConfig {
    pub f_list_ghz: Vec<f64>,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            f_list_ghz: (25..=32).map(f64::from).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FabricationConfig {
    pub mpg_panel_mm: f64,
    pub strip_h_mm: f64,
    /// Sprayed conductor thickness, listed in the metallization manifest.
    pub ink_mm: f64,
}

impl Default for FabricationConfig {
    fn default() -> Self {
        FabricationConfig {
            mpg_panel_mm: crate::fabricate::DEFAULT_MPG_PANEL_MM,
            strip_h_mm: crate::fabricate::DEFAULT_STRIP_H_MM,
            ink_mm: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub feed: FeedConfig,
    pub mpg: MpgConfig,
    pub source: SourceConfig,
    pub synthesis: SynthesisConfig,
    pub analysis: AnalysisConfig,
    pub band: BandConfig,
    pub fabrication: FabricationConfig,
    pub output_dir: PathBuf,
    /// Seed for stochastic cross-checks; the deterministic pipeline does not
    /// draw from it.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            feed: FeedConfig::default(),
            mpg: MpgConfig::default(),
            source: SourceConfig::default(),
            synthesis: SynthesisConfig::default(),
            analysis: AnalysisConfig::default(),
            band: BandConfig::default(),
            fabrication: FabricationConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("invalid run configuration: {e}")))
    }

    /// Reads, resolves relative paths and validates.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = RunConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let SourceConfig::Table { path } = &mut cfg.source {
            resolve(base, path);
        }
        if let Some(t) = &mut cfg.mpg.table {
            resolve(base, t);
        }
        resolve(base, &mut cfg.output_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| match e {
            Error::Io { .. } => e,
            other => Error::Config(other.to_string()),
        };
        self.folded_geometry().map_err(cfg)?;
        self.feed_model().map_err(cfg)?;
        if let SourceConfig::Table { path } = &self.source {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "phase table {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(t) = &self.mpg.table {
            if !t.is_file() {
                return Err(Error::Config(format!(
                    "grid table {} does not exist",
                    t.display()
                )));
            }
        } else {
            self.mpg_model().map_err(cfg)?;
        }
        if let SourceConfig::Surrogate { params, grid } = &self.source {
            SurrogateSource::new(*params, grid.clone()).map_err(cfg)?;
        }
        for f in [self.synthesis.f0_ghz, self.analysis.freq_ghz] {
            Freq::new(f).map_err(cfg)?;
        }
        let band = &self.band.f_list_ghz;
        if band.len() < 3
            || band.windows(2).any(|w| !(w[1] > w[0]))
            || band.iter().any(|f| !(*f > 0.0))
        {
            return Err(Error::Config(
                "band.f_list_ghz needs at least three increasing positive frequencies".into(),
            ));
        }
        if !(self.synthesis.min_cross_mag > 0.0 && self.synthesis.min_cross_mag <= 1.0) {
            return Err(Error::Config(
                "synthesis.min_cross_mag must lie in (0, 1]".into(),
            ));
        }
        if !(self.analysis.radiation_efficiency > 0.0 && self.analysis.radiation_efficiency <= 1.0)
        {
            return Err(Error::Config(
                "analysis.radiation_efficiency must lie in (0, 1]".into(),
            ));
        }
        if !(self.analysis.quadrature_step > 0.0 && self.analysis.quadrature_step < 0.1) {
            return Err(Error::Config(
                "analysis.quadrature_step must lie in (0, 0.1)".into(),
            ));
        }
        let fab = &self.fabrication;
        if !(fab.mpg_panel_mm > 0.0 && fab.strip_h_mm > 0.0 && fab.ink_mm >= 0.0) {
            return Err(Error::Config(
                "fabrication dimensions must be positive".into(),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, lowercase hex.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn provenance(&self) -> Provenance {
        Provenance {
            toolkit_version: TOOLKIT_VERSION.to_string(),
            config_hash: self.config_hash(),
        }
    }

    pub fn folded_geometry(&self) -> Result<FoldedGeometry> {
        let g = &self.geometry;
        FoldedGeometry::new(
            g.fold_height_h_mm,
            g.aperture_d_mm,
            g.feed_cutout,
            g.lattice,
        )
    }

    pub fn feed_model(&self) -> Result<FeedModel> {
        FeedModel::from_hpbw(self.feed.hpbw_deg)
    }

    pub fn mpg_model(&self) -> Result<MpgModel> {
        let m = &self.mpg;
        let model = match &m.table {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                crate::polarizer::ingest_mpg_csv(file, m.strip_width_mm, m.pitch_mm)?
            }
            None => MpgModel::flat(
                m.strip_width_mm,
                m.pitch_mm,
                m.r_parallel_db,
                m.t_perp_db,
                m.band_ghz,
            ),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn phase_source(&self) -> Result<Box<dyn PhaseSource>> {
        Ok(match &self.source {
            SourceConfig::Surrogate { params, grid } => {
                Box::new(SurrogateSource::new(*params, grid.clone())?)
            }
            SourceConfig::Table { path } => Box::new(PhaseTable::from_path(path)?),
            SourceConfig::Ideal => Box::new(IdealSource),
        })
    }

    pub fn synthesis_options(&self) -> SynthesisOptions {
        SynthesisOptions {
            min_cross_mag: self.synthesis.min_cross_mag,
            phase_offset_deg: self.synthesis.phase_offset_deg,
            require_full_coverage: self.synthesis.require_full_coverage,
        }
    }

    pub fn analysis_options(&self) -> AnalysisOptions {
        AnalysisOptions {
            element_factor: self.analysis.element_factor,
            quadrature_step: self.analysis.quadrature_step,
            radiation_efficiency: self.analysis.radiation_efficiency,
            ..AnalysisOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        c.validate().unwrap();
        let g = c.folded_geometry().unwrap();
        assert_eq!(g.virtual_focal_f, 80.0);
    }

    #[test]
    fn json_round_trip_and_hash() {
        let c = RunConfig::default();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.config_hash(), c.config_hash());
        assert_eq!(c.config_hash().len(), 64);
        let mut d = c.clone();
        d.feed.hpbw_deg = 36.0;
        assert_ne!(d.config_hash(), c.config_hash());
    }

    #[test]
    fn unknown_fields_and_bad_values_rejected() {
        assert!(matches!(
            RunConfig::from_json(r#"{"bogus": 1}"#),
            Err(Error::Config(_))
        ));
        let c = RunConfig::from_json(r#"{"feed": {"hpbw_deg": 0}}"#).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = RunConfig::from_json(r#"{"band": {"f_list_ghz": [28, 27, 29]}}"#).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn missing_table_is_a_config_error() {
        let c =
            RunConfig::from_json(r#"{"source": {"kind": "table", "path": "/nonexistent/t.csv"}}"#)
                .unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.json");
        std::fs::write(&p, r#"{"source": {"kind": "ideal"}, "output_dir": "res"}"#).unwrap();
        let c = RunConfig::from_path(&p).unwrap();
        assert_eq!(c.output_dir, dir.path().join("res"));
        assert_eq!(c.source, SourceConfig::Ideal);
    }
}
