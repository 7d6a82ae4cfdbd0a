//! Per-element synthesis and the design file.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emcore::{phase_deg, wrap_deg, wrap_deg_signed};
use crate::unitcell::{CellGeometry, PhaseSource, DEFAULT_MIN_CROSS_MAG};
use crate::{Error, Freq, Result, C64};

use super::{required_phase, ApertureLayout, FoldedGeometry};

pub const DESIGN_SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexRecord {
    fn from(c: C64) -> Self {
        ComplexRecord { re: c.re, im: c.im }
    }
}

impl From<ComplexRecord> for C64 {
    fn from(c: ComplexRecord) -> Self {
        C64::new(c.re, c.im)
    }
}

/// The five sweepable dimensions of an assigned cell.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct GeometryRecord {
    pub lx: f64,
    pub ly: f64,
    pub hu: f64,
    pub w1: f64,
    pub w2: f64,
}

impl From<&CellGeometry> for GeometryRecord {
    fn from(g: &CellGeometry) -> Self {
        GeometryRecord {
            lx: g.l_x,
            ly: g.l_y,
            hu: g.h_u,
            w1: g.w_1,
            w2: g.w_2,
        }
    }
}

impl GeometryRecord {
    pub fn to_cell(&self, geom: &FoldedGeometry) -> CellGeometry {
        CellGeometry {
            l_x: self.lx,
            l_y: self.ly,
            h_u: self.hu,
            w_1: self.w1,
            w_2: self.w2,
            period_p: geom.lattice.period_p,
            substrate_h_s: geom.lattice.substrate_h_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignedElement {
    pub x_mm: f64,
    pub y_mm: f64,
    pub quadrant: u8,
    /// Site lies in the feed cutout: no geometry, does not radiate.
    #[serde(default)]
    pub omitted: bool,
    pub geometry: Option<GeometryRecord>,
    pub required_phase_deg: f64,
    pub achieved_rxy: ComplexRecord,
    #[serde(default = "zero_record")]
    pub achieved_ryy: ComplexRecord,
    pub phase_error_deg: f64,
}

fn zero_record() -> ComplexRecord {
    ComplexRecord { re: 0.0, im: 0.0 }
}

/// Origin of a generated file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit_version: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignedAperture {
    pub schema_version: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    pub folded_geometry: FoldedGeometry,
    pub frequency_ghz: f64,
    pub elements: Vec<DesignedElement>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisOptions {
    pub min_cross_mag: f64,
    /// Reference phase added to every element. `None` centres the aperture
    /// on the midpoint of the source's covered span.
    pub phase_offset_deg: Option<f64>,
    /// Refuse sources that cover less than a full turn.
    pub require_full_coverage: bool,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            min_cross_mag: DEFAULT_MIN_CROSS_MAG,
            phase_offset_deg: None,
            require_full_coverage: true,
        }
    }
}

/// Summary statistics of a synthesized aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub element_count: usize,
    pub omitted_count: usize,
    pub rms_phase_error_deg: f64,
    pub max_abs_phase_error_deg: f64,
    pub cross_mag_min: f64,
    pub cross_mag_mean: f64,
    pub cross_mag_max: f64,
    pub distinct_geometries: usize,
    /// `(geometry, count)`, ordered by geometry.
    pub geometry_usage: Vec<(GeometryRecord, usize)>,
}

impl DesignedAperture {
    pub fn active(&self) -> impl Iterator<Item = &DesignedElement> {
        self.elements.iter().filter(|e| !e.omitted)
    }

    pub fn frequency(&self) -> Result<Freq> {
        Freq::new(self.frequency_ghz)
    }

    pub fn report(&self) -> SynthesisReport {
        let act: Vec<&DesignedElement> = self.active().collect();
        let n = act.len().max(1) as f64;
        let errs: Vec<f64> = act.iter().map(|e| e.phase_error_deg).collect();
        let mags: Vec<f64> = act
            .iter()
            .map(|e| C64::from(e.achieved_rxy).norm())
            .collect();
        let mut usage: BTreeMap<[u64; 5], (GeometryRecord, usize)> = BTreeMap::new();
        for e in &act {
            if let Some(g) = e.geometry {
                let key = [g.lx, g.ly, g.hu, g.w1, g.w2].map(f64::to_bits);
                usage.entry(key).or_insert((g, 0)).1 += 1;
            }
        }
        let mut geometry_usage: Vec<(GeometryRecord, usize)> = usage.into_values().collect();
        geometry_usage.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        SynthesisReport {
            element_count: self.elements.len(),
            omitted_count: self.elements.len() - act.len(),
            rms_phase_error_deg: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
            max_abs_phase_error_deg: errs.iter().fold(0.0, |a, e| a.max(e.abs())),
            cross_mag_min: if mags.is_empty() {
                0.0
            } else {
                mags.iter().copied().fold(f64::INFINITY, f64::min)
            },
            cross_mag_mean: mags.iter().sum::<f64>() / n,
            cross_mag_max: mags.iter().copied().fold(0.0, f64::max),
            distinct_geometries: geometry_usage.len(),
            geometry_usage,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Malformed(format!("design serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Malformed(format!("design JSON: {e}")))?;
        let found = v
            .get("schema_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| {
                Error::Malformed("design JSON lacks an integer schema_version".into())
            })?;
        if found != DESIGN_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found,
                expected: DESIGN_SCHEMA_VERSION,
            });
        }
        let d: DesignedAperture =
            serde_json::from_value(v).map_err(|e| Error::Malformed(format!("design JSON: {e}")))?;
        d.folded_geometry.validate()?;
        d.frequency()?;
        for (i, e) in d.elements.iter().enumerate() {
            if e.omitted != e.geometry.is_none() {
                return Err(Error::Malformed(format!(
                    "element {i}: geometry must be present exactly when the element is not omitted"
                )));
            }
        }
        Ok(d)
    }
}

pub fn export_design(design: &DesignedAperture, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = design.to_json()?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_design(path: impl AsRef<Path>) -> Result<DesignedAperture> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DesignedAperture::from_json(&text)
}

/// Assigns every non-omitted site the cell whose cross-polar phase best
/// matches the required collimating phase at `f0`.
pub fn synthesize(
    layout: &ApertureLayout,
    geom: &FoldedGeometry,
    source: &dyn PhaseSource,
    f0: Freq,
    opts: &SynthesisOptions,
) -> Result<DesignedAperture> {
    geom.validate()?;
    let matcher = source.matcher(f0, opts.min_cross_mag)?;
    let coverage = matcher.coverage();
    if opts.require_full_coverage {
        let cov = match &coverage {
            Ok(c) => *c,
            Err(Error::Coverage { message, span_deg }) => {
                return Err(Error::Coverage {
                    message: message.clone(),
                    span_deg: *span_deg,
                })
            }
            Err(e) => return Err(Error::Config(e.to_string())),
        };
        if cov.span_deg < 360.0 {
            return Err(Error::Coverage {
                message: format!(
                    "{} covers less than 360 deg at {} GHz",
                    source.label(),
                    f0.ghz()
                ),
                span_deg: cov.span_deg,
            });
        }
    }
    let offset = match (opts.phase_offset_deg, &coverage) {
        (Some(o), _) => o,
        (None, Ok(c)) => wrap_deg(c.midpoint_deg()),
        (None, Err(_)) => 0.0,
    };

    let elements = layout
        .elements
        .par_iter()
        .map(|site| {
            let req = required_phase(site.x_mm, site.y_mm, f0, geom, offset);
            if site.in_cutout {
                return Ok(DesignedElement {
                    x_mm: site.x_mm,
                    y_mm: site.y_mm,
                    quadrant: site.quadrant,
                    omitted: true,
                    geometry: None,
                    required_phase_deg: req,
                    achieved_rxy: zero_record(),
                    achieved_ryy: zero_record(),
                    phase_error_deg: 0.0,
                });
            }
            let c = matcher.best(req)?;
            Ok(DesignedElement {
                x_mm: site.x_mm,
                y_mm: site.y_mm,
                quadrant: site.quadrant,
                omitted: false,
                geometry: Some(GeometryRecord::from(&c.geometry)),
                required_phase_deg: req,
                achieved_rxy: c.r_xy.into(),
                achieved_ryy: c.r_yy.into(),
                phase_error_deg: wrap_deg_signed(phase_deg(c.r_xy) - req),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DesignedAperture {
        schema_version: DESIGN_SCHEMA_VERSION,
        provenance: None,
        folded_geometry: *geom,
        frequency_ghz: f0.ghz(),
        elements,
    })
}
