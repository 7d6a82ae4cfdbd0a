//! Folded geometry, triangular-lattice aperture and phase synthesis.
//!
//! The feed is mirrored in the polarizer plane, so for phase purposes the
//! aperture behaves like a front-fed reflectarray with focal length `F = 2H`.

mod design;

use serde::{Deserialize, Serialize};

use crate::emcore::wrap_deg;
use crate::{Error, Freq, Result};

pub use design::{
    export_design, import_design, synthesize, ComplexRecord, DesignedAperture, DesignedElement,
    GeometryRecord, Provenance, SynthesisOptions, SynthesisReport, DESIGN_SCHEMA_VERSION,
};

/// Mirror image of the feed in the polarizer plane: `F = 2h`.
pub fn virtual_focus(h_mm: f64) -> Result<f64> {
    if h_mm > 0.0 && h_mm.is_finite() {
        Ok(2.0 * h_mm)
    } else {
        Err(Error::Domain(format!(
            "fold height must be positive, got {h_mm} mm"
        )))
    }
}

/// Rectangular feed aperture, centred on the axis and rotated in-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedCutout {
    pub width_mm: f64,
    pub length_mm: f64,
    pub rotation_deg: f64,
}

impl Default for FeedCutout {
    fn default() -> Self {
        FeedCutout {
            width_mm: 18.5,
            length_mm: 14.9,
            rotation_deg: 45.0,
        }
    }
}

impl FeedCutout {
    pub fn none() -> Self {
        FeedCutout {
            width_mm: 0.0,
            length_mm: 0.0,
            rotation_deg: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.width_mm <= 0.0 || self.length_mm <= 0.0
    }

    pub fn area_mm2(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.width_mm * self.length_mm
        }
    }

    /// Point expressed in the cutout frame.
    pub fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        (c * x + s * y, -s * x + c * y)
    }

    /// Corners in the global frame, counter-clockwise.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let (a, b) = (self.width_mm / 2.0, self.length_mm / 2.0);
        [(a, b), (-a, b), (-a, -b), (a, -b)].map(|(u, v)| (c * u - s * v, s * u + c * v))
    }

    /// Whether a square of half-size `half` centred at `(x, y)`, aligned with
    /// the cutout frame, intersects the cutout interior.
    pub fn overlaps(&self, x: f64, y: f64, half: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let (u, v) = self.to_local(x, y);
        u.abs() < self.width_mm / 2.0 + half && v.abs() < self.length_mm / 2.0 + half
    }
}

/// Staggered lattice of one quadrant tile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Column pitch.
    pub period_p: f64,
    /// Row pitch, also the stagger of odd rows.
    pub neighbor_spacing: f64,
    pub tile_cols: usize,
    pub tile_rows: usize,
    /// Position of the first site of each tile relative to the aperture
    /// centre, per axis.
    pub origin_offset_mm: f64,
    /// Half-size of the square (in the cutout frame) an element may occupy;
    /// sites whose square meets the cutout are omitted.
    pub element_keepout_mm: f64,
    pub substrate_h_s: f64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        LatticeSpec {
            period_p: 6.0,
            neighbor_spacing: 3.0,
            tile_cols: 16,
            tile_rows: 31,
            origin_offset_mm: 1.5,
            element_keepout_mm: 2.6,
            substrate_h_s: 0.4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldedGeometry {
    pub fold_height_h: f64,
    pub aperture_d: f64,
    pub virtual_focal_f: f64,
    pub feed_cutout: FeedCutout,
    pub lattice: LatticeSpec,
}

impl Default for FoldedGeometry {
    fn default() -> Self {
        FoldedGeometry {
            fold_height_h: 40.0,
            aperture_d: 192.0,
            virtual_focal_f: 80.0,
            feed_cutout: FeedCutout::default(),
            lattice: LatticeSpec::default(),
        }
    }
}

impl FoldedGeometry {
    pub fn new(
        fold_height_h: f64,
        aperture_d: f64,
        feed_cutout: FeedCutout,
        lattice: LatticeSpec,
    ) -> Result<Self> {
        let g = FoldedGeometry {
            fold_height_h,
            aperture_d,
            virtual_focal_f: virtual_focus(fold_height_h)?,
            feed_cutout,
            lattice,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn f_over_d(&self) -> f64 {
        self.virtual_focal_f / self.aperture_d
    }

    pub fn h_over_d(&self) -> f64 {
        self.fold_height_h / self.aperture_d
    }

    pub fn validate(&self) -> Result<()> {
        let f = virtual_focus(self.fold_height_h).map_err(|e| Error::Config(e.to_string()))?;
        if (self.virtual_focal_f - f).abs() > 1e-9 * f {
            return Err(Error::Config(format!(
                "virtual focal length {} mm must equal twice the fold height ({f} mm)",
                self.virtual_focal_f
            )));
        }
        if !(self.aperture_d > 0.0 && self.aperture_d.is_finite()) {
            return Err(Error::Config(format!(
                "aperture size must be positive, got {}",
                self.aperture_d
            )));
        }
        let c = &self.feed_cutout;
        if c.width_mm < 0.0 || c.length_mm < 0.0 {
            return Err(Error::Config(
                "feed cutout dimensions must be non-negative".into(),
            ));
        }
        let half = self.aperture_d / 2.0;
        if c.corners()
            .iter()
            .any(|(x, y)| x.abs() >= half || y.abs() >= half)
            && !c.is_empty()
        {
            return Err(Error::Config(
                "feed cutout does not fit inside the aperture".into(),
            ));
        }
        let l = &self.lattice;
        if !(l.period_p > 0.0
            && l.neighbor_spacing > 0.0
            && l.substrate_h_s > 0.0
            && l.element_keepout_mm >= 0.0)
        {
            return Err(Error::Config(format!(
                "lattice parameters must be positive: {l:?}"
            )));
        }
        if l.tile_cols == 0 || l.tile_rows == 0 {
            return Err(Error::Config("tile dimensions must be at least 1x1".into()));
        }
        if l.origin_offset_mm < 0.0 {
            return Err(Error::Config(
                "lattice origin offset must be non-negative".into(),
            ));
        }
        let stagger = if l.tile_rows > 1 {
            l.neighbor_spacing
        } else {
            0.0
        };
        let max_x = l.origin_offset_mm + l.period_p * (l.tile_cols - 1) as f64 + stagger;
        let max_y = l.origin_offset_mm + l.neighbor_spacing * (l.tile_rows - 1) as f64;
        if max_x > half + 1e-9 || max_y > half + 1e-9 {
            return Err(Error::Config(format!(
                "tile extends to ({max_x}, {max_y}) mm, outside the {half} mm half-aperture"
            )));
        }
        Ok(())
    }
}

/// One lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSite {
    pub x_mm: f64,
    pub y_mm: f64,
    /// 1: +x+y, 2: −x+y, 3: −x−y, 4: +x−y.
    pub quadrant: u8,
    /// Site meets the feed cutout and carries no element.
    pub in_cutout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureLayout {
    pub elements: Vec<LatticeSite>,
}

impl ApertureLayout {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn omitted(&self) -> impl Iterator<Item = &LatticeSite> {
        self.elements.iter().filter(|e| e.in_cutout)
    }

    pub fn active(&self) -> impl Iterator<Item = &LatticeSite> {
        self.elements.iter().filter(|e| !e.in_cutout)
    }

    /// Smallest centre-to-centre distance over all sites (brute force).
    pub fn min_neighbor_distance(&self) -> f64 {
        let p = &self.elements;
        let mut best = f64::INFINITY;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                let d = (p[i].x_mm - p[j].x_mm).hypot(p[i].y_mm - p[j].y_mm);
                best = best.min(d);
            }
        }
        best
    }
}

/// Builds the four mirrored quadrant tiles, ordered by `y` then `x`.
pub fn generate_lattice(geom: &FoldedGeometry) -> Result<ApertureLayout> {
    geom.validate()?;
    let l = &geom.lattice;
    let mut elements = Vec::with_capacity(4 * l.tile_cols * l.tile_rows);
    let mut omitted_per_quadrant = [0usize; 4];
    for i in 0..l.tile_rows {
        let y = l.origin_offset_mm + l.neighbor_spacing * i as f64;
        let stagger = if i % 2 == 1 { l.neighbor_spacing } else { 0.0 };
        for j in 0..l.tile_cols {
            let x = l.origin_offset_mm + stagger + l.period_p * j as f64;
            for (q, sx, sy) in [
                (1u8, 1.0, 1.0),
                (2, -1.0, 1.0),
                (3, -1.0, -1.0),
                (4, 1.0, -1.0),
            ] {
                let (px, py) = (sx * x, sy * y);
                let in_cutout = geom.feed_cutout.overlaps(px, py, l.element_keepout_mm);
                if in_cutout {
                    omitted_per_quadrant[q as usize - 1] += 1;
                }
                elements.push(LatticeSite {
                    x_mm: px,
                    y_mm: py,
                    quadrant: q,
                    in_cutout,
                });
            }
        }
    }
    let per_tile = l.tile_cols * l.tile_rows;
    if omitted_per_quadrant.contains(&per_tile) {
        return Err(Error::Config("feed cutout covers an entire tile".into()));
    }
    elements.sort_by(|a, b| a.y_mm.total_cmp(&b.y_mm).then(a.x_mm.total_cmp(&b.x_mm)));
    Ok(ApertureLayout { elements })
}

/// Phase the element at `(x, y)` must add so that the spherical wave from
/// the virtual focus leaves as a broadside plane wave.
pub fn required_phase(
    x_mm: f64,
    y_mm: f64,
    f: Freq,
    geom: &FoldedGeometry,
    phase_offset_deg: f64,
) -> f64 {
    let fl = geom.virtual_focal_f;
    let path = (x_mm * x_mm + y_mm * y_mm + fl * fl).sqrt() - fl;
    wrap_deg(360.0 / f.wavelength_mm() * path + phase_offset_deg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn f28() -> Freq {
        Freq::new(28.0).unwrap()
    }

    #[test]
    fn default_ratios() {
        let g = FoldedGeometry::default();
        g.validate().unwrap();
        assert_eq!(virtual_focus(40.0).unwrap(), 80.0);
        assert_abs_diff_eq!(g.f_over_d(), 0.416_666_7, epsilon = 1e-6);
        assert_abs_diff_eq!(g.h_over_d(), 0.208_333_3, epsilon = 1e-6);
        assert!(virtual_focus(0.0).is_err());
        assert!(virtual_focus(-1.0).is_err());
    }

    #[test]
    fn focal_length_must_match_fold() {
        let g = FoldedGeometry {
            virtual_focal_f: 70.0,
            ..Default::default()
        };
        assert!(matches!(g.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn default_lattice() {
        let lay = generate_lattice(&FoldedGeometry::default()).unwrap();
        assert_eq!(lay.len(), 1984);
        let n_omit = lay.omitted().count();
        assert!(n_omit > 0 && n_omit < 100, "{n_omit}");
        assert_abs_diff_eq!(lay.min_neighbor_distance(), 3.0, epsilon = 1e-9);
        for e in &lay.elements {
            assert!(e.x_mm.abs() < 96.0 && e.y_mm.abs() < 96.0);
        }
        for w in lay.elements.windows(2) {
            assert!((w[0].y_mm, w[0].x_mm) < (w[1].y_mm, w[1].x_mm));
        }
    }

    #[test]
    fn single_site_tiles_are_mirrored() {
        let g = FoldedGeometry {
            feed_cutout: FeedCutout::none(),
            lattice: LatticeSpec {
                tile_cols: 1,
                tile_rows: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let lay = generate_lattice(&g).unwrap();
        let mut pts: Vec<(f64, f64)> = lay.elements.iter().map(|e| (e.x_mm, e.y_mm)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            pts,
            vec![(-1.5, -1.5), (-1.5, 1.5), (1.5, -1.5), (1.5, 1.5)]
        );
        assert!(lay.omitted().next().is_none());
    }

    #[test]
    fn cutout_covering_a_tile_is_rejected() {
        let g = FoldedGeometry {
            lattice: LatticeSpec {
                tile_cols: 1,
                tile_rows: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(generate_lattice(&g), Err(Error::Config(_))));
    }

    #[test]
    fn oversized_tile_is_rejected() {
        let g = FoldedGeometry {
            lattice: LatticeSpec {
                tile_cols: 17,
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(generate_lattice(&g).is_err());
    }

    #[test]
    fn required_phase_examples() {
        let g = FoldedGeometry::default();
        assert_eq!(required_phase(0.0, 0.0, f28(), &g, 0.0), 0.0);
        // independent: (sqrt(96^2 + 96^2 + 80^2) - 80) * 360 / (c / f)
        let path = (96f64.powi(2) * 2.0 + 6400.0).sqrt() - 80.0;
        assert_abs_diff_eq!(path, 77.582, epsilon = 1e-3);
        let expected = (path * 360.0 / (299.792458 / 28.0)).rem_euclid(360.0);
        let got = required_phase(96.0, 96.0, f28(), &g, 0.0);
        assert_abs_diff_eq!(got, expected, epsilon = 1e-9);
        assert_abs_diff_eq!(got, 88.6, epsilon = 0.05);
    }

    #[test]
    fn stronger_focus_has_larger_phase_range() {
        let lay = generate_lattice(&FoldedGeometry::default()).unwrap();
        let range = |h: f64| {
            let g = FoldedGeometry {
                fold_height_h: h,
                virtual_focal_f: 2.0 * h,
                ..Default::default()
            };
            let fl = g.virtual_focal_f;
            let v: Vec<f64> = lay
                .elements
                .iter()
                .map(|e| {
                    360.0 / f28().wavelength_mm()
                        * ((e.x_mm.powi(2) + e.y_mm.powi(2) + fl * fl).sqrt() - fl)
                })
                .collect();
            v.iter().copied().fold(f64::MIN, f64::max) - v.iter().copied().fold(f64::MAX, f64::min)
        };
        assert!(range(50.0) <= range(40.0));
        assert!(range(40.0) <= range(30.0));
    }

    proptest! {
        #[test]
        fn required_phase_is_four_fold_symmetric(x in -96.0f64..96.0, y in -96.0f64..96.0, off in 0.0f64..360.0) {
            let g = FoldedGeometry::default();
            let p = required_phase(x, y, f28(), &g, off);
            for (a, b) in [(-x, -y), (-y, x), (y, -x)] {
                let q = required_phase(a, b, f28(), &g, off);
                prop_assert!(crate::emcore::wrap_deg_signed(p - q).abs() < 1e-9);
            }
            prop_assert!((0.0..360.0).contains(&p));
        }
    }
}
