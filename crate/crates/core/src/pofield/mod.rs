//! Feed model, aperture illumination and physical-optics radiation.

mod pattern;
mod sweep;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::emcore::{db, polar_deg};
use crate::layout::{DesignedAperture, FoldedGeometry};
use crate::polarizer::{cascade_with, mpg_reflect_jones, mpg_transmit_jones, MpgModel};
use crate::unitcell::{jones_from_global, PhaseSource};
use crate::{Error, Freq, Jones2, Result, C64};

pub use pattern::{
    analyze, aperture_efficiency, default_theta_grid, directivity, evaluate, export_pattern_csv,
    far_field, metrics, Analysis, AnalysisOptions, CutMetrics, Directivity, EfficiencyBudget,
    ElementFactor, FarFieldPattern, PatternCut, PatternMetrics,
};
pub use sweep::{band_sweep, bandwidths, BandPoint, BandSweep, Bandwidth};

/// Exponent `q` of a `cos^{2q}θ` power pattern with the given half-power
/// beamwidth.
pub fn fit_cosq(hpbw_deg: f64) -> Result<f64> {
    if !(hpbw_deg > 0.0 && hpbw_deg < 180.0) {
        return Err(Error::Domain(format!(
            "beamwidth must lie in (0, 180) deg, got {hpbw_deg}"
        )));
    }
    let c = (hpbw_deg / 2.0).to_radians().cos();
    Ok(0.5f64.ln() / (2.0 * c.ln()))
}

/// Peak directivity `2(2q + 1)` of a `cos^{2q}θ` half-space pattern, in dBi.
pub fn cosq_directivity(q: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::Domain(format!("q must be positive, got {q}")));
    }
    db(2.0 * (2.0 * q + 1.0))
}

/// Axially symmetric feed at the virtual focus, looking along the axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeedModel {
    /// Power pattern `cos^{2q}θ`.
    pub q_exponent: f64,
    pub polarization: Jones2,
}

impl Default for FeedModel {
    /// 40° half-power beamwidth, `y` polarized.
    fn default() -> Self {
        FeedModel::from_hpbw(40.0).expect("valid default beamwidth")
    }
}

impl FeedModel {
    pub fn new(q_exponent: f64) -> Result<Self> {
        if !(q_exponent > 0.0 && q_exponent.is_finite()) {
            return Err(Error::Domain(format!(
                "q must be positive, got {q_exponent}"
            )));
        }
        Ok(FeedModel {
            q_exponent,
            polarization: Jones2::y_hat(),
        })
    }

    pub fn from_hpbw(hpbw_deg: f64) -> Result<Self> {
        FeedModel::new(fit_cosq(hpbw_deg)?)
    }

    pub fn peak_gain_dbi(&self) -> f64 {
        db(2.0 * (2.0 * self.q_exponent + 1.0)).unwrap_or(f64::NEG_INFINITY)
    }

    /// Field amplitude at angle `θ` (cosine given), unit on boresight.
    pub fn amplitude(&self, cos_theta: f64) -> f64 {
        cos_theta.max(0.0).powf(self.q_exponent)
    }
}

/// Incident amplitude at `(x, y)` on the aperture plane from a feed at
/// height `F`: `cos^q θ · F/r`, phase `−k·r`.
pub fn incident_field(feed: &FeedModel, x: f64, y: f64, focal_f: f64, f: Freq) -> C64 {
    let r = (x * x + y * y + focal_f * focal_f).sqrt();
    let c = focal_f / r;
    polar_deg(feed.amplitude(c) * c, -360.0 / f.wavelength_mm() * r)
}

/// Fraction of feed power whose mirrored ray lands on the square aperture.
pub fn spillover_efficiency(feed: &FeedModel, geom: &FoldedGeometry) -> f64 {
    spillover_square(feed.q_exponent, geom.aperture_d, geom.virtual_focal_f)
}

fn spillover_square(q: f64, d: f64, focal_f: f64) -> f64 {
    if d <= 0.0 {
        return 0.0;
    }
    // by symmetry one octant φ ∈ [0, π/4] suffices
    const N: usize = 4096;
    let h = std::f64::consts::FRAC_PI_4 / N as f64;
    let s: f64 = (0..N)
        .map(|i| {
            let phi = (i as f64 + 0.5) * h;
            let t = (d / 2.0) / (focal_f * phi.cos());
            let cos_max = 1.0 / (1.0 + t * t).sqrt();
            1.0 - cos_max.powf(2.0 * q + 1.0)
        })
        .sum();
    s * h / std::f64::consts::FRAC_PI_4
}

/// One radiating aperture sample after the folded cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApertureSample {
    pub x_mm: f64,
    pub y_mm: f64,
    /// Feed wave arriving at the element.
    pub incident: C64,
    /// Output `x` field.
    pub co: C64,
    /// Output `y` field.
    pub cx: C64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApertureField {
    pub freq_ghz: f64,
    pub samples: Vec<ApertureSample>,
    /// Share of intercepted feed flux falling on populated sites.
    pub fill_fraction: f64,
}

impl ApertureField {
    pub fn freq(&self) -> Result<Freq> {
        Freq::new(self.freq_ghz)
    }

    /// Output over incident power of the populated sites.
    pub fn chain_efficiency(&self) -> f64 {
        let inc: f64 = self.samples.iter().map(|s| s.incident.norm_sqr()).sum();
        let out: f64 = self
            .samples
            .iter()
            .map(|s| s.co.norm_sqr() + s.cx.norm_sqr())
            .sum();
        if inc > 0.0 {
            out / inc
        } else {
            0.0
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        for s in &mut out.samples {
            s.co *= c;
            s.cx *= c;
        }
        out
    }

    /// Uniform in-phase `x` field on a square grid of pitch `spacing_mm`
    /// filling a `d_mm` square.
    pub fn uniform_square(d_mm: f64, spacing_mm: f64, f: Freq) -> Result<Self> {
        if !(d_mm > 0.0 && spacing_mm > 0.0 && spacing_mm <= d_mm) {
            return Err(Error::Config(
                "uniform aperture needs 0 < spacing <= size".into(),
            ));
        }
        let n = (d_mm / spacing_mm).round() as usize;
        let s = d_mm / n as f64;
        let one = C64::new(1.0, 0.0);
        let mut samples = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                samples.push(ApertureSample {
                    x_mm: -d_mm / 2.0 + (j as f64 + 0.5) * s,
                    y_mm: -d_mm / 2.0 + (i as f64 + 0.5) * s,
                    incident: one,
                    co: one,
                    cx: C64::new(0.0, 0.0),
                });
            }
        }
        Ok(ApertureField {
            freq_ghz: f.ghz(),
            samples,
            fill_fraction: 1.0,
        })
    }
}

/// Feed wave at every populated element, passed through grid reflection,
/// the element's response at `f` and grid transmission.
pub fn illuminate(
    design: &DesignedAperture,
    source: &dyn PhaseSource,
    feed: &FeedModel,
    mpg: &MpgModel,
    f: Freq,
) -> Result<ApertureField> {
    let geom = &design.folded_geometry;
    let fl = geom.virtual_focal_f;
    let refl = mpg_reflect_jones(mpg, f)?;
    let trans = mpg_transmit_jones(mpg, f)?;

    let active: Vec<_> = design.active().collect();
    let cells: Vec<_> = active
        .iter()
        .map(|e| {
            let g = e.geometry.expect("populated element has a geometry");
            (
                g.to_cell(geom),
                (C64::from(e.achieved_rxy), C64::from(e.achieved_ryy)),
            )
        })
        .collect();
    let responses = if (f.ghz() - design.frequency_ghz).abs() < 1e-12 {
        cells.iter().map(|c| c.1).collect()
    } else {
        source.element_responses(&cells, f)?
    };

    let samples: Vec<ApertureSample> = active
        .par_iter()
        .zip(responses.par_iter())
        .map(|(e, &(r_xy, r_yy))| {
            let inc = incident_field(feed, e.x_mm, e.y_mm, fl, f);
            let wave = feed.polarization.scale(inc);
            let b = cascade_with(&wave, &refl, &jones_from_global(r_xy, r_yy), &trans);
            ApertureSample {
                x_mm: e.x_mm,
                y_mm: e.y_mm,
                incident: inc,
                co: b.co_pol_output,
                cx: b.cross_leakage,
            }
        })
        .collect();

    let flux = |x: f64, y: f64| {
        let r2 = x * x + y * y + fl * fl;
        let c = fl / r2.sqrt();
        feed.amplitude(c).powi(2) * c / r2
    };
    let total: f64 = design.elements.iter().map(|e| flux(e.x_mm, e.y_mm)).sum();
    let populated: f64 = active.iter().map(|e| flux(e.x_mm, e.y_mm)).sum();
    Ok(ApertureField {
        freq_ghz: f.ghz(),
        samples,
        fill_fraction: if total > 0.0 { populated / total } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::{phase_deg, wrap_deg_signed};
    use crate::layout::{generate_lattice, synthesize, SynthesisOptions};
    use crate::unitcell::IdealSource;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosq_fit_examples() {
        let q = fit_cosq(40.0).unwrap();
        assert_abs_diff_eq!(q, 5.5717, epsilon = 1e-4);
        assert_abs_diff_eq!(20f64.to_radians().cos().powf(2.0 * q), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(fit_cosq(60.0).unwrap(), 2.4094, epsilon = 1e-4);
        assert!(fit_cosq(179.999).unwrap() < 0.05);
        assert!(fit_cosq(0.0).is_err() && fit_cosq(180.0).is_err());
    }

    #[test]
    fn cosq_directivity_examples() {
        assert_abs_diff_eq!(cosq_directivity(5.57).unwrap(), 13.85, epsilon = 0.01);
        assert_abs_diff_eq!(cosq_directivity(0.5).unwrap(), 6.0206, epsilon = 1e-4);
        assert!((cosq_directivity(fit_cosq(40.0).unwrap()).unwrap() - 13.47).abs() < 1.0);
    }

    #[test]
    fn cosq_directivity_matches_sphere_integration() {
        for q in [1.0, 3.0, 5.57] {
            // midpoint rule over θ ∈ [0, π/2]
            let n = 20_000;
            let h = std::f64::consts::FRAC_PI_2 / n as f64;
            let p: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    t.cos().powf(2.0 * q) * t.sin()
                })
                .sum::<f64>()
                * h
                * std::f64::consts::TAU;
            let d = 10.0 * (4.0 * std::f64::consts::PI / p).log10();
            assert!((d - cosq_directivity(q).unwrap()).abs() < 0.05);
        }
    }

    #[test]
    fn edge_taper() {
        let feed = FeedModel::new(5.57).unwrap();
        let a = incident_field(&feed, 96.0, 0.0, 80.0, Freq::new(28.0).unwrap()).norm();
        // cos θ = 80 / 124.97, amplitude cos^q θ · cos θ
        let c = 80.0 / (96f64.powi(2) + 6400.0).sqrt();
        assert_abs_diff_eq!(a, c.powf(5.57) * c, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 0.0534, epsilon = 1e-4);
        let narrow = FeedModel::new(1e4).unwrap();
        assert!(incident_field(&narrow, 10.0, 0.0, 80.0, Freq::new(28.0).unwrap()).norm() < 1e-6);
        assert_eq!(
            incident_field(&narrow, 0.0, 0.0, 80.0, Freq::new(28.0).unwrap()).norm(),
            1.0
        );
    }

    #[test]
    fn spillover_limits_and_bounds() {
        let q = 5.57;
        let inscribed = 1.0 - (80.0 / (96f64.powi(2) + 6400.0).sqrt()).powf(2.0 * q + 1.0);
        assert_abs_diff_eq!(inscribed, 0.9955, epsilon = 1e-4);
        let r = 96.0 * 2f64.sqrt();
        let circumscribed = 1.0 - (80.0 / (r * r + 6400.0).sqrt()).powf(2.0 * q + 1.0);
        let s = spillover_efficiency(&FeedModel::new(q).unwrap(), &FoldedGeometry::default());
        assert!(
            inscribed < s && s < circumscribed,
            "{inscribed} {s} {circumscribed}"
        );
        assert!(spillover_square(1e5, 192.0, 80.0) > 1.0 - 1e-12);
        assert_eq!(spillover_square(q, 0.0, 80.0), 0.0);
        assert!(spillover_square(q, 1e-6, 80.0) < 1e-9);
    }

    #[test]
    fn ideal_design_has_flat_aperture_phase() {
        let g = FoldedGeometry::default();
        let lay = generate_lattice(&g).unwrap();
        let f = Freq::new(28.0).unwrap();
        let d = synthesize(&lay, &g, &IdealSource, f, &SynthesisOptions::default()).unwrap();
        let field = illuminate(
            &d,
            &IdealSource,
            &FeedModel::default(),
            &MpgModel::ideal(),
            f,
        )
        .unwrap();
        let p0 = phase_deg(field.samples[0].co);
        for s in &field.samples {
            assert!(wrap_deg_signed(phase_deg(s.co) - p0).abs() < 1e-6);
            assert!(s.cx.norm() < 1e-15);
        }
        assert_abs_diff_eq!(field.chain_efficiency(), 1.0, epsilon = 1e-12);
        assert!(
            field.fill_fraction < 1.0 && field.fill_fraction > 0.8,
            "{}",
            field.fill_fraction
        );
    }
}
