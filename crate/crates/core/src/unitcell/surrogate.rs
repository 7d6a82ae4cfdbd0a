//! Closed-form stand-in for full-wave unit-cell sweeps.

use serde::{Deserialize, Serialize};

use crate::emcore::polar_deg;
use crate::{Error, Freq, Result, C64};

use super::source::{Candidate, PhaseSource};
use super::{CellGeometry, EigenReflection, DEFAULT_HEIGHTS};

/// One arctangent S-curve of the per-axis phase response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resonance {
    /// Arm length at which this resonance is crossed, at the reference
    /// frequency and reference height/width.
    pub center_mm: f64,
    /// Arm-length scale of the transition; smaller is steeper.
    pub width_mm: f64,
}

/// Calibration of the surrogate.
///
/// Each eigen axis follows
/// `φ(L) = φ0 − Σ_k 2·atan((L·f/f_ref − c_k) / s_k)` in degrees, with both
/// centers moved by the arm width and the second moved by the cell height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub phase_offset_deg: f64,
    pub f_ref_ghz: f64,
    pub first: Resonance,
    pub second: Resonance,
    /// Shift of the second center per mm of `h_u` above `h_ref_mm`.
    pub height_shift_mm_per_mm: f64,
    pub h_ref_mm: f64,
    /// Shift of both centers per mm of arm width above `w_ref_mm`.
    pub width_shift_mm_per_mm: f64,
    pub w_ref_mm: f64,
    /// `|r_u| = |r_v| = 1 − loss_floor`.
    pub loss_floor: f64,
    pub l_min_mm: f64,
    pub l_max_mm: f64,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        SurrogateParams {
            phase_offset_deg: 180.0,
            f_ref_ghz: 28.0,
            first: Resonance {
                center_mm: 1.6,
                width_mm: 0.6,
            },
            second: Resonance {
                center_mm: 3.6,
                width_mm: 0.5,
            },
            height_shift_mm_per_mm: -2.0,
            h_ref_mm: 0.2,
            width_shift_mm_per_mm: -0.3,
            w_ref_mm: 1.0,
            loss_floor: 0.0,
            l_min_mm: 0.1,
            l_max_mm: 5.2,
        }
    }
}

impl SurrogateParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.f_ref_ghz > 0.0
            && self.first.width_mm > 0.0
            && self.second.width_mm > 0.0
            && (0.0..1.0).contains(&self.loss_floor)
            && self.l_min_mm > 0.0
            && self.l_max_mm > self.l_min_mm;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid surrogate parameters: {self:?}"
            )))
        }
    }

    /// Phase of one eigen axis, in degrees (not wrapped).
    pub fn axis_phase_deg(&self, l: f64, h_u: f64, w: f64, f_ghz: f64) -> f64 {
        let le = l * f_ghz / self.f_ref_ghz;
        let dw = self.width_shift_mm_per_mm * (w - self.w_ref_mm);
        let c1 = self.first.center_mm + dw;
        let c2 = self.second.center_mm + dw + self.height_shift_mm_per_mm * (h_u - self.h_ref_mm);
        let s =
            ((le - c1) / self.first.width_mm).atan() + ((le - c2) / self.second.width_mm).atan();
        self.phase_offset_deg - 2.0 * s.to_degrees()
    }

    fn axis(&self, l: f64, h_u: f64, w: f64, f_ghz: f64) -> C64 {
        polar_deg(1.0 - self.loss_floor, self.axis_phase_deg(l, h_u, w, f_ghz))
    }

    fn check_length(&self, l: f64) -> Result<()> {
        if l >= self.l_min_mm - 1e-9 && l <= self.l_max_mm + 1e-9 {
            Ok(())
        } else {
            Err(Error::Range(format!(
                "arm length {l} mm outside the surrogate range [{}, {}] mm",
                self.l_min_mm, self.l_max_mm
            )))
        }
    }
}

/// Eigen reflection of `geometry` at `f` under the surrogate.
pub fn surrogate_eigen(
    geometry: &CellGeometry,
    f: Freq,
    p: &SurrogateParams,
) -> Result<EigenReflection> {
    p.check_length(geometry.l_x)?;
    p.check_length(geometry.l_y)?;
    let r_u = p.axis(geometry.l_x, geometry.h_u, geometry.w_1, f.ghz());
    let r_v = p.axis(geometry.l_y, geometry.h_u, geometry.w_2, f.ghz());
    Ok(EigenReflection::new(r_u, r_v, f))
}

/// Discrete geometry sweep the surrogate offers to the lookup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub lengths_mm: Vec<f64>,
    pub heights_mm: Vec<f64>,
    /// `(w_1, w_2)` pairs.
    pub widths_mm: Vec<(f64, f64)>,
}

impl Default for SweepGrid {
    /// `L ∈ [0.1, 5.2]` mm in 0.05 mm steps, both heights, 1 mm arms.
    fn default() -> Self {
        SweepGrid {
            lengths_mm: (0..=102).map(|i| (10.0 + 5.0 * i as f64) / 100.0).collect(),
            heights_mm: DEFAULT_HEIGHTS.to_vec(),
            widths_mm: vec![(1.0, 1.0)],
        }
    }
}

impl SweepGrid {
    pub fn len(&self) -> usize {
        self.lengths_mm.len().pow(2) * self.heights_mm.len() * self.widths_mm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Surrogate evaluated over a sweep grid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSource {
    pub params: SurrogateParams,
    pub grid: SweepGrid,
}

impl SurrogateSource {
    pub fn new(params: SurrogateParams, grid: SweepGrid) -> Result<Self> {
        params.validate()?;
        for &l in &grid.lengths_mm {
            params.check_length(l)?;
        }
        if grid.is_empty() {
            return Err(Error::Config("empty surrogate sweep grid".into()));
        }
        Ok(SurrogateSource { params, grid })
    }
}

impl PhaseSource for SurrogateSource {
    fn label(&self) -> String {
        "surrogate".into()
    }

    fn candidates(&self, f: Freq) -> Result<Vec<Candidate>> {
        let p = &self.params;
        let ls = &self.grid.lengths_mm;
        let mut out = Vec::with_capacity(self.grid.len());
        for &h in &self.grid.heights_mm {
            for &(w1, w2) in &self.grid.widths_mm {
                let ru: Vec<C64> = ls.iter().map(|&l| p.axis(l, h, w1, f.ghz())).collect();
                let rv: Vec<C64> = ls.iter().map(|&l| p.axis(l, h, w2, f.ghz())).collect();
                for (i, &lx) in ls.iter().enumerate() {
                    for (j, &ly) in ls.iter().enumerate() {
                        let geometry = CellGeometry::new(lx, ly, h, w1, w2)?;
                        out.push(Candidate {
                            geometry,
                            r_xy: (ru[i] - rv[j]) * 0.5,
                            r_yy: (ru[i] + rv[j]) * 0.5,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    fn response(&self, geometry: &CellGeometry, f: Freq) -> Result<(C64, C64)> {
        Ok(surrogate_eigen(geometry, f, &self.params)?.global())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::{phase_deg, wrap_deg_signed};
    use crate::unitcell::{lookup_geometry, phase_coverage, DEFAULT_MIN_CROSS_MAG};
    use proptest::prelude::*;

    fn f28() -> Freq {
        Freq::new(28.0).unwrap()
    }

    #[test]
    fn equal_arms_give_equal_eigenvalues() {
        let p = SurrogateParams::default();
        let g = CellGeometry::new(2.35, 2.35, 0.4, 1.0, 1.0).unwrap();
        let e = surrogate_eigen(&g, f28(), &p).unwrap();
        assert_eq!(e.r_u, e.r_v);
    }

    #[test]
    fn default_span_exceeds_400_degrees() {
        let p = SurrogateParams::default();
        for h in DEFAULT_HEIGHTS {
            let span = p.axis_phase_deg(0.1, h, 1.0, 28.0) - p.axis_phase_deg(5.2, h, 1.0, 28.0);
            assert!(span > 400.0, "h={h}: {span}");
        }
    }

    #[test]
    fn out_of_range_is_rejected() {
        let p = SurrogateParams::default();
        let g = CellGeometry::new(5.5, 1.0, 0.2, 1.0, 1.0).unwrap();
        assert!(matches!(
            surrogate_eigen(&g, f28(), &p),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn default_grid_size() {
        let g = SweepGrid::default();
        assert_eq!(g.lengths_mm.len(), 103);
        assert_eq!(*g.lengths_mm.last().unwrap(), 5.2);
        assert_eq!(g.len(), 21_218);
    }

    #[test]
    fn qualifying_coverage_exceeds_400_degrees() {
        let s = SurrogateSource::default();
        let c = phase_coverage(&s, f28(), DEFAULT_MIN_CROSS_MAG).unwrap();
        assert!(c.span_deg > 400.0, "{c:?}");
    }

    #[test]
    fn lookup_agrees_with_exhaustive_scan() {
        let s = SurrogateSource::default();
        let f = f28();
        let all = s.candidates(f).unwrap();
        // independent scan: best wrapped error among qualifying cells
        let best_err = all
            .iter()
            .filter(|c| c.r_xy.norm() >= 0.9)
            .map(|c| wrap_deg_signed(phase_deg(c.r_xy)).abs())
            .fold(f64::INFINITY, f64::min);
        let got = lookup_geometry(0.0, f, &s, 0.9).unwrap();
        let err = wrap_deg_signed(phase_deg(got.r_xy)).abs();
        assert!((err - best_err).abs() < 1e-12);
        let m = s.matcher(f, 0.9).unwrap();
        assert!(err <= 0.5 * m.max_step_deg() + 1e-12);
    }

    proptest! {
        #[test]
        fn phase_is_monotone_in_length(a in 0.1f64..5.2, b in 0.1f64..5.2, h in prop::sample::select(vec![0.2, 0.4]), f in 25.0f64..32.0) {
            let p = SurrogateParams::default();
            let (l1, l2) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(p.axis_phase_deg(l1, h, 1.0, f) >= p.axis_phase_deg(l2, h, 1.0, f));
        }

        #[test]
        fn surrogate_is_passive(lx in 0.1f64..5.2, ly in 0.1f64..5.2, loss in 0.0f64..0.5) {
            let p = SurrogateParams { loss_floor: loss, ..Default::default() };
            let g = CellGeometry::new(lx, ly, 0.2, 1.0, 1.0).unwrap();
            let e = surrogate_eigen(&g, f28(), &p).unwrap();
            prop_assert!(e.is_passive());
            let (x, y) = e.global();
            prop_assert!(x.norm_sqr() + y.norm_sqr() <= 1.0 + 1e-12);
        }

        #[test]
        fn lookup_error_bounded_by_step(target in 0.0f64..360.0) {
            let s = SurrogateSource::default();
            let m = s.matcher(f28(), 0.9).unwrap();
            let c = m.best(target).unwrap();
            prop_assert!(wrap_deg_signed(phase_deg(c.r_xy) - target).abs() <= m.max_step_deg());
        }
    }
}
