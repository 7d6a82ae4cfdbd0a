//! Anisotropic polarization-rotating unit cell.
//!
//! The cell reflects along two eigen axes `u`, `v` at +45° to the global
//! axes with coefficients `r_u`, `r_v`. By convention the arm length `l_x`
//! controls `r_u` and `l_y` controls `r_v`.

mod source;
mod surrogate;
mod table;

use serde::{Deserialize, Serialize};

use crate::emcore::{phase_deg, JonesMatrix};
use crate::{Error, Freq, Jones, Result, C64};

pub use source::{
    lookup_geometry, phase_coverage, unwrap_directional, Candidate, CandidateSet, Coverage,
    IdealSource, PhaseMatcher, PhaseSource,
};
pub use surrogate::{surrogate_eigen, Resonance, SurrogateParams, SurrogateSource, SweepGrid};
pub use table::{
    export_phase_table, ingest_phase_table, PhaseTable, PhaseTableEntry, PASSIVITY_TOL,
};

/// Orientation of the eigen axes relative to the global `x` axis.
pub const EIGEN_AXIS_DEG: f64 = 45.0;

/// Unit-cell heights used by the prototype, in mm.
pub const DEFAULT_HEIGHTS: [f64; 2] = [0.2, 0.4];

/// Default minimum cross-polar magnitude accepted by lookup and synthesis.
pub const DEFAULT_MIN_CROSS_MAG: f64 = 0.9;

/// Sweepable cell dimensions plus the lattice constants, all in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellGeometry {
    pub l_x: f64,
    pub l_y: f64,
    pub h_u: f64,
    pub w_1: f64,
    pub w_2: f64,
    pub period_p: f64,
    pub substrate_h_s: f64,
}

impl Default for CellGeometry {
    fn default() -> Self {
        CellGeometry {
            l_x: 2.2,
            l_y: 2.2,
            h_u: 0.2,
            w_1: 1.0,
            w_2: 1.0,
            period_p: 6.0,
            substrate_h_s: 0.4,
        }
    }
}

impl CellGeometry {
    /// Validated constructor using the default lattice constants.
    pub fn new(l_x: f64, l_y: f64, h_u: f64, w_1: f64, w_2: f64) -> Result<Self> {
        let g = CellGeometry {
            l_x,
            l_y,
            h_u,
            w_1,
            w_2,
            ..Default::default()
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_lattice(mut self, period_p: f64, substrate_h_s: f64) -> Self {
        self.period_p = period_p;
        self.substrate_h_s = substrate_h_s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.l_x,
            self.l_y,
            self.h_u,
            self.w_1,
            self.w_2,
            self.period_p,
            self.substrate_h_s,
        ];
        if dims.iter().any(|d| !d.is_finite()) {
            return Err(Error::Config(format!(
                "non-finite cell dimension in {self:?}"
            )));
        }
        if !(self.l_x > 0.0
            && self.l_x <= self.period_p
            && self.l_y > 0.0
            && self.l_y <= self.period_p)
        {
            return Err(Error::Config(format!(
                "arm lengths must lie in (0, P={}]: l_x={}, l_y={}",
                self.period_p, self.l_x, self.l_y
            )));
        }
        if self.h_u <= 0.0 || self.w_1 <= 0.0 || self.w_2 <= 0.0 || self.substrate_h_s <= 0.0 {
            return Err(Error::Config(format!(
                "cell dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Checks `h_u` against a declared set of printable heights.
    pub fn check_height(&self, allowed: &[f64]) -> Result<()> {
        if allowed.iter().any(|h| (h - self.h_u).abs() < 1e-9) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "h_u = {} is not one of the declared heights {allowed:?}",
                self.h_u
            )))
        }
    }

    /// Sort/identity key over the five sweepable dimensions.
    pub(crate) fn key(&self) -> [f64; 5] {
        [self.h_u, self.w_1, self.w_2, self.l_x, self.l_y]
    }
}

/// Eigen-axis reflection coefficients of a cell at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenReflection {
    pub r_u: C64,
    pub r_v: C64,
    pub freq: Freq,
}

impl EigenReflection {
    pub fn new(r_u: C64, r_v: C64, freq: Freq) -> Self {
        EigenReflection { r_u, r_v, freq }
    }

    /// Grounded passive cell: neither eigen magnitude exceeds one.
    pub fn is_passive(&self) -> bool {
        self.r_u.norm() <= 1.0 + 1e-12 && self.r_v.norm() <= 1.0 + 1e-12
    }

    /// Global-basis coefficients `(r_xy, r_yy)` for `y` incidence.
    pub fn global(&self) -> (C64, C64) {
        ((self.r_u - self.r_v) * 0.5, (self.r_u + self.r_v) * 0.5)
    }
}

/// Reflection operator of the cell in the global basis.
///
/// Off-diagonal entries are `(r_u − r_v)/2`, diagonal entries `(r_u + r_v)/2`.
pub fn rms_jones(eig: &EigenReflection) -> Jones {
    JonesMatrix::diag(eig.r_u, eig.r_v).rotate_basis(EIGEN_AXIS_DEG)
}

/// Jones matrix of a symmetric cell from its global coefficients.
pub fn jones_from_global(r_xy: C64, r_yy: C64) -> Jones {
    JonesMatrix::new([[r_yy, r_xy], [r_xy, r_yy]])
}

/// Polarization conversion summary of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conversion {
    pub cross_mag: f64,
    pub co_mag: f64,
    pub cross_phase_deg: f64,
}

pub fn conversion_ratio(eig: &EigenReflection) -> Conversion {
    let (cross, co) = eig.global();
    Conversion {
        cross_mag: cross.norm(),
        co_mag: co.norm(),
        cross_phase_deg: phase_deg(cross),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::{polar_deg, wrap_deg_signed};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn f28() -> Freq {
        Freq::new(28.0).unwrap()
    }

    fn eig(mu: f64, pu: f64, mv: f64, pv: f64) -> EigenReflection {
        EigenReflection::new(polar_deg(mu, pu), polar_deg(mv, pv), f28())
    }

    #[test]
    fn ideal_rotator_is_swap() {
        let j = rms_jones(&eig(1.0, 0.0, 1.0, 180.0));
        assert!(j.m[0][0].norm() < 1e-15 && j.m[1][1].norm() < 1e-15);
        assert_abs_diff_eq!(j.m[0][1].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(j.m[1][0].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn isotropic_mirror_is_identity() {
        let j = rms_jones(&eig(1.0, 0.0, 1.0, 0.0));
        assert!(j.max_abs_diff(&Jones::identity()) < 1e-15);
    }

    #[test]
    fn quarter_wave_cell_splits_power() {
        let j = rms_jones(&eig(1.0, 0.0, 1.0, 90.0));
        assert_abs_diff_eq!(
            j.m[0][1].norm(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            j.m[0][0].norm(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-8
        );
    }

    #[test]
    fn rms_jones_matches_closed_form() {
        let e = eig(0.93, 17.0, 0.81, -140.0);
        let j = rms_jones(&e);
        let (cross, co) = e.global();
        assert!(j.max_abs_diff(&jones_from_global(cross, co)) < 1e-15);
    }

    #[test]
    fn conversion_examples() {
        let c = conversion_ratio(&eig(1.0, 30.0, 1.0, 210.0));
        assert_abs_diff_eq!(c.cross_mag, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.co_mag, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.cross_phase_deg, 30.0, epsilon = 1e-12);

        assert!(conversion_ratio(&eig(1.0, 0.0, 1.0, 0.0)).cross_mag < 1e-15);

        // |0.9∠10° − 1∠170°| / 2 evaluated by hand on the components
        let (a, b) = (10f64.to_radians(), 170f64.to_radians());
        let dx = 0.9 * a.cos() - b.cos();
        let dy = 0.9 * a.sin() - b.sin();
        let expected = (dx * dx + dy * dy).sqrt() / 2.0;
        let c = conversion_ratio(&eig(0.9, 10.0, 1.0, 170.0));
        assert_abs_diff_eq!(c.cross_mag, expected, epsilon = 1e-14);
        assert_abs_diff_eq!(c.cross_mag, 0.9356, epsilon = 1e-4);
    }

    #[test]
    fn geometry_validation() {
        assert!(CellGeometry::new(0.1, 5.2, 0.2, 1.0, 1.0).is_ok());
        assert!(CellGeometry::new(0.0, 5.2, 0.2, 1.0, 1.0).is_err());
        assert!(CellGeometry::new(6.5, 1.0, 0.2, 1.0, 1.0).is_err());
        let g = CellGeometry::new(1.0, 1.0, 0.3, 1.0, 1.0).unwrap();
        assert!(g.check_height(&DEFAULT_HEIGHTS).is_err());
        assert!(CellGeometry::default()
            .check_height(&DEFAULT_HEIGHTS)
            .is_ok());
    }

    proptest! {
        #[test]
        fn rms_jones_is_symmetric(mu in 0.0f64..1.0, pu in -360.0f64..360.0, mv in 0.0f64..1.0, pv in -360.0f64..360.0) {
            let j = rms_jones(&eig(mu, pu, mv, pv));
            prop_assert!((j.m[0][1] - j.m[1][0]).norm() < 1e-12);
        }

        #[test]
        fn conversion_is_energy_bounded(mu in 0.0f64..=1.0, pu in -360.0f64..360.0, mv in 0.0f64..=1.0, pv in -360.0f64..360.0) {
            let c = conversion_ratio(&eig(mu, pu, mv, pv));
            let bound = (mu * mu).max(mv * mv) + 1e-9;
            prop_assert!(c.cross_mag.powi(2) + c.co_mag.powi(2) <= bound);
        }

        #[test]
        fn half_wave_difference_reproduces_u_phase(pu in -180.0f64..180.0) {
            let c = conversion_ratio(&eig(1.0, pu, 1.0, pu + 180.0));
            prop_assert!((c.cross_mag - 1.0).abs() < 1e-12);
            prop_assert!(wrap_deg_signed(c.cross_phase_deg - pu).abs() < 1e-12);
        }
    }
}
