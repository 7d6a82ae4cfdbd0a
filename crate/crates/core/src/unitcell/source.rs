//! Phase sources and inverse geometry lookup.

use std::cmp::Ordering;

use crate::emcore::{phase_deg, polar_deg, wrap_deg, wrap_deg_signed};
use crate::{Error, Freq, Result, C64};

use super::CellGeometry;

/// One realizable cell and its global reflection coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub geometry: CellGeometry,
    pub r_xy: C64,
    pub r_yy: C64,
}

impl Candidate {
    pub fn cross_mag(&self) -> f64 {
        self.r_xy.norm()
    }

    /// Cross-polar phase in `[0, 360)`.
    pub fn cross_phase_deg(&self) -> f64 {
        wrap_deg(phase_deg(self.r_xy))
    }
}

/// Unwrapped span of achievable cross-polar phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub span_deg: f64,
    pub lo_deg: f64,
    pub hi_deg: f64,
}

impl Coverage {
    pub fn midpoint_deg(&self) -> f64 {
        0.5 * (self.lo_deg + self.hi_deg)
    }
}

/// Inverse lookup prepared for one frequency and magnitude threshold.
pub trait PhaseMatcher: Sync {
    /// Cell whose cross phase is closest to `target_deg`.
    fn best(&self, target_deg: f64) -> Result<Candidate>;

    fn coverage(&self) -> Result<Coverage>;

    /// Largest gap between circularly adjacent achievable phases; an upper
    /// bound on the lookup error. Zero for a continuous source.
    fn max_step_deg(&self) -> f64;
}

/// Anything that can report cell responses: sweep tables, the surrogate, or
/// the ideal continuous source.
pub trait PhaseSource: Sync {
    fn label(&self) -> String;

    /// All realizable cells at `f`.
    fn candidates(&self, f: Freq) -> Result<Vec<Candidate>>;

    /// `(r_xy, r_yy)` of a given geometry at `f`.
    fn response(&self, geometry: &CellGeometry, f: Freq) -> Result<(C64, C64)>;

    fn matcher(&self, f: Freq, min_cross_mag: f64) -> Result<Box<dyn PhaseMatcher + '_>> {
        Ok(Box::new(CandidateSet::new(
            self.candidates(f)?,
            min_cross_mag,
        )?))
    }

    /// Response at `f` of an element synthesized earlier. `stored` holds the
    /// coefficients recorded at synthesis time.
    fn element_response(
        &self,
        geometry: &CellGeometry,
        stored: (C64, C64),
        f: Freq,
    ) -> Result<(C64, C64)> {
        let _ = stored;
        self.response(geometry, f)
    }

    /// Batch form of [`PhaseSource::element_response`].
    fn element_responses(
        &self,
        elements: &[(CellGeometry, (C64, C64))],
        f: Freq,
    ) -> Result<Vec<(C64, C64)>> {
        elements
            .iter()
            .map(|(g, stored)| self.element_response(g, *stored, f))
            .collect()
    }
}

/// Geometry whose cross phase best matches `target_deg` at `f`, among cells
/// with `|r_xy| ≥ min_cross_mag`.
pub fn lookup_geometry(
    target_deg: f64,
    f: Freq,
    source: &dyn PhaseSource,
    min_cross_mag: f64,
) -> Result<Candidate> {
    source.matcher(f, min_cross_mag)?.best(target_deg)
}

/// Unwrapped span of achievable cross phase at `f`.
pub fn phase_coverage(source: &dyn PhaseSource, f: Freq, min_cross_mag: f64) -> Result<Coverage> {
    source.matcher(f, min_cross_mag)?.coverage()
}

/// Unwraps a phase sequence assuming it progresses in one dominant
/// direction.
///
/// The direction is the majority sign of the raw steps (ties count as
/// increasing). Steps of more than 180° against that direction are folded by
/// one turn; all other steps are kept as they are.
pub fn unwrap_directional(phases: &[f64]) -> Vec<f64> {
    let Some(&first) = phases.first() else {
        return Vec::new();
    };
    let steps: Vec<f64> = phases.windows(2).map(|w| w[1] - w[0]).collect();
    let votes: i64 = steps
        .iter()
        .map(|&d| match d.partial_cmp(&0.0) {
            Some(Ordering::Greater) => 1,
            Some(Ordering::Less) => -1,
            _ => 0,
        })
        .sum();
    let dir = if votes < 0 { -1.0 } else { 1.0 };
    let mut out = Vec::with_capacity(phases.len());
    let mut acc = first;
    out.push(acc);
    for mut d in steps {
        while d * dir < 0.0 && d.abs() > 180.0 {
            d += 360.0 * dir;
        }
        acc += d;
        out.push(acc);
    }
    out
}

/// Discrete candidate set filtered by the magnitude threshold.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    items: Vec<Candidate>,
    phases: Vec<f64>,
    mags: Vec<f64>,
    max_step: f64,
}

impl CandidateSet {
    pub fn new(all: Vec<Candidate>, min_cross_mag: f64) -> Result<Self> {
        if !(min_cross_mag > 0.0) {
            return Err(Error::Domain(format!(
                "min_cross_mag must be positive, got {min_cross_mag}"
            )));
        }
        let best_mag = all.iter().map(Candidate::cross_mag).fold(0.0, f64::max);
        let items: Vec<Candidate> = all
            .iter()
            .copied()
            .filter(|c| c.cross_mag() >= min_cross_mag)
            .collect();
        if items.is_empty() {
            let span = Self::span_of(&all).map(|c| c.span_deg).unwrap_or(0.0);
            return Err(Error::Coverage {
                message: format!(
                    "no cell reaches |r_xy| >= {min_cross_mag} (best available {best_mag:.4})"
                ),
                span_deg: span,
            });
        }
        let phases: Vec<f64> = items.iter().map(Candidate::cross_phase_deg).collect();
        let mags: Vec<f64> = items.iter().map(Candidate::cross_mag).collect();
        let max_step = circular_max_gap(&phases);
        Ok(CandidateSet {
            items,
            phases,
            mags,
            max_step,
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Candidate] {
        &self.items
    }

    fn span_of(items: &[Candidate]) -> Option<Coverage> {
        let mut order: Vec<&Candidate> = items.iter().collect();
        order.sort_by(|a, b| {
            let (ka, kb) = (a.geometry.key(), b.geometry.key());
            // family (h_u, w_1, w_2), then l_x, then best magnitude first
            ka[..4]
                .iter()
                .zip(&kb[..4])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.cross_mag().total_cmp(&a.cross_mag()))
                .then_with(|| ka[4].total_cmp(&kb[4]))
        });

        let mut best: Option<Coverage> = None;
        let mut start = 0;
        while start < order.len() {
            let fam = &order[start].geometry.key()[..3];
            let end = start
                + order[start..]
                    .iter()
                    .take_while(|c| &c.geometry.key()[..3] == fam)
                    .count();
            let members = &order[start..end];
            let mut path: Vec<f64> = Vec::new();
            let mut last_lx: Option<f64> = None;
            for c in members {
                if last_lx != Some(c.geometry.l_x) {
                    path.push(c.cross_phase_deg());
                    last_lx = Some(c.geometry.l_x);
                }
            }
            if path.len() < 2 {
                // single arm length in the family: follow l_y instead
                let mut by_ly: Vec<&&Candidate> = members.iter().collect();
                by_ly.sort_by(|a, b| a.geometry.l_y.total_cmp(&b.geometry.l_y));
                path = by_ly.iter().map(|c| c.cross_phase_deg()).collect();
            }
            if path.len() >= 2 {
                let un = unwrap_directional(&path);
                let lo = un.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = un.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let cov = Coverage {
                    span_deg: hi - lo,
                    lo_deg: lo,
                    hi_deg: hi,
                };
                if best.is_none_or(|b| cov.span_deg > b.span_deg) {
                    best = Some(cov);
                }
            }
            start = end;
        }
        best
    }
}

impl PhaseMatcher for CandidateSet {
    fn best(&self, target_deg: f64) -> Result<Candidate> {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, &p) in self.phases.iter().enumerate() {
            let d = wrap_deg_signed(p - target_deg).abs();
            let better = if (d - best_d).abs() <= 1e-12 {
                let (m, bm) = (self.mags[i], self.mags[best]);
                if (m - bm).abs() <= 1e-12 {
                    let g = &self.items[i].geometry;
                    let bg = &self.items[best].geometry;
                    g.l_x + g.l_y < bg.l_x + bg.l_y - 1e-12
                } else {
                    m > bm
                }
            } else {
                d < best_d
            };
            if better {
                best = i;
                best_d = d;
            }
        }
        Ok(self.items[best])
    }

    fn coverage(&self) -> Result<Coverage> {
        Self::span_of(&self.items).ok_or_else(|| Error::Coverage {
            message: "fewer than two qualifying cells along any sweep path".into(),
            span_deg: 0.0,
        })
    }

    fn max_step_deg(&self) -> f64 {
        self.max_step
    }
}

fn circular_max_gap(phases: &[f64]) -> f64 {
    let mut p = phases.to_vec();
    p.sort_by(f64::total_cmp);
    let wrap_gap = p.first().unwrap_or(&0.0) + 360.0 - p.last().unwrap_or(&0.0);
    p.windows(2).map(|w| w[1] - w[0]).fold(wrap_gap, f64::max)
}

/// Continuous source that realizes any phase with `|r_xy| = 1` and no
/// co-polar residue, independent of frequency.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdealSource;

struct IdealMatcher;

impl PhaseMatcher for IdealMatcher {
    fn best(&self, target_deg: f64) -> Result<Candidate> {
        Ok(Candidate {
            geometry: CellGeometry::default(),
            r_xy: polar_deg(1.0, wrap_deg(target_deg)),
            r_yy: C64::new(0.0, 0.0),
        })
    }

    fn coverage(&self) -> Result<Coverage> {
        Ok(Coverage {
            span_deg: 360.0,
            lo_deg: 0.0,
            hi_deg: 360.0,
        })
    }

    fn max_step_deg(&self) -> f64 {
        0.0
    }
}

impl PhaseSource for IdealSource {
    fn label(&self) -> String {
        "ideal".into()
    }

    fn candidates(&self, _f: Freq) -> Result<Vec<Candidate>> {
        Err(Error::Config(
            "the ideal source is continuous and has no candidate list".into(),
        ))
    }

    fn response(&self, _geometry: &CellGeometry, _f: Freq) -> Result<(C64, C64)> {
        Err(Error::Config(
            "the ideal source has no geometry model".into(),
        ))
    }

    fn matcher(&self, _f: Freq, min_cross_mag: f64) -> Result<Box<dyn PhaseMatcher + '_>> {
        if !(min_cross_mag > 0.0) {
            return Err(Error::Domain(format!(
                "min_cross_mag must be positive, got {min_cross_mag}"
            )));
        }
        if min_cross_mag > 1.0 {
            return Err(Error::Coverage {
                message: format!("no cell reaches |r_xy| >= {min_cross_mag} (best available 1)"),
                span_deg: 360.0,
            });
        }
        Ok(Box::new(IdealMatcher))
    }

    fn element_response(
        &self,
        _geometry: &CellGeometry,
        stored: (C64, C64),
        _f: Freq,
    ) -> Result<(C64, C64)> {
        Ok(stored)
    }
}
