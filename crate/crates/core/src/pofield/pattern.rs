//! Far-field summation, directivity quadrature and beam metrics.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::layout::DesignedAperture;
use crate::polarizer::MpgModel;
use crate::sum::pairwise;
use crate::unitcell::PhaseSource;
use crate::{Error, Freq, Result, C64};

use super::{illuminate, spillover_efficiency, ApertureField, ApertureSample, FeedModel};

/// Floor for levels that are numerically zero, dB.
const DB_FLOOR: f64 = -400.0;

fn power_db(ratio: f64) -> f64 {
    if ratio > 0.0 {
        (10.0 * ratio.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Radiation pattern of a single aperture sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementFactor {
    Isotropic,
    /// `cos θ` projection.
    Cosine,
    /// `(1 + cos θ)/2`, the Huygens-source obliquity factor.
    #[default]
    Huygens,
}

impl ElementFactor {
    pub fn value(self, cos_theta: f64) -> f64 {
        match self {
            ElementFactor::Isotropic => 1.0,
            ElementFactor::Cosine => cos_theta,
            ElementFactor::Huygens => 0.5 * (1.0 + cos_theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub element_factor: ElementFactor,
    /// Direction-cosine step of the directivity quadrature.
    pub quadrature_step: f64,
    /// Signed polar angles of the principal cuts, deg.
    pub theta_grid_deg: Vec<f64>,
    pub phi_cuts_deg: Vec<f64>,
    /// Ohmic and dielectric efficiency, not modelled.
    pub radiation_efficiency: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            element_factor: ElementFactor::default(),
            quadrature_step: 0.003,
            theta_grid_deg: default_theta_grid(),
            phi_cuts_deg: vec![0.0, 90.0],
            radiation_efficiency: 1.0,
        }
    }
}

/// −90°…90°: 0.05° steps within ±10°, 0.5° steps outside.
pub fn default_theta_grid() -> Vec<f64> {
    (-180..-20)
        .map(|i| i as f64 * 0.5)
        .chain((-200..=200).map(|i| i as f64 * 0.05))
        .chain((21..=180).map(|i| i as f64 * 0.5))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCut {
    pub phi_deg: f64,
    pub co: Vec<C64>,
    pub cx: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarFieldPattern {
    pub freq_ghz: f64,
    pub theta_deg: Vec<f64>,
    pub cuts: Vec<PatternCut>,
}

impl FarFieldPattern {
    /// Largest co-polar power over all cuts.
    pub fn peak_co_power(&self) -> f64 {
        self.cuts
            .iter()
            .flat_map(|c| c.co.iter())
            .map(|e| e.norm_sqr())
            .fold(0.0, f64::max)
    }
}

struct Summer<'a> {
    samples: &'a [ApertureSample],
    k: f64,
    elem: ElementFactor,
}

impl Summer<'_> {
    /// `(E_co, E_cx)` toward signed polar angle `theta` in the plane `phi`.
    fn at(&self, theta_deg: f64, phi_deg: f64) -> (C64, C64) {
        let (st, ct) = theta_deg.to_radians().sin_cos();
        let (sp, cp) = phi_deg.to_radians().sin_cos();
        self.at_uv(st * cp, st * sp, ct)
    }

    fn at_uv(&self, u: f64, v: f64, cos_theta: f64) -> (C64, C64) {
        let mut co = C64::new(0.0, 0.0);
        let mut cx = C64::new(0.0, 0.0);
        for s in self.samples {
            let (sn, cs) = (self.k * (s.x_mm * u + s.y_mm * v)).sin_cos();
            let w = C64::new(cs, sn);
            co += s.co * w;
            cx += s.cx * w;
        }
        let ef = self.elem.value(cos_theta);
        (co * ef, cx * ef)
    }

    fn co_power(&self, theta_deg: f64, phi_deg: f64) -> f64 {
        self.at(theta_deg, phi_deg).0.norm_sqr()
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<()> {
    if g.is_empty() {
        return Err(Error::Config(format!("{name} grid is empty")));
    }
    if g.iter().any(|t| !t.is_finite()) || g.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{name} grid must be finite and strictly increasing"
        )));
    }
    Ok(())
}

/// Co- and cross-polar far fields on the principal cuts.
pub fn far_field(
    field: &ApertureField,
    theta_grid_deg: &[f64],
    phi_cuts_deg: &[f64],
    elem: ElementFactor,
) -> Result<FarFieldPattern> {
    check_grid("theta", theta_grid_deg)?;
    check_grid("phi", phi_cuts_deg)?;
    if theta_grid_deg.iter().any(|t| t.abs() > 90.0) {
        return Err(Error::Config(
            "theta grid must stay within [-90, 90] deg".into(),
        ));
    }
    let sum = Summer {
        samples: &field.samples,
        k: field.freq()?.wavenumber(),
        elem,
    };
    let cuts = phi_cuts_deg
        .iter()
        .map(|&phi| {
            let (co, cx) = theta_grid_deg.par_iter().map(|&t| sum.at(t, phi)).unzip();
            PatternCut {
                phi_deg: phi,
                co,
                cx,
            }
        })
        .collect();
    Ok(FarFieldPattern {
        freq_ghz: field.freq_ghz,
        theta_deg: theta_grid_deg.to_vec(),
        cuts,
    })
}

/// Result of the full-sphere quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Directivity {
    /// `∫ (|E_co|² + |E_cx|²) dΩ` over the front half-space.
    pub radiated: f64,
    /// Largest `|E_co|²` found on the quadrature grid.
    pub grid_peak_co: f64,
    /// Largest `|E_cx|²` found on the quadrature grid.
    pub grid_peak_cx: f64,
}

impl Directivity {
    /// Directivity in dBi for a given peak co-polar power.
    pub fn dbi(&self, peak_co: f64) -> f64 {
        power_db(4.0 * std::f64::consts::PI * peak_co / self.radiated)
    }
}

/// Midpoint quadrature over direction cosines `(u, v)` inside the unit
/// circle with `dΩ = du dv / cos θ`.
///
/// Samples are grouped by row (`y`) so that each grid column costs one
/// pass over the samples plus one product per row and `v` value. Column
/// sums are reduced pairwise in a fixed order.
pub fn directivity(field: &ApertureField, elem: ElementFactor, step: f64) -> Result<Directivity> {
    if !(step > 0.0 && step < 1.0) {
        return Err(Error::Config(format!(
            "quadrature step must lie in (0, 1), got {step}"
        )));
    }
    if field.samples.is_empty() {
        return Err(Error::Config("aperture field has no samples".into()));
    }
    let k = field.freq()?.wavenumber();
    let n = (2.0 / step).ceil() as usize;
    let h = 2.0 / n as f64;
    let grid: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();

    let mut ys: Vec<f64> = field.samples.iter().map(|s| s.y_mm).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let row_of: Vec<usize> = field
        .samples
        .iter()
        .map(|s| {
            ys.binary_search_by(|y| y.total_cmp(&s.y_mm))
                .expect("row present")
        })
        .collect();
    let nr = ys.len();
    // ev[j * nr + r] = exp(j k y_r v_j)
    let ev: Vec<C64> = grid
        .iter()
        .flat_map(|&v| ys.iter().map(move |&y| C64::from_polar(1.0, k * y * v)))
        .collect();

    let cols: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&u| {
            let mut s_co = vec![C64::new(0.0, 0.0); nr];
            let mut s_cx = vec![C64::new(0.0, 0.0); nr];
            for (s, &r) in field.samples.iter().zip(&row_of) {
                let w = C64::from_polar(1.0, k * s.x_mm * u);
                s_co[r] += s.co * w;
                s_cx[r] += s.cx * w;
            }
            let mut acc = Vec::with_capacity(n);
            let (mut pk_co, mut pk_cx) = (0.0f64, 0.0f64);
            for (j, &v) in grid.iter().enumerate() {
                let rho2 = u * u + v * v;
                if rho2 >= 1.0 {
                    continue;
                }
                let ct = (1.0 - rho2).sqrt();
                let row = &ev[j * nr..(j + 1) * nr];
                let mut co = C64::new(0.0, 0.0);
                let mut cx = C64::new(0.0, 0.0);
                for r in 0..nr {
                    co += s_co[r] * row[r];
                    cx += s_cx[r] * row[r];
                }
                let ef = elem.value(ct).powi(2);
                let (pc, px) = (co.norm_sqr() * ef, cx.norm_sqr() * ef);
                pk_co = pk_co.max(pc);
                pk_cx = pk_cx.max(px);
                acc.push((pc + px) / ct);
            }
            (pairwise(&acc), pk_co, pk_cx)
        })
        .collect();

    let sums: Vec<f64> = cols.iter().map(|c| c.0).collect();
    Ok(Directivity {
        radiated: pairwise(&sums) * h * h,
        grid_peak_co: cols.iter().map(|c| c.1).fold(0.0, f64::max),
        grid_peak_cx: cols.iter().map(|c| c.2).fold(0.0, f64::max),
    })
}

/// Efficiency factors applied to directivity to obtain realized gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub spillover: f64,
    /// Share of intercepted power landing on populated sites.
    pub cutout_fill: f64,
    /// Output over incident power through grid, surface and grid.
    pub polarization_chain: f64,
    pub radiation: f64,
    pub total: f64,
    pub total_db: f64,
}

impl EfficiencyBudget {
    pub fn new(spillover: f64, cutout_fill: f64, polarization_chain: f64, radiation: f64) -> Self {
        let total = spillover * cutout_fill * polarization_chain * radiation;
        EfficiencyBudget {
            spillover,
            cutout_fill,
            polarization_chain,
            radiation,
            total,
            total_db: power_db(total),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutMetrics {
    pub phi_deg: f64,
    pub peak_theta_deg: f64,
    pub hpbw_deg: f64,
    pub sll_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternMetrics {
    pub freq_ghz: f64,
    pub realized_gain_dbi: f64,
    pub directivity_dbi: f64,
    pub hpbw_xoz_deg: f64,
    pub hpbw_yoz_deg: f64,
    /// Highest sidelobe over all cuts relative to the peak.
    pub sll_db: f64,
    pub xpol_level_db: f64,
    pub aperture_efficiency: f64,
    /// `4πD²/λ²` for the same square aperture.
    pub uniform_directivity_dbi: f64,
    /// Uniform minus actual directivity: taper, phase error and amplitude
    /// ripple together.
    pub illumination_loss_db: f64,
    pub efficiency: EfficiencyBudget,
    pub cuts: Vec<CutMetrics>,
}

/// `G λ² / (4π D²)` for a square aperture of side `d_mm`.
pub fn aperture_efficiency(gain_dbi: f64, f: Freq, d_mm: f64) -> f64 {
    let g = 10f64.powf(gain_dbi / 10.0);
    g * f.wavelength_mm().powi(2) / (4.0 * std::f64::consts::PI * d_mm * d_mm)
}

/// Golden-section search for the maximum of `g` on `[a, b]`.
fn golden_max(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut gc, mut gd) = (g(c), g(d));
    for _ in 0..60 {
        if gc > gd {
            b = d;
            d = c;
            gd = gc;
            c = b - r * (b - a);
            gc = g(c);
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + r * (b - a);
            gd = g(d);
        }
        if (b - a).abs() < 1e-9 {
            break;
        }
    }
    let x = 0.5 * (a + b);
    (x, g(x))
}

/// Crossing of `g` through `level` between `a` (above) and `b` (below).
fn bisect_level(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64, level: f64) -> f64 {
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if g(m) >= level {
            a = m;
        } else {
            b = m;
        }
        if (b - a).abs() < 1e-10 {
            break;
        }
    }
    0.5 * (a + b)
}

fn cut_metrics(sum: &Summer, theta: &[f64], cut: &PatternCut) -> Result<(CutMetrics, f64)> {
    let phi = cut.phi_deg;
    let p: Vec<f64> = cut.co.iter().map(|e| e.norm_sqr()).collect();
    let ip = (0..p.len())
        .max_by(|&a, &b| p[a].total_cmp(&p[b]))
        .expect("non-empty cut");
    if p[ip] <= 0.0 {
        return Err(Error::Unresolved(format!(
            "no co-polar radiation in the phi = {phi} cut"
        )));
    }
    let g = |t: f64| sum.co_power(t, phi);
    let (t_pk, p_pk) = if ip > 0 && ip + 1 < p.len() {
        golden_max(g, theta[ip - 1], theta[ip + 1])
    } else {
        (theta[ip], p[ip])
    };
    let half = 0.5 * p_pk;
    let right = (ip + 1..p.len()).find(|&i| p[i] < half);
    let left = (0..ip).rev().find(|&i| p[i] < half);
    let (Some(ir), Some(il)) = (right, left) else {
        return Err(Error::Unresolved(format!(
            "half-power points not inside the theta grid (phi = {phi})"
        )));
    };
    let hi = bisect_level(g, theta[ir - 1].max(t_pk), theta[ir], half);
    let lo = bisect_level(g, theta[il + 1].min(t_pk), theta[il], half);
    let hpbw = hi - lo;
    let local_step = theta[ir] - theta[ir - 1];
    if local_step > hpbw / 4.0 {
        return Err(Error::Unresolved(format!(
            "theta step {local_step} deg too coarse for a {hpbw:.3} deg beam (phi = {phi})"
        )));
    }

    // first nulls: first local minima on either side of the peak
    let mut nr = ir;
    while nr + 1 < p.len() && p[nr + 1] < p[nr] {
        nr += 1;
    }
    let mut nl = il;
    while nl > 0 && p[nl - 1] < p[nl] {
        nl -= 1;
    }
    let side = (0..nl)
        .chain(nr + 1..p.len())
        .max_by(|&a, &b| p[a].total_cmp(&p[b]));
    let sll = match side {
        Some(m) => {
            let lobe = if m > 0 && m + 1 < p.len() {
                golden_max(g, theta[m - 1], theta[m + 1]).1.max(p[m])
            } else {
                p[m]
            };
            power_db(lobe / p_pk)
        }
        None => DB_FLOOR,
    };
    Ok((
        CutMetrics {
            phi_deg: phi,
            peak_theta_deg: t_pk,
            hpbw_deg: hpbw,
            sll_db: sll,
        },
        p_pk,
    ))
}

/// Beam metrics from cuts plus the sphere quadrature.
pub fn metrics(
    pattern: &FarFieldPattern,
    field: &ApertureField,
    aperture_d_mm: f64,
    spillover: f64,
    opts: &AnalysisOptions,
) -> Result<PatternMetrics> {
    let f = field.freq()?;
    let sum = Summer {
        samples: &field.samples,
        k: f.wavenumber(),
        elem: opts.element_factor,
    };
    let mut cuts = Vec::new();
    let mut peak = sum.at(0.0, 0.0).0.norm_sqr();
    for c in &pattern.cuts {
        let (m, p) = cut_metrics(&sum, &pattern.theta_deg, c)?;
        peak = peak.max(p);
        cuts.push(m);
    }
    let find = |phi: f64| {
        cuts.iter()
            .find(|c| (c.phi_deg - phi).abs() < 1e-9)
            .map(|c| c.hpbw_deg)
            .ok_or_else(|| Error::Config(format!("metrics need a phi = {phi} cut")))
    };
    let (hpbw_xoz, hpbw_yoz) = (find(0.0)?, find(90.0)?);

    let dq = directivity(field, opts.element_factor, opts.quadrature_step)?;
    peak = peak.max(dq.grid_peak_co);
    let cut_cx = pattern
        .cuts
        .iter()
        .flat_map(|c| c.cx.iter())
        .map(|e| e.norm_sqr())
        .fold(0.0, f64::max);
    let xpol = power_db(cut_cx.max(dq.grid_peak_cx) / peak);

    let d_dbi = dq.dbi(peak);
    let eff = EfficiencyBudget::new(
        spillover,
        field.fill_fraction,
        field.chain_efficiency(),
        opts.radiation_efficiency,
    );
    let gain = d_dbi + eff.total_db;
    let uniform =
        power_db(4.0 * std::f64::consts::PI * aperture_d_mm.powi(2) / f.wavelength_mm().powi(2));
    Ok(PatternMetrics {
        freq_ghz: f.ghz(),
        realized_gain_dbi: gain,
        directivity_dbi: d_dbi,
        hpbw_xoz_deg: hpbw_xoz,
        hpbw_yoz_deg: hpbw_yoz,
        sll_db: cuts.iter().map(|c| c.sll_db).fold(DB_FLOOR, f64::max),
        xpol_level_db: xpol,
        aperture_efficiency: aperture_efficiency(gain, f, aperture_d_mm),
        uniform_directivity_dbi: uniform,
        illumination_loss_db: uniform - d_dbi,
        efficiency: eff,
        cuts,
    })
}

/// Pattern and metrics of an aperture field.
pub fn evaluate(
    field: &ApertureField,
    aperture_d_mm: f64,
    spillover: f64,
    opts: &AnalysisOptions,
) -> Result<(FarFieldPattern, PatternMetrics)> {
    let pattern = far_field(
        field,
        &opts.theta_grid_deg,
        &opts.phi_cuts_deg,
        opts.element_factor,
    )?;
    let m = metrics(&pattern, field, aperture_d_mm, spillover, opts)?;
    Ok((pattern, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub field: ApertureField,
    pub pattern: FarFieldPattern,
    pub metrics: PatternMetrics,
}

/// Illuminates a design at `f` and evaluates its radiation.
pub fn analyze(
    design: &DesignedAperture,
    source: &dyn PhaseSource,
    feed: &FeedModel,
    mpg: &MpgModel,
    f: Freq,
    opts: &AnalysisOptions,
) -> Result<Analysis> {
    if !(opts.radiation_efficiency > 0.0 && opts.radiation_efficiency <= 1.0) {
        return Err(Error::Config(format!(
            "radiation efficiency must lie in (0, 1], got {}",
            opts.radiation_efficiency
        )));
    }
    let field = illuminate(design, source, feed, mpg, f)?;
    let spill = spillover_efficiency(feed, &design.folded_geometry);
    let (pattern, metrics) = evaluate(&field, design.folded_geometry.aperture_d, spill, opts)?;
    Ok(Analysis {
        field,
        pattern,
        metrics,
    })
}

/// Writes `freq_ghz, phi_deg, theta_deg, co_db, cx_db`, normalized to the
/// co-polar peak of the pattern.
pub fn export_pattern_csv<W: Write>(pattern: &FarFieldPattern, mut sink: W) -> std::io::Result<()> {
    let peak = pattern.peak_co_power();
    writeln!(sink, "freq_ghz,phi_deg,theta_deg,co_db,cx_db")?;
    for c in &pattern.cuts {
        for (i, t) in pattern.theta_deg.iter().enumerate() {
            writeln!(
                sink,
                "{:.4},{:.2},{:.3},{:.4},{:.4}",
                pattern.freq_ghz,
                c.phi_deg,
                t,
                power_db(c.co[i].norm_sqr() / peak),
                power_db(c.cx[i].norm_sqr() / peak)
            )?;
        }
    }
    Ok(())
}
