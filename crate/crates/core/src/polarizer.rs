//! Strip-grid polarizer and the folded three-interaction cascade.
//!
//! Strips run along `y`: the grid reflects `y` and passes `x`. The feed's
//! `y` wave is reflected down to the surface, converted to `x` there and
//! leaves through the grid.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emcore::{amplitude_from_db, lerp_polar, phase_deg, polar_deg};
use crate::error::RowProblem;
use crate::{Error, Freq, Jones, Jones2, Result, C64};

/// Grid response at one frequency. Leakage terms are filled from the
/// lossless complement when absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MpgSample {
    pub freq_ghz: f64,
    /// Reflection for E parallel to the strips.
    pub r_parallel: C64,
    /// Transmission for E across the strips.
    pub t_perp: C64,
    /// Reflection for E across the strips.
    #[serde(default)]
    pub r_perp_leak: Option<C64>,
    /// Transmission for E parallel to the strips.
    #[serde(default)]
    pub t_parallel_leak: Option<C64>,
}

impl MpgSample {
    fn r_perp(&self) -> C64 {
        self.r_perp_leak.unwrap_or_else(|| {
            polar_deg(complement(self.t_perp.norm()), phase_deg(self.r_parallel))
        })
    }

    fn t_parallel(&self) -> C64 {
        self.t_parallel_leak.unwrap_or_else(|| {
            polar_deg(complement(self.r_parallel.norm()), phase_deg(self.t_perp))
        })
    }
}

fn complement(m: f64) -> f64 {
    (1.0 - m * m).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpgModel {
    pub strip_width_mm: f64,
    pub pitch_mm: f64,
    /// Frequency samples in increasing order; responses are interpolated
    /// between them and undefined outside.
    pub samples: Vec<MpgSample>,
}

/// Reflection loss for the parallel polarization, dB.
pub const DEFAULT_RYY_DB: f64 = -0.040;
/// Transmission loss for the perpendicular polarization, dB.
pub const DEFAULT_TXX_DB: f64 = -0.18;

impl Default for MpgModel {
    /// 0.5 mm strips on a 1 mm pitch, flat response over 20–40 GHz.
    fn default() -> Self {
        MpgModel::flat(0.5, 1.0, DEFAULT_RYY_DB, DEFAULT_TXX_DB, (20.0, 40.0))
    }
}

impl MpgModel {
    /// Frequency-flat grid with reflection 180° and transmission 0° phase.
    pub fn flat(
        strip_width_mm: f64,
        pitch_mm: f64,
        ryy_db: f64,
        txx_db: f64,
        band: (f64, f64),
    ) -> Self {
        let s = |f| MpgSample {
            freq_ghz: f,
            r_parallel: polar_deg(amplitude_from_db(ryy_db), 180.0),
            t_perp: polar_deg(amplitude_from_db(txx_db), 0.0),
            r_perp_leak: None,
            t_parallel_leak: None,
        };
        MpgModel {
            strip_width_mm,
            pitch_mm,
            samples: vec![s(band.0), s(band.1)],
        }
    }

    /// Lossless grid: reflects `y` and passes `x` completely.
    pub fn ideal() -> Self {
        MpgModel::flat(0.5, 1.0, 0.0, 0.0, (1.0, 1000.0))
    }

    pub fn band(&self) -> (f64, f64) {
        (
            self.samples[0].freq_ghz,
            self.samples[self.samples.len() - 1].freq_ghz,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strip_width_mm > 0.0 && self.strip_width_mm < self.pitch_mm) {
            return Err(Error::Config(format!(
                "strip width {} must be positive and below the pitch {}",
                self.strip_width_mm, self.pitch_mm
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::Config(
                "polarizer model has no frequency samples".into(),
            ));
        }
        for w in self.samples.windows(2) {
            if w[1].freq_ghz <= w[0].freq_ghz {
                return Err(Error::Config(
                    "polarizer samples must be strictly increasing in frequency".into(),
                ));
            }
        }
        for s in &self.samples {
            let mags = [
                Some(s.r_parallel),
                Some(s.t_perp),
                s.r_perp_leak,
                s.t_parallel_leak,
            ];
            if mags.iter().flatten().any(|c| !(c.norm() <= 1.0 + 1e-12)) {
                return Err(Error::Config(format!(
                    "non-passive polarizer sample at {} GHz",
                    s.freq_ghz
                )));
            }
        }
        Ok(())
    }

    /// Response interpolated at `f`.
    pub fn sample_at(&self, f: Freq) -> Result<MpgSample> {
        let g = f.ghz();
        let (lo, hi) = self.band();
        if g < lo - 1e-9 || g > hi + 1e-9 {
            return Err(Error::Range(format!(
                "{g} GHz outside the polarizer band [{lo}, {hi}] GHz"
            )));
        }
        let k = self.samples.partition_point(|s| s.freq_ghz < g);
        if k == 0 {
            return Ok(self.samples[0]);
        }
        if k == self.samples.len() {
            return Ok(self.samples[k - 1]);
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        let t = (g - a.freq_ghz) / (b.freq_ghz - a.freq_ghz);
        Ok(MpgSample {
            freq_ghz: g,
            r_parallel: lerp_polar(a.r_parallel, b.r_parallel, t),
            t_perp: lerp_polar(a.t_perp, b.t_perp, t),
            r_perp_leak: Some(lerp_polar(a.r_perp(), b.r_perp(), t)),
            t_parallel_leak: Some(lerp_polar(a.t_parallel(), b.t_parallel(), t)),
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ingest_mpg_csv(std::io::BufReader::new(file), 0.5, 1.0)
    }
}

/// Grid reflection operator `diag(r_xx_leak, r_parallel)`.
pub fn mpg_reflect_jones(m: &MpgModel, f: Freq) -> Result<Jones> {
    let s = m.sample_at(f)?;
    Ok(Jones::diag(s.r_perp(), s.r_parallel))
}

/// Grid transmission operator `diag(t_perp, t_yy_leak)`.
pub fn mpg_transmit_jones(m: &MpgModel, f: Freq) -> Result<Jones> {
    let s = m.sample_at(f)?;
    Ok(Jones::diag(s.t_perp, s.t_parallel()))
}

/// Power and amplitude bookkeeping of one pass through the fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeBudget {
    pub input_power: f64,
    /// Output `x` amplitude (co-polar for the antenna).
    pub co_pol_output: C64,
    /// Output `y` amplitude leaking through the grid.
    pub cross_leakage: C64,
    /// Loss of each interaction in dB: grid reflection, surface, grid
    /// transmission.
    pub stage_loss_db: [f64; 3],
    /// Power sent back down by the grid after the surface bounce.
    pub trapped_power: f64,
    pub output_power: f64,
    pub insertion_loss_db: f64,
}

impl CascadeBudget {
    pub fn co_pol_amp(&self) -> f64 {
        self.co_pol_output.norm()
    }

    pub fn cross_leakage_amp(&self) -> f64 {
        self.cross_leakage.norm()
    }
}

/// Loss in dB of a power ratio, capped at 400 dB for a dead stage.
pub(crate) fn loss_db(ratio: f64) -> f64 {
    -10.0 * ratio.max(1e-40).log10()
}

/// Traces `feed` through grid reflection, the surface element and grid
/// transmission.
pub fn folded_cascade(
    feed: &Jones2,
    mpg: &MpgModel,
    element: &Jones,
    f: Freq,
) -> Result<CascadeBudget> {
    let refl = mpg_reflect_jones(mpg, f)?;
    let trans = mpg_transmit_jones(mpg, f)?;
    Ok(cascade_with(feed, &refl, element, &trans))
}

pub(crate) fn cascade_with(
    feed: &Jones2,
    refl: &Jones,
    element: &Jones,
    trans: &Jones,
) -> CascadeBudget {
    let p0 = feed.norm_sqr();
    let v1 = refl.apply(feed);
    let v2 = element.apply(&v1);
    let out = trans.apply(&v2);
    let back = refl.apply(&v2);
    let (p1, p2, p3) = (v1.norm_sqr(), v2.norm_sqr(), out.norm_sqr());
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    CascadeBudget {
        input_power: p0,
        co_pol_output: out.ex,
        cross_leakage: out.ey,
        stage_loss_db: [
            loss_db(ratio(p1, p0)),
            loss_db(ratio(p2, p1)),
            loss_db(ratio(p3, p2)),
        ],
        trapped_power: back.norm_sqr(),
        output_power: p3,
        insertion_loss_db: loss_db(ratio(p3, p0)),
    }
}

/// Reads a grid response CSV: `freq_ghz, ryy_db, txx_db` with optional
/// `ryy_phase_deg, txx_phase_deg` (default 180° and 0°).
pub fn ingest_mpg_csv<R: Read>(source: R, strip_width_mm: f64, pitch_mm: f64) -> Result<MpgModel> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr
        .headers()
        .map_err(|e| Error::Malformed(format!("unreadable header: {e}")))?
        .clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(cf), Some(cr), Some(ct)) = (col("freq_ghz"), col("ryy_db"), col("txx_db")) else {
        return Err(Error::Ingest {
            problems: vec![RowProblem {
                line: 1,
                reason: "header must contain freq_ghz, ryy_db, txx_db".into(),
            }],
        });
    };
    let (cpr, cpt) = (col("ryy_phase_deg"), col("txx_phase_deg"));

    let mut samples = Vec::new();
    let mut problems = Vec::new();
    for rec in rdr.records() {
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line() as usize);
                problems.push(RowProblem {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let num = |c: Option<usize>, default: f64| -> std::result::Result<f64, String> {
            match c {
                None => Ok(default),
                Some(c) => {
                    let s = rec.get(c).ok_or_else(|| {
                        format!("missing column {}", header.get(c).unwrap_or("?"))
                    })?;
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| format!("cannot parse {s:?} as a number"))
                }
            }
        };
        let row = (|| {
            let f = num(Some(cf), 0.0)?;
            let (r, t) = (num(Some(cr), 0.0)?, num(Some(ct), 0.0)?);
            let (pr, pt) = (num(cpr, 180.0)?, num(cpt, 0.0)?);
            if f <= 0.0 {
                return Err("frequency must be positive".to_string());
            }
            if r > 1e-9 || t > 1e-9 {
                return Err("gain above 0 dB is not passive".to_string());
            }
            Ok(MpgSample {
                freq_ghz: f,
                r_parallel: polar_deg(amplitude_from_db(r), pr),
                t_perp: polar_deg(amplitude_from_db(t), pt),
                r_perp_leak: None,
                t_parallel_leak: None,
            })
        })();
        match row {
            Ok(s) => {
                if samples
                    .last()
                    .is_some_and(|p: &MpgSample| p.freq_ghz >= s.freq_ghz)
                {
                    problems.push(RowProblem {
                        line,
                        reason: "frequencies must be strictly increasing".into(),
                    });
                } else {
                    samples.push(s);
                }
            }
            Err(reason) => problems.push(RowProblem { line, reason }),
        }
    }
    if samples.is_empty() && problems.is_empty() {
        problems.push(RowProblem {
            line: 0,
            reason: "no entries".into(),
        });
    }
    if !problems.is_empty() {
        return Err(Error::Ingest { problems });
    }
    let m = MpgModel {
        strip_width_mm,
        pitch_mm,
        samples,
    };
    m.validate()?;
    Ok(m)
}
