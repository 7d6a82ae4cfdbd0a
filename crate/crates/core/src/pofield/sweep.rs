//! Realized gain across frequency and gain bandwidths.

use serde::{Deserialize, Serialize};

use crate::layout::DesignedAperture;
use crate::polarizer::MpgModel;
use crate::unitcell::PhaseSource;
use crate::{Error, Freq, Result};

use super::pattern::{analyze, AnalysisOptions, PatternMetrics};
use super::FeedModel;

/// Metrics at one frequency of a sweep.
pub type BandPoint = PatternMetrics;

/// Contiguous band around the gain peak where gain stays within `drop_db`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub drop_db: f64,
    pub f_lo_ghz: f64,
    pub f_hi_ghz: f64,
    /// `(f_hi − f_lo) / ((f_hi + f_lo)/2)` in percent.
    pub percent: f64,
    /// The band reaches the first or last sweep frequency, so the true
    /// bandwidth may be larger.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSweep {
    pub points: Vec<BandPoint>,
    pub peak_freq_ghz: f64,
    pub peak_gain_dbi: f64,
    /// Gain peaks on the first or last sample.
    pub peak_at_boundary: bool,
    pub bw_1db: Bandwidth,
    pub bw_3db: Bandwidth,
}

/// Bandwidth of a sampled gain curve, with linear interpolation of the
/// threshold crossings.
pub fn bandwidths(freqs: &[f64], gains_db: &[f64], drop_db: f64) -> Result<Bandwidth> {
    if freqs.len() != gains_db.len() || freqs.len() < 3 {
        return Err(Error::Config(
            "a gain curve needs at least three matching samples".into(),
        ));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "sweep frequencies must be strictly increasing".into(),
        ));
    }
    let ip = (0..gains_db.len())
        .max_by(|&a, &b| gains_db[a].total_cmp(&gains_db[b]))
        .expect("non-empty");
    let level = gains_db[ip] - drop_db;
    let cross = |i: usize, j: usize| {
        let t = (gains_db[i] - level) / (gains_db[i] - gains_db[j]);
        freqs[i] + t * (freqs[j] - freqs[i])
    };
    let (mut truncated, mut lo, mut hi) = (false, freqs[0], freqs[freqs.len() - 1]);
    match (ip + 1..freqs.len()).find(|&i| gains_db[i] < level) {
        Some(j) => hi = cross(j - 1, j),
        None => truncated = true,
    }
    match (0..ip).rev().find(|&i| gains_db[i] < level) {
        Some(j) => lo = cross(j + 1, j),
        None => truncated = true,
    }
    Ok(Bandwidth {
        drop_db,
        f_lo_ghz: lo,
        f_hi_ghz: hi,
        percent: 200.0 * (hi - lo) / (hi + lo),
        truncated,
    })
}

/// Analyzes a fixed design over `f_list` without re-synthesis.
pub fn band_sweep(
    design: &DesignedAperture,
    source: &dyn PhaseSource,
    feed: &FeedModel,
    mpg: &MpgModel,
    f_list: &[f64],
    opts: &AnalysisOptions,
) -> Result<BandSweep> {
    if f_list.len() < 3 {
        return Err(Error::Config(
            "a band sweep needs at least three frequencies".into(),
        ));
    }
    let points = f_list
        .iter()
        .map(|&f| Ok(analyze(design, source, feed, mpg, Freq::new(f)?, opts)?.metrics))
        .collect::<Result<Vec<_>>>()?;
    let gains: Vec<f64> = points.iter().map(|p| p.realized_gain_dbi).collect();
    let ip = (0..gains.len())
        .max_by(|&a, &b| gains[a].total_cmp(&gains[b]))
        .expect("non-empty");
    Ok(BandSweep {
        peak_freq_ghz: f_list[ip],
        peak_gain_dbi: gains[ip],
        peak_at_boundary: ip == 0 || ip + 1 == gains.len(),
        bw_1db: bandwidths(f_list, &gains, 1.0)?,
        bw_3db: bandwidths(f_list, &gains, 3.0)?,
        points,
    })
}
