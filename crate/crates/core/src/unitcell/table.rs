//! Tabulated unit-cell sweeps.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::emcore::lerp_polar;
use crate::error::RowProblem;
use crate::{Error, Freq, Result, C64};

use super::source::{Candidate, PhaseSource};
use super::CellGeometry;

/// Allowed excess of `|r_xy|² + |r_yy|²` over one.
pub const PASSIVITY_TOL: f64 = 1e-6;

const HEADER: [&str; 10] = [
    "freq_ghz", "lx_mm", "ly_mm", "hu_mm", "w1_mm", "w2_mm", "re_rxy", "im_rxy", "re_ryy", "im_ryy",
];

/// Two frequencies closer than this are the same sample.
const FREQ_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTableEntry {
    pub geometry: CellGeometry,
    pub freq: Freq,
    pub r_xy: C64,
    pub r_yy: C64,
}

impl PhaseTableEntry {
    fn candidate(&self) -> Candidate {
        Candidate {
            geometry: self.geometry,
            r_xy: self.r_xy,
            r_yy: self.r_yy,
        }
    }
}

/// Validated sweep table, ordered by frequency and then geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTable {
    entries: Vec<PhaseTableEntry>,
    /// `(frequency, start, end)` ranges into `entries`.
    slices: Vec<(f64, usize, usize)>,
}

type Key = [u64; 6];

fn key_of(e: &PhaseTableEntry) -> Key {
    let k = e.geometry.key();
    [
        e.freq.ghz().to_bits(),
        k[0].to_bits(),
        k[1].to_bits(),
        k[2].to_bits(),
        k[3].to_bits(),
        k[4].to_bits(),
    ]
}

impl PhaseTable {
    /// Builds a table from entries, enforcing passivity and unique keys.
    pub fn new(mut entries: Vec<PhaseTableEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Ingest {
                problems: vec![RowProblem {
                    line: 0,
                    reason: "no entries".into(),
                }],
            });
        }
        let mut problems = Vec::new();
        let mut seen = HashMap::new();
        for (i, e) in entries.iter().enumerate() {
            if let Some(reason) = entry_problem(e) {
                problems.push(RowProblem { line: i, reason });
            }
            if let Some(first) = seen.insert(key_of(e), i) {
                problems.push(RowProblem {
                    line: i,
                    reason: format!("duplicate of entry {first}"),
                });
            }
        }
        if !problems.is_empty() {
            return Err(Error::Ingest { problems });
        }
        entries.sort_by(|a, b| {
            a.freq.ghz().total_cmp(&b.freq.ghz()).then_with(|| {
                let (ka, kb) = (a.geometry.key(), b.geometry.key());
                ka.iter()
                    .zip(&kb)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
        });
        let mut slices: Vec<(f64, usize, usize)> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            match slices.last_mut() {
                Some(s) if e.freq.ghz() - s.0 < FREQ_EPS => s.2 = i + 1,
                _ => slices.push((e.freq.ghz(), i, i + 1)),
            }
        }
        Ok(PhaseTable { entries, slices })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        ingest_phase_table(std::io::BufReader::new(file))
    }

    pub fn write_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        export_phase_table(self, std::io::BufWriter::new(file))
    }

    pub fn entries(&self) -> &[PhaseTableEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.0).collect()
    }

    fn slice(&self, idx: usize) -> &[PhaseTableEntry] {
        let (_, a, b) = self.slices[idx];
        &self.entries[a..b]
    }

    /// Candidates at `f`: the tabulated slice, or a blend of the two
    /// bracketing slices (linear in magnitude and unwrapped phase) over the
    /// geometries present in both.
    pub fn at_frequency(&self, f: Freq) -> Result<Vec<Candidate>> {
        let g = f.ghz();
        if let Some(i) = self.slices.iter().position(|s| (s.0 - g).abs() < FREQ_EPS) {
            return Ok(self
                .slice(i)
                .iter()
                .map(PhaseTableEntry::candidate)
                .collect());
        }
        let hi = self.slices.iter().position(|s| s.0 > g);
        let (lo, hi) = match hi {
            Some(h) if h > 0 => (h - 1, h),
            _ => {
                let fs = self.frequencies();
                return Err(Error::Range(format!(
                    "{g} GHz outside the tabulated band [{}, {}] GHz",
                    fs[0],
                    fs[fs.len() - 1]
                )));
            }
        };
        let (fa, fb) = (self.slices[lo].0, self.slices[hi].0);
        let t = (g - fa) / (fb - fa);
        let upper: HashMap<[u64; 5], &PhaseTableEntry> = self
            .slice(hi)
            .iter()
            .map(|e| (geom_bits(&e.geometry), e))
            .collect();
        Ok(self
            .slice(lo)
            .iter()
            .filter_map(|a| {
                let b = upper.get(&geom_bits(&a.geometry))?;
                Some(Candidate {
                    geometry: a.geometry,
                    r_xy: lerp_polar(a.r_xy, b.r_xy, t),
                    r_yy: lerp_polar(a.r_yy, b.r_yy, t),
                })
            })
            .collect())
    }
}

fn geom_bits(g: &CellGeometry) -> [u64; 5] {
    g.key().map(f64::to_bits)
}

fn geom_dist2(a: &CellGeometry, b: &CellGeometry) -> f64 {
    let (ka, kb) = (a.key(), b.key());
    ka.iter().zip(&kb).map(|(x, y)| (x - y).powi(2)).sum()
}

fn nearest(cands: &[Candidate], g: &CellGeometry) -> Option<Candidate> {
    cands
        .iter()
        .min_by(|a, b| geom_dist2(&a.geometry, g).total_cmp(&geom_dist2(&b.geometry, g)))
        .copied()
}

fn entry_problem(e: &PhaseTableEntry) -> Option<String> {
    let vals = [e.r_xy.re, e.r_xy.im, e.r_yy.re, e.r_yy.im];
    if vals.iter().any(|v| !v.is_finite()) {
        return Some("non-finite reflection coefficient".into());
    }
    let p = e.r_xy.norm_sqr() + e.r_yy.norm_sqr();
    if p > 1.0 + PASSIVITY_TOL {
        return Some(format!("passivity violated: |r_xy|^2 + |r_yy|^2 = {p}"));
    }
    None
}

impl PhaseSource for PhaseTable {
    fn label(&self) -> String {
        format!("table ({} entries)", self.len())
    }

    fn candidates(&self, f: Freq) -> Result<Vec<Candidate>> {
        self.at_frequency(f)
    }

    /// Nearest tabulated geometry, interpolated in frequency.
    fn response(&self, geometry: &CellGeometry, f: Freq) -> Result<(C64, C64)> {
        let c = nearest(&self.at_frequency(f)?, geometry)
            .ok_or_else(|| Error::Range(format!("no tabulated geometry at {} GHz", f.ghz())))?;
        Ok((c.r_xy, c.r_yy))
    }

    fn element_responses(
        &self,
        elements: &[(CellGeometry, (C64, C64))],
        f: Freq,
    ) -> Result<Vec<(C64, C64)>> {
        let cands = self.at_frequency(f)?;
        let exact: HashMap<[u64; 5], &Candidate> =
            cands.iter().map(|c| (geom_bits(&c.geometry), c)).collect();
        elements
            .iter()
            .map(|(g, _)| {
                let c = match exact.get(&geom_bits(g)) {
                    Some(c) => **c,
                    None => nearest(&cands, g).ok_or_else(|| {
                        Error::Range(format!("no tabulated geometry at {} GHz", f.ghz()))
                    })?,
                };
                Ok((c.r_xy, c.r_yy))
            })
            .collect()
    }
}

/// Reads a sweep CSV. Every malformed, non-passive or duplicate row is
/// reported with its line number.
pub fn ingest_phase_table<R: Read>(source: R) -> Result<PhaseTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = rdr
        .headers()
        .map_err(|e| Error::Malformed(format!("unreadable header: {e}")))?
        .clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::Ingest {
            problems: vec![RowProblem {
                line: 1,
                reason: format!(
                    "expected header {:?}, found {:?}",
                    HEADER.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            }],
        });
    }

    let mut entries = Vec::new();
    let mut problems = Vec::new();
    let mut seen: HashMap<Key, usize> = HashMap::new();
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
        match parse_row(&rec) {
            Ok(e) => {
                if let Some(reason) = entry_problem(&e) {
                    problems.push(RowProblem { line, reason });
                } else if let Some(first) = seen.insert(key_of(&e), line) {
                    problems.push(RowProblem {
                        line,
                        reason: format!("duplicate key, first seen on line {first}"),
                    });
                } else {
                    entries.push(e);
                }
            }
            Err(reason) => problems.push(RowProblem { line, reason }),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Ingest { problems });
    }
    PhaseTable::new(entries)
}

fn parse_row(rec: &csv::StringRecord) -> std::result::Result<PhaseTableEntry, String> {
    if rec.len() != HEADER.len() {
        return Err(format!(
            "expected {} fields, found {}",
            HEADER.len(),
            rec.len()
        ));
    }
    let mut v = [0.0; 10];
    for (i, field) in rec.iter().enumerate() {
        v[i] = field
            .parse::<f64>()
            .map_err(|_| format!("column {}: cannot parse {field:?} as a number", HEADER[i]))?;
        if !v[i].is_finite() {
            return Err(format!("column {}: non-finite value", HEADER[i]));
        }
    }
    let freq = Freq::new(v[0]).map_err(|e| e.to_string())?;
    let geometry = CellGeometry::new(v[1], v[2], v[3], v[4], v[5]).map_err(|e| e.to_string())?;
    Ok(PhaseTableEntry {
        geometry,
        freq,
        r_xy: C64::new(v[6], v[7]),
        r_yy: C64::new(v[8], v[9]),
    })
}

/// Writes the table in the sweep CSV schema with shortest round-trip floats.
pub fn export_phase_table<W: Write>(table: &PhaseTable, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let fail = |e: csv::Error| Error::Malformed(format!("csv write failed: {e}"));
    w.write_record(HEADER).map_err(fail)?;
    for e in &table.entries {
        let g = &e.geometry;
        let row = [
            e.freq.ghz(),
            g.l_x,
            g.l_y,
            g.h_u,
            g.w_1,
            g.w_2,
            e.r_xy.re,
            e.r_xy.im,
            e.r_yy.re,
            e.r_yy.im,
        ];
        w.write_record(row.iter().map(|x| x.to_string()))
            .map_err(fail)?;
    }
    w.flush()
        .map_err(|e| Error::Malformed(format!("csv flush failed: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emcore::{phase_deg, polar_deg, wrap_deg_signed};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const HEAD: &str = "freq_ghz,lx_mm,ly_mm,hu_mm,w1_mm,w2_mm,re_rxy,im_rxy,re_ryy,im_ryy\n";

    fn lines(err: Error) -> Vec<usize> {
        match err {
            Error::Ingest { problems } => problems.iter().map(|p| p.line).collect(),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_body_has_no_entries() {
        let err = ingest_phase_table(HEAD.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("no entries"), "{err}");
    }

    #[test]
    fn single_row_round_trips() {
        let csv = format!("{HEAD}28,2.2,2.2,0.2,1,1,0.1,0.9,0.05,-0.02\n");
        let t = ingest_phase_table(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 1);
        let mut out = Vec::new();
        export_phase_table(&t, &mut out).unwrap();
        let back = ingest_phase_table(out.as_slice()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn passivity_violation_reports_line() {
        // |r_xy|^2 + |r_yy|^2 = 1.5
        let csv = format!("{HEAD}28,1,1,0.2,1,1,1,0,0.5,0.5\n28,2,1,0.2,1,1,1,0,0,0\n");
        assert_eq!(
            lines(ingest_phase_table(csv.as_bytes()).unwrap_err()),
            vec![2]
        );
    }

    #[test]
    fn all_problems_are_collected() {
        let csv = format!(
            "{HEAD}28,1,1,0.2,1,1,0.5,0,0,0\n28,1,1,0.2,1,1,0.5,0,0,0\n28,x,1,0.2,1,1,0,0,0,0\n28,1,1\n"
        );
        assert_eq!(
            lines(ingest_phase_table(csv.as_bytes()).unwrap_err()),
            vec![3, 4, 5]
        );
    }

    #[test]
    fn wrong_header_is_rejected() {
        let err = ingest_phase_table("f,lx\n28,1\n".as_bytes()).unwrap_err();
        assert_eq!(lines(err), vec![1]);
    }

    #[test]
    fn interpolates_between_frequencies() {
        let csv = format!(
            "{HEAD}26,1,1,0.2,1,1,0.9,0,0,0\n30,1,1,0.2,1,1,0,1,0,0\n30,2,1,0.2,1,1,0,1,0,0\n"
        );
        let t = ingest_phase_table(csv.as_bytes()).unwrap();
        let c = t.at_frequency(Freq::new(28.0).unwrap()).unwrap();
        assert_eq!(c.len(), 1);
        assert_abs_diff_eq!(c[0].r_xy.norm(), 0.95, epsilon = 1e-12);
        assert_abs_diff_eq!(phase_deg(c[0].r_xy), 45.0, epsilon = 1e-12);
        assert!(matches!(
            t.at_frequency(Freq::new(31.0).unwrap()),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn response_uses_nearest_geometry() {
        let csv = format!("{HEAD}28,1,1,0.2,1,1,0.9,0,0,0\n28,3,1,0.2,1,1,0,0.9,0,0\n");
        let t = ingest_phase_table(csv.as_bytes()).unwrap();
        let g = CellGeometry::new(2.8, 1.0, 0.2, 1.0, 1.0).unwrap();
        let (x, _) = t.response(&g, Freq::new(28.0).unwrap()).unwrap();
        assert_abs_diff_eq!(x.im, 0.9);
    }

    #[test]
    fn two_level_table_lookup() {
        let csv = format!("{HEAD}28,1,1,0.2,1,1,1,0,0,0\n28,2,1,0.2,1,1,-1,0,0,0\n");
        let t = ingest_phase_table(csv.as_bytes()).unwrap();
        let m = t.matcher(Freq::new(28.0).unwrap(), 0.9).unwrap();
        for target in [0.0, 45.0, 89.0, 91.0, 200.0, 300.0] {
            let c = m.best(target).unwrap();
            assert!(wrap_deg_signed(phase_deg(c.r_xy) - target).abs() <= 90.0);
        }
    }

    proptest! {
        #[test]
        fn export_ingest_round_trip(rows in prop::collection::vec((0.1f64..6.0, 0.1f64..6.0, 0.0f64..1.0, -180.0f64..180.0, -180.0f64..180.0), 1..20)) {
            let entries: Vec<PhaseTableEntry> = rows
                .iter()
                .enumerate()
                .map(|(i, &(lx, ly, a, p, q))| PhaseTableEntry {
                    geometry: CellGeometry::new(lx, ly, 0.2, 1.0, 1.0).unwrap(),
                    freq: Freq::new(25.0 + i as f64).unwrap(),
                    r_xy: polar_deg(a, p),
                    r_yy: polar_deg((1.0 - a * a).max(0.0).sqrt() * 0.999, q),
                })
                .collect();
            let t = PhaseTable::new(entries).unwrap();
            let mut out = Vec::new();
            export_phase_table(&t, &mut out).unwrap();
            let back = ingest_phase_table(out.as_slice()).unwrap();
            prop_assert_eq!(back.len(), t.len());
            for (a, b) in back.entries().iter().zip(t.entries()) {
                prop_assert!((a.r_xy - b.r_xy).norm() < 1e-12 && (a.r_yy - b.r_yy).norm() < 1e-12);
                prop_assert_eq!(a.geometry, b.geometry);
            }
        }
    }
}
