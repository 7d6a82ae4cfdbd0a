//! Solid builders: rectilinear unions, the substrate slab and the panels.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::Mesh;
use crate::layout::{DesignedAperture, FeedCutout};
use crate::polarizer::MpgModel;
use crate::unitcell::{CellGeometry, EIGEN_AXIS_DEG};
use crate::{Error, Result};

/// Printed ridge height carrying the polarizer ink, mm.
pub const DEFAULT_STRIP_H_MM: f64 = 0.1;
/// Side of the square polarizer panel, mm.
pub const DEFAULT_MPG_PANEL_MM: f64 = 180.0;

/// Coordinates closer than this are treated as one grid line, mm.
const SNAP_MM: f64 = 1e-7;

/// Axis-aligned box footprint in a local `(u, v)` frame with its height.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Rect {
    u0: f64,
    u1: f64,
    v0: f64,
    v1: f64,
    h: f64,
}

impl Rect {
    fn centred(cu: f64, cv: f64, du: f64, dv: f64, h: f64) -> Rect {
        Rect {
            u0: cu - du / 2.0,
            u1: cu + du / 2.0,
            v0: cv - dv / 2.0,
            v1: cv + dv / 2.0,
            h,
        }
    }

    /// Shares area or a side of positive length with `o`. Corner contact
    /// alone does not count.
    fn touches(&self, o: &Rect) -> bool {
        let du = self.u1.min(o.u1) - self.u0.max(o.u0);
        let dv = self.v1.min(o.v1) - self.v0.max(o.v0);
        du > -SNAP_MM && dv > -SNAP_MM && du.max(dv) > SNAP_MM
    }
}

/// Sorted grid lines with near-duplicates merged.
fn grid_lines(mut xs: Vec<f64>) -> Vec<f64> {
    xs.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(xs.len());
    for x in xs {
        if out.last().is_none_or(|&l| x - l > SNAP_MM) {
            out.push(x);
        }
    }
    out
}

fn line_index(lines: &[f64], x: f64) -> usize {
    lines.partition_point(|&l| l < x - SNAP_MM)
}

/// Mesh of the union of boxes standing on `z = z0`, mapped through the
/// rotation `(u, v) → (c·u − s·v, s·u + c·v)`.
///
/// Each grid cell takes the tallest covering box. Walls are split at every
/// distinct height so that all edges are shared by exactly two faces.
fn rectilinear_union(rects: &[Rect], z0: f64, rotation_deg: f64) -> Mesh {
    let us = grid_lines(rects.iter().flat_map(|r| [r.u0, r.u1]).collect());
    let vs = grid_lines(rects.iter().flat_map(|r| [r.v0, r.v1]).collect());
    let mut levels = grid_lines(rects.iter().map(|r| r.h).chain([0.0]).collect());
    levels.dedup();

    let mut cells: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for r in rects {
        let k = line_index(&levels, r.h);
        for i in line_index(&us, r.u0)..line_index(&us, r.u1) {
            for j in line_index(&vs, r.v0)..line_index(&vs, r.v1) {
                let e = cells.entry((i, j)).or_insert(0);
                *e = (*e).max(k);
            }
        }
    }

    let (s, c) = rotation_deg.to_radians().sin_cos();
    let mut mesh = Mesh::default();
    let mut index: BTreeMap<(usize, usize, usize), u32> = BTreeMap::new();
    let mut vid = |mesh: &mut Mesh, i: usize, j: usize, k: usize| -> u32 {
        *index.entry((i, j, k)).or_insert_with(|| {
            let (u, v) = (us[i], vs[j]);
            mesh.vertices
                .push([c * u - s * v, s * u + c * v, z0 + levels[k]]);
            (mesh.vertices.len() - 1) as u32
        })
    };
    let mut quad = |mesh: &mut Mesh, q: [(usize, usize, usize); 4]| {
        let [a, b, c, d] = q.map(|(i, j, k)| vid(mesh, i, j, k));
        mesh.triangles.push([a, b, c]);
        mesh.triangles.push([a, c, d]);
    };
    let height = |i: Option<usize>, j: Option<usize>| match (i, j) {
        (Some(i), Some(j)) => cells.get(&(i, j)).copied().unwrap_or(0),
        _ => 0,
    };

    for (&(i, j), &k) in &cells {
        quad(
            &mut mesh,
            [(i, j, k), (i + 1, j, k), (i + 1, j + 1, k), (i, j + 1, k)],
        );
        quad(
            &mut mesh,
            [(i, j, 0), (i, j + 1, 0), (i + 1, j + 1, 0), (i + 1, j, 0)],
        );
        for b in height(Some(i + 1), Some(j))..k {
            quad(
                &mut mesh,
                [
                    (i + 1, j, b),
                    (i + 1, j + 1, b),
                    (i + 1, j + 1, b + 1),
                    (i + 1, j, b + 1),
                ],
            );
        }
        for b in height(i.checked_sub(1), Some(j))..k {
            quad(
                &mut mesh,
                [(i, j + 1, b), (i, j, b), (i, j, b + 1), (i, j + 1, b + 1)],
            );
        }
        for b in height(Some(i), Some(j + 1))..k {
            quad(
                &mut mesh,
                [
                    (i + 1, j + 1, b),
                    (i, j + 1, b),
                    (i, j + 1, b + 1),
                    (i + 1, j + 1, b + 1),
                ],
            );
        }
        for b in height(Some(i), j.checked_sub(1))..k {
            quad(
                &mut mesh,
                [(i, j, b), (i + 1, j, b), (i + 1, j, b + 1), (i, j, b + 1)],
            );
        }
    }
    mesh
}

fn cross_rects(g: &CellGeometry, cu: f64, cv: f64) -> [Rect; 2] {
    [
        Rect::centred(cu, cv, g.l_x, g.w_1, g.h_u),
        Rect::centred(cu, cv, g.w_2, g.l_y, g.h_u),
    ]
}

fn check_cross(g: &CellGeometry) -> Result<()> {
    let dims = [g.l_x, g.l_y, g.w_1, g.w_2, g.h_u];
    if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::Mesh(format!(
            "cross arm with a zero dimension: {dims:?}"
        )));
    }
    Ok(())
}

/// Footprint area of the cross: both arms minus their common square.
pub fn cross_area(g: &CellGeometry) -> f64 {
    g.l_x * g.w_1 + g.l_y * g.w_2 - g.l_x.min(g.w_2) * g.l_y.min(g.w_1)
}

pub fn cross_volume(g: &CellGeometry) -> f64 {
    cross_area(g) * g.h_u
}

/// Cross of two orthogonal arms (`l_x × w_1` along `u`, `l_y × w_2` along
/// `v`) on the substrate top face, with `u` at `rotation_deg` from `x`.
pub fn cross_solid(g: &CellGeometry, center: (f64, f64), rotation_deg: f64) -> Result<Mesh> {
    check_cross(g)?;
    let z0 = g.substrate_h_s;
    let m = rectilinear_union(&cross_rects(g, 0.0, 0.0), z0, rotation_deg);
    Ok(m.translated([center.0, center.1, 0.0]))
}

/// Closed prism over the annulus between a convex outer polygon and an
/// optional convex hole, both counter-clockwise around the origin.
fn prism(outer: &[(f64, f64)], hole: &[(f64, f64)], z0: f64, z1: f64) -> Result<Mesh> {
    let mut mesh = Mesh::default();
    let n = outer.len();
    let m = hole.len();
    for &(x, y) in outer.iter().chain(hole) {
        mesh.vertices.push([x, y, z0]);
    }
    for &(x, y) in outer.iter().chain(hole) {
        mesh.vertices.push([x, y, z1]);
    }
    let top = (n + m) as u32;
    let o = |i: usize| (i % n) as u32;
    let h = |j: usize| (n + j % m) as u32;

    let mut cap: Vec<[u32; 3]> = Vec::new();
    if m == 0 {
        cap.extend((1..n - 1).map(|i| [0, i as u32, i as u32 + 1]));
    } else {
        // angular merge of the two rings
        let ang = |p: (f64, f64)| p.1.atan2(p.0);
        let mut events: Vec<(f64, bool, usize)> = outer
            .iter()
            .enumerate()
            .map(|(i, &p)| (ang(p), true, i))
            .chain(hole.iter().enumerate().map(|(j, &p)| (ang(p), false, j)))
            .collect();
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let last = |outer_ring: bool| {
            events
                .iter()
                .rev()
                .find(|e| e.1 == outer_ring)
                .map(|e| e.2)
                .expect("both rings present")
        };
        let (mut ci, mut cj) = (last(true), last(false));
        for &(_, is_outer, k) in &events {
            if is_outer {
                cap.push([o(ci), o(k), h(cj)]);
                ci = k;
            } else {
                cap.push([o(ci), h(k), h(cj)]);
                cj = k;
            }
        }
    }
    for t in &cap {
        let a = mesh.vertices[t[0] as usize];
        let b = mesh.vertices[t[1] as usize];
        let c = mesh.vertices[t[2] as usize];
        let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if !(area2 > 2.0 * super::DEGENERATE_AREA_MM2) {
            return Err(Error::Mesh(
                "cutout cannot be triangulated inside the slab".into(),
            ));
        }
        mesh.triangles.push([t[0] + top, t[1] + top, t[2] + top]);
        mesh.triangles.push([t[0], t[2], t[1]]);
    }
    let mut wall = |a: u32, b: u32| {
        mesh.triangles.push([a, b, b + top]);
        mesh.triangles.push([a, b + top, a + top]);
    };
    for i in 0..n {
        wall(o(i), o(i + 1));
    }
    for j in 0..m {
        wall(h(j + 1), h(j));
    }
    Ok(mesh)
}

/// `d × d × h_s` substrate centred on the axis with the feed cutout removed.
pub fn slab_solid(d: f64, h_s: f64, cutout: &FeedCutout) -> Result<Mesh> {
    if !(d > 0.0 && h_s > 0.0) {
        return Err(Error::Mesh(format!(
            "slab {d} × {h_s} mm has a zero dimension"
        )));
    }
    let a = d / 2.0;
    let outer = [(-a, -a), (a, -a), (a, a), (-a, a)];
    let hole: Vec<(f64, f64)> = if cutout.is_empty() {
        Vec::new()
    } else {
        cutout.corners().to_vec()
    };
    if hole.iter().any(|p| p.0.abs() >= a || p.1.abs() >= a) {
        return Err(Error::Mesh("feed cutout reaches the slab edge".into()));
    }
    prism(&outer, &hole, 0.0, h_s)
}

/// Separating-axis test between a cross arm (in the eigen frame) and the
/// cutout rectangle.
fn arm_hits_cutout(r: &Rect, cutout: &FeedCutout) -> bool {
    if cutout.is_empty() {
        return false;
    }
    let (s, c) = EIGEN_AXIS_DEG.to_radians().sin_cos();
    let arm: Vec<(f64, f64)> = [(r.u0, r.v0), (r.u1, r.v0), (r.u1, r.v1), (r.u0, r.v1)]
        .iter()
        .map(|&(u, v)| (c * u - s * v, s * u + c * v))
        .collect();
    let cut = cutout.corners();
    let axes = [
        (c, s),
        (-s, c),
        {
            let (sc, cc) = cutout.rotation_deg.to_radians().sin_cos();
            (cc, sc)
        },
        {
            let (sc, cc) = cutout.rotation_deg.to_radians().sin_cos();
            (-sc, cc)
        },
    ];
    axes.iter().all(|&(ax, ay)| {
        let proj = |p: &(f64, f64)| p.0 * ax + p.1 * ay;
        let (a0, a1) = arm
            .iter()
            .map(proj)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
                (l.min(x), h.max(x))
            });
        let (b0, b1) = cut
            .iter()
            .map(proj)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| {
                (l.min(x), h.max(x))
            });
        a1 > b0 + SNAP_MM && b1 > a0 + SNAP_MM
    })
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Substrate slab plus every populated element. Elements that touch are
/// fused into one shell; the others are separate shells on the slab.
pub fn assemble_rms_mesh(
    design: &DesignedAperture,
    substrate_h_s: f64,
    aperture_d: f64,
) -> Result<Mesh> {
    let geom = &design.folded_geometry;
    let cutout = &geom.feed_cutout;
    let mut mesh = slab_solid(aperture_d, substrate_h_s, cutout)?;

    let (s, c) = EIGEN_AXIS_DEG.to_radians().sin_cos();
    let mut rects: Vec<[Rect; 2]> = Vec::new();
    for e in design.active() {
        let g = e
            .geometry
            .expect("populated element has a geometry")
            .to_cell(geom);
        check_cross(&g)?;
        let (cu, cv) = (c * e.x_mm + s * e.y_mm, -s * e.x_mm + c * e.y_mm);
        let r = cross_rects(&g, cu, cv);
        if r.iter().any(|a| arm_hits_cutout(a, cutout)) {
            return Err(Error::Mesh(format!(
                "element at ({:.3}, {:.3}) mm overlaps the feed cutout",
                e.x_mm, e.y_mm
            )));
        }
        rects.push(r);
    }

    let n = rects.len();
    let mut parent: Vec<usize> = (0..n).collect();
    let reach = |r: &[Rect; 2]| {
        r.iter()
            .map(|a| (a.u1 - a.u0).max(a.v1 - a.v0))
            .fold(0.0, f64::max)
    };
    for a in 0..n {
        for b in a + 1..n {
            let (ra, rb) = (&rects[a], &rects[b]);
            let du = (ra[0].u0 + ra[0].u1 - rb[0].u0 - rb[0].u1).abs() / 2.0;
            let dv = (ra[0].v0 + ra[0].v1 - rb[0].v0 - rb[0].v1).abs() / 2.0;
            let lim = (reach(ra) + reach(rb)) / 2.0 + SNAP_MM;
            if du > lim || dv > lim {
                continue;
            }
            if ra.iter().any(|x| rb.iter().any(|y| x.touches(y))) {
                let (pa, pb) = (find(&mut parent, a), find(&mut parent, b));
                parent[pa.max(pb)] = pa.min(pb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<Rect>> = BTreeMap::new();
    for (i, r) in rects.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().extend_from_slice(r);
    }
    let shells: Vec<Mesh> = groups
        .into_values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|g| rectilinear_union(g, substrate_h_s, EIGEN_AXIS_DEG))
        .collect();
    for sh in &shells {
        mesh.append(sh);
    }
    Ok(mesh)
}

/// `floor(width / pitch) + 1`.
pub fn mpg_strip_count(panel_width_mm: f64, pitch_mm: f64) -> usize {
    (panel_width_mm / pitch_mm).floor() as usize + 1
}

/// Square-cornered panel of `panel.0 × panel.1` mm carrying strips along
/// `y`, centred on the panel at the grid pitch.
pub fn mpg_grid_mesh(
    mpg: &MpgModel,
    panel: (f64, f64),
    substrate_h_s: f64,
    strip_h: f64,
) -> Result<Mesh> {
    if !(mpg.pitch_mm > mpg.strip_width_mm && mpg.strip_width_mm > 0.0) {
        return Err(Error::Mesh(format!(
            "strip width {} must be positive and below the pitch {}",
            mpg.strip_width_mm, mpg.pitch_mm
        )));
    }
    if !(strip_h > 0.0) {
        return Err(Error::Mesh(format!(
            "strip height must be positive, got {strip_h}"
        )));
    }
    let (w, l) = panel;
    let mut mesh = Mesh::cuboid([-w / 2.0, -l / 2.0, 0.0], [w / 2.0, l / 2.0, substrate_h_s])?;
    let count = mpg_strip_count(w, mpg.pitch_mm);
    let half = mpg.strip_width_mm / 2.0;
    for k in 0..count {
        let x = (k as f64 - (count - 1) as f64 / 2.0) * mpg.pitch_mm;
        mesh.append(&Mesh::cuboid(
            [x - half, -l / 2.0, substrate_h_s],
            [x + half, l / 2.0, substrate_h_s + strip_h],
        )?);
    }
    Ok(mesh)
}

/// Plain-text list of the surfaces to metallize after printing, one face
/// group per line.
pub fn metallization_manifest(design: &DesignedAperture, mpg: &MpgModel, ink_mm: f64) -> String {
    let g = &design.folded_geometry;
    let h = g.lattice.substrate_h_s;
    let count = mpg_strip_count(DEFAULT_MPG_PANEL_MM, mpg.pitch_mm);
    let mut s = String::new();
    s.push_str("# part\tgroup\tfaces\tink_mm\n");
    s.push_str(&format!(
        "rms\tground_plane\tz = 0.000 bottom face, {:.3} x {:.3} mm\t{ink_mm:.3}\n",
        g.aperture_d, g.aperture_d
    ));
    s.push_str(&format!(
        "rms\telements\tall faces of {} crosses above z = {h:.3}\t{ink_mm:.3}\n",
        design.active().count()
    ));
    s.push_str(&format!(
        "mpg\tstrips\ttop and side faces of {count} strips, {:.3} mm wide at {:.3} mm pitch\t{ink_mm:.3}\n",
        mpg.strip_width_mm, mpg.pitch_mm
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabricate::{mesh_volume, watertight_check};
    use approx::assert_relative_eq;

    fn cell(l_x: f64, l_y: f64, w: f64, h_u: f64) -> CellGeometry {
        CellGeometry {
            l_x,
            l_y,
            w_1: w,
            w_2: w,
            h_u,
            ..Default::default()
        }
    }

    #[test]
    fn square_cross_is_a_box() {
        let g = cell(2.0, 2.0, 2.0, 0.4);
        let m = cross_solid(&g, (0.0, 0.0), 0.0).unwrap();
        assert!(watertight_check(&m).is_watertight());
        assert_eq!(m.triangle_count(), 12);
        assert_relative_eq!(mesh_volume(&m), 1.6, max_relative = 1e-12);
    }

    #[test]
    fn cross_volume_by_inclusion_exclusion() {
        let g = cell(4.0, 2.0, 1.0, 0.2);
        for rot in [0.0, 45.0, 17.0] {
            let m = cross_solid(&g, (10.0, -3.0), rot).unwrap();
            assert!(watertight_check(&m).is_watertight());
            assert_relative_eq!(mesh_volume(&m), 1.0, max_relative = 1e-12);
        }
        assert_relative_eq!(cross_volume(&g), 1.0, max_relative = 1e-15);
        assert!(cross_solid(&cell(0.0, 2.0, 1.0, 0.2), (0.0, 0.0), 45.0).is_err());
    }

    #[test]
    fn stepped_union_is_closed() {
        // two collinear arms of different heights overlapping
        let rects = [
            Rect::centred(0.0, 0.0, 5.0, 1.0, 0.4),
            Rect::centred(4.0, 0.0, 5.0, 1.0, 0.2),
            Rect::centred(4.0, 0.0, 1.0, 3.0, 0.2),
        ];
        let m = rectilinear_union(&rects, 0.4, 45.0);
        let r = watertight_check(&m);
        assert!(r.is_watertight(), "{}", r.summary());
        let v = 5.0 * 0.4 + (5.0 - 1.0) * 0.2 + 2.0 * 0.2;
        assert_relative_eq!(mesh_volume(&m), v, max_relative = 1e-12);
    }

    #[test]
    fn slab_with_cutout() {
        let cut = FeedCutout::default();
        let m = slab_solid(192.0, 0.4, &cut).unwrap();
        assert!(watertight_check(&m).is_watertight());
        let v = (192.0 * 192.0 - 18.5 * 14.9) * 0.4;
        assert_relative_eq!(mesh_volume(&m), v, max_relative = 1e-12);
        let plain = slab_solid(192.0, 0.4, &FeedCutout::none()).unwrap();
        assert_relative_eq!(
            mesh_volume(&plain),
            192.0 * 192.0 * 0.4,
            max_relative = 1e-12
        );
        let big = FeedCutout {
            width_mm: 300.0,
            ..cut
        };
        assert!(slab_solid(192.0, 0.4, &big).is_err());
    }

    #[test]
    fn strip_counts() {
        assert_eq!(mpg_strip_count(180.0, 1.0), 181);
        assert_eq!(mpg_strip_count(180.0, 500.0), 1);
        let mpg = MpgModel::default();
        let m = mpg_grid_mesh(&mpg, (180.0, 180.0), 0.4, 0.1).unwrap();
        assert!(watertight_check(&m).is_watertight());
        let strips = 181.0 * 0.5 * 180.0 * 0.1;
        assert_relative_eq!(
            mesh_volume(&m),
            180.0 * 180.0 * 0.4 + strips,
            max_relative = 1e-9
        );
        let coarse = MpgModel {
            pitch_mm: 500.0,
            ..MpgModel::default()
        };
        let one = mpg_grid_mesh(&coarse, (180.0, 180.0), 0.4, 0.1).unwrap();
        assert_eq!(one.triangle_count(), 24);
    }
}
