//! Watertight triangle meshes of the printed parts and binary STL export.
//!
//! Meshes may hold several closed shells. The surface and the polarizer
//! panel are built as a substrate shell plus one shell per printed feature
//! resting on its top face; features that overlap are fused into one shell.

mod assemble;
mod stl;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use assemble::{
    assemble_rms_mesh, cross_area, cross_solid, cross_volume, metallization_manifest,
    mpg_grid_mesh, mpg_strip_count, slab_solid, DEFAULT_MPG_PANEL_MM, DEFAULT_STRIP_H_MM,
};
pub use stl::{
    export_stl_binary, export_stl_binary_labeled, import_stl_binary, read_stl_binary,
    write_stl_binary, write_stl_binary_labeled, STL_HEADER_LEN,
};

use crate::{Error, Result};

/// Triangles with counter-clockwise winding seen from outside.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
}

/// Area below which a triangle counts as degenerate, mm².
pub const DEGENERATE_AREA_MM2: f64 = 1e-9;

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

impl Mesh {
    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Adds the shells of `other`, keeping them disjoint from ours.
    pub fn append(&mut self, other: &Mesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + base, t[1] + base, t[2] + base]),
        );
    }

    pub fn translated(&self, d: [f64; 3]) -> Mesh {
        Mesh {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + d[0], v[1] + d[1], v[2] + d[2]])
                .collect(),
            triangles: self.triangles.clone(),
        }
    }

    fn corners(&self, t: &[u32; 3]) -> [[f64; 3]; 3] {
        t.map(|i| self.vertices[i as usize])
    }

    /// Unnormalized normal, twice the triangle area long.
    pub fn area_vector(&self, tri: usize) -> [f64; 3] {
        let [a, b, c] = self.corners(&self.triangles[tri]);
        cross(sub(b, a), sub(c, a))
    }

    pub fn unit_normal(&self, tri: usize) -> [f64; 3] {
        let n = self.area_vector(tri);
        let l = dot(n, n).sqrt();
        if l > 0.0 {
            n.map(|x| x / l)
        } else {
            [0.0; 3]
        }
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty mesh.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }

    /// Closed axis-aligned box.
    pub fn cuboid(min: [f64; 3], max: [f64; 3]) -> Result<Mesh> {
        if (0..3).any(|k| !(max[k] - min[k] > 0.0)) {
            return Err(Error::Mesh(format!(
                "box {min:?}..{max:?} has a zero or negative dimension"
            )));
        }
        let v = |i: usize| {
            [
                if i & 1 == 0 { min[0] } else { max[0] },
                if i & 2 == 0 { min[1] } else { max[1] },
                if i & 4 == 0 { min[2] } else { max[2] },
            ]
        };
        let quads = [
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
        ];
        let mut m = Mesh {
            vertices: (0..8).map(v).collect(),
            triangles: Vec::with_capacity(12),
        };
        for q in quads {
            m.triangles.push([q[0], q[1], q[2]]);
            m.triangles.push([q[0], q[2], q[3]]);
        }
        Ok(m)
    }
}

/// Enclosed volume from the signed tetrahedra against the first vertex.
pub fn mesh_volume(mesh: &Mesh) -> f64 {
    let Some(&o) = mesh.vertices.first() else {
        return 0.0;
    };
    let parts: Vec<f64> = mesh
        .triangles
        .iter()
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            dot(sub(a, o), cross(sub(b, o), sub(c, o)))
        })
        .collect();
    crate::sum::pairwise(&parts) / 6.0
}

/// Topological health of a mesh.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WatertightReport {
    /// Edges used by a single triangle.
    pub boundary_edges: Vec<(u32, u32)>,
    /// Edges used by more than two triangles.
    pub non_manifold_edges: Vec<(u32, u32)>,
    /// Edges traversed twice in the same direction.
    pub inconsistent_edges: Vec<(u32, u32)>,
    pub degenerate_triangles: Vec<usize>,
}

impl WatertightReport {
    pub fn is_watertight(&self) -> bool {
        self.boundary_edges.is_empty()
            && self.non_manifold_edges.is_empty()
            && self.inconsistent_edges.is_empty()
            && self.degenerate_triangles.is_empty()
    }

    pub fn summary(&self) -> String {
        format!(
            "{} boundary, {} non-manifold, {} inconsistent edges, {} degenerate triangles",
            self.boundary_edges.len(),
            self.non_manifold_edges.len(),
            self.inconsistent_edges.len(),
            self.degenerate_triangles.len()
        )
    }
}

pub fn watertight_check(mesh: &Mesh) -> WatertightReport {
    let mut edges: HashMap<(u32, u32), (u32, u32)> = HashMap::new();
    for t in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            let e = edges.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut r = WatertightReport::default();
    for (&e, &(fwd, back)) in &edges {
        match fwd + back {
            1 => r.boundary_edges.push(e),
            2 if fwd != 1 => r.inconsistent_edges.push(e),
            2 => {}
            _ => r.non_manifold_edges.push(e),
        }
    }
    r.boundary_edges.sort_unstable();
    r.non_manifold_edges.sort_unstable();
    r.inconsistent_edges.sort_unstable();
    r.degenerate_triangles = (0..mesh.triangles.len())
        .filter(|&i| {
            let n = mesh.area_vector(i);
            dot(n, n).sqrt() / 2.0 <= DEGENERATE_AREA_MM2
        })
        .collect();
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_cube() {
        let c = Mesh::cuboid([0.0; 3], [1.0; 3]).unwrap();
        assert_eq!(c.triangle_count(), 12);
        assert_relative_eq!(mesh_volume(&c), 1.0, max_relative = 1e-15);
        assert!(watertight_check(&c).is_watertight());
        // outward normals point away from the centre
        for i in 0..12 {
            let n = c.unit_normal(i);
            let t = c.corners(&c.triangles[i]);
            let m = [0, 1, 2].map(|k| (t[0][k] + t[1][k] + t[2][k]) / 3.0 - 0.5);
            assert!(dot(n, m) > 0.0);
        }
    }

    #[test]
    fn open_cube_has_four_boundary_edges() {
        let mut c = Mesh::cuboid([0.0; 3], [1.0; 3]).unwrap();
        c.triangles.drain(0..2);
        let r = watertight_check(&c);
        assert_eq!(r.boundary_edges.len(), 4);
        assert!(!r.is_watertight());
    }

    #[test]
    fn flipped_triangle_is_inconsistent() {
        let mut c = Mesh::cuboid([0.0; 3], [1.0; 3]).unwrap();
        c.triangles[0].swap(1, 2);
        assert!(!watertight_check(&c).inconsistent_edges.is_empty());
    }

    #[test]
    fn zero_box_rejected() {
        assert!(Mesh::cuboid([0.0; 3], [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn volume_is_translation_invariant() {
        let c = Mesh::cuboid([0.0; 3], [2.0, 3.0, 0.5]).unwrap();
        let t = c.translated([1e3, -250.0, 42.0]);
        assert_relative_eq!(mesh_volume(&t), 3.0, max_relative = 1e-12);
    }
}
