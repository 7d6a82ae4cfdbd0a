//! Binary STL: 80-byte header, `u32` triangle count, then per triangle a
//! normal and three vertices as little-endian `f32` and a zero `u16`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{watertight_check, Mesh};
use crate::{Error, Result};

pub const STL_HEADER_LEN: usize = 80;
const HEADER: &str = "foldra binary STL, units mm";

pub fn write_stl_binary<W: Write>(mesh: &Mesh, sink: W) -> std::io::Result<()> {
    write_stl_binary_labeled(mesh, HEADER, sink)
}

/// As [`write_stl_binary`] with `label` in the header, cut to 80 bytes.
pub fn write_stl_binary_labeled<W: Write>(
    mesh: &Mesh,
    label: &str,
    mut sink: W,
) -> std::io::Result<()> {
    let mut header = [0u8; STL_HEADER_LEN];
    let n = label.len().min(STL_HEADER_LEN);
    header[..n].copy_from_slice(&label.as_bytes()[..n]);
    sink.write_all(&header)?;
    let n = u32::try_from(mesh.triangles.len()).map_err(|_| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            "too many triangles for STL",
        )
    })?;
    sink.write_all(&n.to_le_bytes())?;
    let mut rec = [0u8; 50];
    for (i, t) in mesh.triangles.iter().enumerate() {
        let n = mesh.unit_normal(i);
        let mut k = 0;
        for x in n
            .iter()
            .chain(t.iter().flat_map(|&v| mesh.vertices[v as usize].iter()))
        {
            rec[k..k + 4].copy_from_slice(&(*x as f32).to_le_bytes());
            k += 4;
        }
        rec[48] = 0;
        rec[49] = 0;
        sink.write_all(&rec)?;
    }
    sink.flush()
}

/// Writes `mesh` to `path`; a mesh that fails the watertight check is
/// refused unless `force` is set.
pub fn export_stl_binary(mesh: &Mesh, path: impl AsRef<Path>, force: bool) -> Result<()> {
    export_stl_binary_labeled(mesh, path, HEADER, force)
}

pub fn export_stl_binary_labeled(
    mesh: &Mesh,
    path: impl AsRef<Path>,
    label: &str,
    force: bool,
) -> Result<()> {
    let path = path.as_ref();
    let report = watertight_check(mesh);
    if !force && !report.is_watertight() {
        return Err(Error::Mesh(format!(
            "refusing to export non-watertight mesh to {} ({})",
            path.display(),
            report.summary()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_stl_binary_labeled(mesh, label, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Parses a binary STL, merging vertices with identical coordinates.
pub fn read_stl_binary<R: Read>(mut source: R) -> Result<Mesh> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::Malformed(format!("cannot read STL stream: {e}")))?;
    if bytes.len() < STL_HEADER_LEN + 4 {
        return Err(Error::Malformed("STL shorter than its header".into()));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().expect("4 bytes")) as usize;
    let expected = STL_HEADER_LEN + 4 + 50 * count;
    if bytes.len() != expected {
        return Err(Error::Malformed(format!(
            "STL declares {count} triangles ({expected} bytes) but has {} bytes",
            bytes.len()
        )));
    }
    let mut index: HashMap<[u32; 3], u32> = HashMap::new();
    let mut mesh = Mesh::default();
    for rec in bytes[84..].chunks_exact(50) {
        let f = |k: usize| f32::from_le_bytes(rec[k..k + 4].try_into().expect("4 bytes"));
        let mut tri = [0u32; 3];
        for (c, slot) in tri.iter_mut().enumerate() {
            let p = [f(12 + 12 * c), f(16 + 12 * c), f(20 + 12 * c)];
            let next = mesh.vertices.len() as u32;
            *slot = *index.entry(p.map(f32::to_bits)).or_insert_with(|| {
                mesh.vertices.push(p.map(f64::from));
                next
            });
        }
        mesh.triangles.push(tri);
    }
    Ok(mesh)
}

pub fn import_stl_binary(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_stl_binary(std::io::BufReader::new(file))
}
