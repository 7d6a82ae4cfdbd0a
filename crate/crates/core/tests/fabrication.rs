use foldra::fabricate::{
    assemble_rms_mesh, cross_solid, cross_volume, export_stl_binary, import_stl_binary,
    mesh_volume, mpg_grid_mesh, mpg_strip_count, watertight_check, Mesh,
};
use foldra::layout::{
    generate_lattice, synthesize, DesignedAperture, FoldedGeometry, SynthesisOptions,
};
use foldra::polarizer::MpgModel;
use foldra::unitcell::{CellGeometry, SurrogateSource};
use foldra::Freq;
use proptest::prelude::*;

fn default_design() -> DesignedAperture {
    let g = FoldedGeometry::default();
    let lay = generate_lattice(&g).unwrap();
    synthesize(
        &lay,
        &g,
        &SurrogateSource::default(),
        Freq::new(28.0).unwrap(),
        &SynthesisOptions::default(),
    )
    .unwrap()
}

fn slab_volume(g: &FoldedGeometry) -> f64 {
    let c = &g.feed_cutout;
    (g.aperture_d * g.aperture_d - c.width_mm * c.length_mm) * g.lattice.substrate_h_s
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn empty_design_is_the_slab_with_its_hole() {
    let mut d = default_design();
    d.elements.clear();
    let g = d.folded_geometry;
    let m = assemble_rms_mesh(&d, g.lattice.substrate_h_s, g.aperture_d).unwrap();
    assert!(watertight_check(&m).is_watertight());
    assert!(rel(mesh_volume(&m), slab_volume(&g)) < 1e-9);
}

#[test]
fn single_element_adds_its_own_volume() {
    let mut d = default_design();
    let keep = *d
        .active()
        .find(|e| e.x_mm.abs() > 40.0 && e.y_mm.abs() > 40.0)
        .unwrap();
    d.elements = vec![keep];
    let g = d.folded_geometry;
    let cell = keep.geometry.unwrap().to_cell(&g);
    let m = assemble_rms_mesh(&d, g.lattice.substrate_h_s, g.aperture_d).unwrap();
    assert!(watertight_check(&m).is_watertight());
    let expect = slab_volume(&g) + cross_volume(&cell);
    assert!(
        rel(mesh_volume(&m), expect) < 1e-9,
        "{} vs {expect}",
        mesh_volume(&m)
    );
}

#[test]
fn overlapping_neighbours_are_fused_not_double_counted() {
    let d = default_design();
    let g = d.folded_geometry;
    let m = assemble_rms_mesh(&d, g.lattice.substrate_h_s, g.aperture_d).unwrap();
    assert!(watertight_check(&m).is_watertight());
    let separate: f64 = d
        .active()
        .map(|e| cross_volume(&e.geometry.unwrap().to_cell(&g)))
        .sum();
    let v = mesh_volume(&m) - slab_volume(&g);
    assert!(v < separate && v > 0.9 * separate, "{v} vs {separate}");
}

#[test]
fn stl_round_trip_keeps_count_and_volume() {
    let mut d = default_design();
    d.elements.truncate(40);
    let g = d.folded_geometry;
    let m = assemble_rms_mesh(&d, g.lattice.substrate_h_s, g.aperture_d).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("part.stl");
    export_stl_binary(&m, &p, false).unwrap();
    let back = import_stl_binary(&p).unwrap();
    assert_eq!(back.triangle_count(), m.triangle_count());
    assert!(watertight_check(&back).is_watertight());
    assert!(rel(mesh_volume(&back), mesh_volume(&m)) < 1e-5);
    assert_eq!(
        std::fs::metadata(&p).unwrap().len(),
        84 + 50 * m.triangle_count() as u64
    );
}

#[test]
fn mpg_volume_matches_closed_form() {
    for (width, pitch) in [(180.0, 1.0), (180.0, 1.3), (50.0, 2.5)] {
        let mpg = MpgModel::flat(0.4 * pitch, pitch, -0.04, -0.18, (20.0, 40.0));
        let (hs, sh) = (0.4, 0.1);
        let m = mpg_grid_mesh(&mpg, (width, 120.0), hs, sh).unwrap();
        let n = mpg_strip_count(width, pitch) as f64;
        let expect = width * 120.0 * hs + n * mpg.strip_width_mm * 120.0 * sh;
        assert!(watertight_check(&m).is_watertight());
        assert!(rel(mesh_volume(&m), expect) < 1e-9);
    }
    assert_eq!(mpg_strip_count(10.0, 12.0), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn crosses_are_closed_with_exact_volume(
        lx in 0.1f64..5.9, ly in 0.1f64..5.9, w1 in 0.1f64..3.0, w2 in 0.1f64..3.0,
        tall in any::<bool>(), rot in -90.0f64..90.0, cx in -90.0f64..90.0, cy in -90.0f64..90.0,
    ) {
        let g = CellGeometry::new(lx, ly, if tall { 0.4 } else { 0.2 }, w1, w2).unwrap();
        let m = cross_solid(&g, (cx, cy), rot).unwrap();
        let r = watertight_check(&m);
        prop_assert!(r.is_watertight(), "{}", r.summary());
        prop_assert!(rel(mesh_volume(&m), cross_volume(&g)) < 1e-9);
    }

    #[test]
    fn volume_is_translation_invariant(dx in -500.0f64..500.0, dy in -500.0f64..500.0, dz in -50.0f64..50.0) {
        let g = CellGeometry::new(4.0, 2.0, 0.2, 1.0, 1.5).unwrap();
        let m: Mesh = cross_solid(&g, (0.0, 0.0), 45.0).unwrap();
        let t = m.translated([dx, dy, dz]);
        prop_assert!((mesh_volume(&t) - mesh_volume(&m)).abs() < 1e-9 * mesh_volume(&m).max(1.0));
    }
}
