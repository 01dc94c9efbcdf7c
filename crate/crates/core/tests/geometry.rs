use forge_core::geometry::primitives::{axis_box, capsule, icosphere, stretched, translated};
use forge_core::geometry::{
    limit_sdf, limit_value, Bvh, marching_cubes, mesh_to_sdf, normalize_mesh, parse_obj, sample_surface_points,
    write_obj_string, Point3, TriangleMesh,
};
use proptest::prelude::*;

mod common;

fn norm(p: Point3) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// Largest gap between the sphere and the polyhedron: `r` minus the smallest
/// distance from the center to a face plane.
fn chordal_deviation(mesh: &TriangleMesh, r: f64) -> f64 {
    (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.triangle(f);
            let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
            let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
            let n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
            let plane = (n[0] * a[0] + n[1] * a[1] + n[2] * a[2]).abs() / norm(n);
            r - plane
        })
        .fold(0.0, f64::max)
}

/// Chamfer distance in length units between surfaces: samples of each mesh
/// measured against the exact surface of the other.
fn surface_chamfer(a: &TriangleMesh, b: &TriangleMesh) -> f64 {
    let dir = |x: &TriangleMesh, y: &TriangleMesh, seed| {
        let bvh = Bvh::build(y);
        let pts = sample_surface_points(x, 4000, seed).unwrap();
        (pts.iter().map(|&p| bvh.nearest(p).unwrap().0).sum::<f64>() / pts.len() as f64).sqrt()
    };
    dir(a, b, 1) + dir(b, a, 2)
}

#[test]
fn icosphere_sdf_matches_analytic_sphere() {
    let r = 0.4;
    let mesh = icosphere(r, 4);
    let n = 64;
    let grid = mesh_to_sdf(&mesh, n, 2).unwrap();
    let h = grid.spacing;
    let tolerance = 3f64.sqrt() * h + chordal_deviation(&mesh, r);
    let mut near = 0;
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let exact = r - norm(grid.point(x, y, z));
                let f = grid.values.get(x, y, z);
                if exact.abs() <= 2.0 * h {
                    near += 1;
                    assert!((f - exact).abs() <= tolerance, "({x},{y},{z}): {f} vs {exact}");
                }
                if exact.abs() > 2.0 * h {
                    assert_eq!(f > 0.0, exact > 0.0, "sign at ({x},{y},{z})");
                }
            }
        }
    }
    assert!(near > 1000);
    assert_eq!(grid.diagnostics.parity_disagreements, 0);

    let surface = marching_cubes(&grid, 0.0).unwrap();
    assert!(!surface.is_empty());
    for v in &surface.vertices {
        assert!((norm(*v) - r).abs() <= 2.0 * h);
    }
    assert!(surface.signed_volume() > 0.0);
}

#[test]
fn convex_round_trips_stay_within_two_cells() {
    let shapes = [
        icosphere(0.45, 3),
        axis_box([-0.5, -0.3, -0.2], [0.5, 0.3, 0.2]),
        normalize_mesh(&capsule(0.2, 0.3, 24)).unwrap(),
    ];
    for (i, mesh) in shapes.iter().enumerate() {
        let grid = mesh_to_sdf(mesh, 64, 2).unwrap();
        let back = marching_cubes(&grid, 0.0).unwrap();
        let cd = surface_chamfer(mesh, &back);
        assert!(cd <= 2.0 * grid.spacing, "shape {i}: {cd} vs {}", grid.spacing);
    }
}

#[test]
fn limited_grid_isolevel_matches_raw_zero() {
    let mesh = axis_box([-0.3; 3], [0.3; 3]);
    let grid = mesh_to_sdf(&mesh, 24, 2).unwrap();
    let limited = limit_sdf(&grid).unwrap();
    assert!(limit_sdf(&limited).is_err());
    let a = marching_cubes(&grid, 0.0).unwrap();
    let b = marching_cubes(&limited, -0.5).unwrap();
    assert_eq!(a.faces, b.faces);
    for (p, q) in a.vertices.iter().zip(&b.vertices) {
        assert!(forge_core::geometry::distance_sq(*p, *q).sqrt() < 1e-3 * grid.spacing);
    }
}

#[test]
fn off_center_box_is_normalized() {
    let mesh = translated(stretched(axis_box([0.0; 3], [1.0; 3]), [4.0, 2.0, 1.0]), [10.0, -3.0, 7.0]);
    let n = normalize_mesh(&mesh).unwrap();
    let (lo, hi) = n.bounds().unwrap();
    assert_eq!((lo[0], hi[0]), (-0.5, 0.5));
    assert!((hi[1] - lo[1] - 0.5).abs() < 1e-12);
    assert!((lo[1] + hi[1]).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn limiter_range_and_order(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        let (ga, gb) = (limit_value(a), limit_value(b));
        prop_assert!(ga > -1.0 && ga < 0.0);
        if a < b {
            prop_assert!(ga <= gb);
        }
    }

    #[test]
    fn obj_text_round_trip(coords in prop::collection::vec(-10.0f64..10.0, 12..60)) {
        let nv = coords.len() / 3;
        let vertices: Vec<Point3> = (0..nv).map(|i| [coords[3 * i], coords[3 * i + 1], coords[3 * i + 2]]).collect();
        let faces: Vec<[usize; 3]> = (0..nv - 2).map(|i| [i, i + 1, i + 2]).collect();
        let mesh = TriangleMesh::new(vertices, faces).unwrap();
        let back = parse_obj(&write_obj_string(&mesh)).unwrap();
        prop_assert_eq!(back, mesh);
    }

    #[test]
    fn normalized_meshes_fit_unit_cube(
        sx in 0.01f64..50.0, sy in 0.01f64..50.0, sz in 0.01f64..50.0,
        tx in -100.0f64..100.0, ty in -100.0f64..100.0,
    ) {
        let mesh = translated(stretched(icosphere(1.0, 1), [sx, sy, sz]), [tx, ty, 0.0]);
        let n = normalize_mesh(&mesh).unwrap();
        let (lo, hi) = n.bounds().unwrap();
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        prop_assert!((extent - 1.0).abs() < 1e-9);
        prop_assert!(lo.iter().chain(&hi).all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn surface_samples_lie_on_mesh(seed in any::<u64>()) {
        let mesh = axis_box([-0.2, -0.1, -0.3], [0.2, 0.1, 0.3]);
        for p in sample_surface_points(&mesh, 64, seed).unwrap() {
            let on_face = (p[0].abs() - 0.2).abs() < 1e-12
                || (p[1].abs() - 0.1).abs() < 1e-12
                || (p[2].abs() - 0.3).abs() < 1e-12;
            prop_assert!(on_face);
        }
    }
}
