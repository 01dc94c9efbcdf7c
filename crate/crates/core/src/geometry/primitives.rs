//! Closed, outward-wound primitive meshes for tests and synthetic corpora.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{Point3, TriangleMesh};

/// Icosahedron refined `subdivisions` times, projected onto a sphere.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .into_iter()
    .map(unit)
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: usize, b: usize, vertices: &mut Vec<Point3>| -> usize {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let (p, q) = (vertices[a], vertices[b]);
                vertices.push(unit([
                    (p[0] + q[0]) * 0.5,
                    (p[1] + q[1]) * 0.5,
                    (p[2] + q[2]) * 0.5,
                ]));
                vertices.len() - 1
            })
        };
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices
        .into_iter()
        .map(|v| [v[0] * radius, v[1] * radius, v[2] * radius])
        .collect();
    TriangleMesh { vertices, faces }
}

fn unit(p: Point3) -> Point3 {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Axis-aligned box with two triangles per face.
pub fn axis_box(lo: Point3, hi: Point3) -> TriangleMesh {
    let vertices = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { lo[0] } else { hi[0] },
                if i & 2 == 0 { lo[1] } else { hi[1] },
                if i & 4 == 0 { lo[2] } else { hi[2] },
            ]
        })
        .collect();
    let faces = vec![
        [0, 2, 3],
        [0, 3, 1], // z = lo
        [4, 5, 7],
        [4, 7, 6], // z = hi
        [0, 1, 5],
        [0, 5, 4], // y = lo
        [2, 6, 7],
        [2, 7, 3], // y = hi
        [0, 4, 6],
        [0, 6, 2], // x = lo
        [1, 3, 7],
        [1, 7, 5], // x = hi
    ];
    TriangleMesh { vertices, faces }
}

/// Surface of revolution around the z axis given a profile of `(r, z)`
/// pairs running from the bottom pole (r = 0) to the top pole (r = 0).
fn revolve(profile: &[(f64, f64)], segments: usize) -> TriangleMesh {
    let rings = profile.len();
    let mut vertices = vec![[0.0, 0.0, profile[0].1]];
    for &(r, z) in &profile[1..rings - 1] {
        for s in 0..segments {
            let phi = 2.0 * PI * s as f64 / segments as f64;
            vertices.push([r * phi.cos(), r * phi.sin(), z]);
        }
    }
    vertices.push([0.0, 0.0, profile[rings - 1].1]);
    let top = vertices.len() - 1;
    let ring = |k: usize, s: usize| 1 + (k - 1) * segments + (s % segments);
    let mut faces = Vec::new();
    for s in 0..segments {
        faces.push([0, ring(1, s + 1), ring(1, s)]);
    }
    for k in 1..rings - 2 {
        for s in 0..segments {
            let (a, b) = (ring(k, s), ring(k, s + 1));
            let (c, d) = (ring(k + 1, s), ring(k + 1, s + 1));
            faces.push([a, b, d]);
            faces.push([a, d, c]);
        }
    }
    for s in 0..segments {
        faces.push([top, ring(rings - 2, s), ring(rings - 2, s + 1)]);
    }
    TriangleMesh { vertices, faces }
}

/// Capsule along z: a cylinder of `radius` and `half_length` capped by
/// hemispheres.
pub fn capsule(radius: f64, half_length: f64, segments: usize) -> TriangleMesh {
    let cap_rings = segments.max(4) / 2;
    let mut profile = Vec::new();
    for i in 0..=cap_rings {
        let theta = -PI / 2.0 + (PI / 2.0) * i as f64 / cap_rings as f64;
        profile.push((radius * theta.cos(), -half_length + radius * theta.sin()));
    }
    for i in 0..=cap_rings {
        let theta = (PI / 2.0) * i as f64 / cap_rings as f64;
        profile.push((radius * theta.cos(), half_length + radius * theta.sin()));
    }
    profile[0].0 = 0.0;
    let last = profile.len() - 1;
    profile[last].0 = 0.0;
    revolve(&profile, segments.max(3))
}

/// Torus around the z axis.
pub fn torus(major: f64, minor: f64, segments: usize, sides: usize) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(segments * sides);
    for i in 0..segments {
        let u = 2.0 * PI * i as f64 / segments as f64;
        for j in 0..sides {
            let v = 2.0 * PI * j as f64 / sides as f64;
            let r = major + minor * v.cos();
            vertices.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % segments) * sides + (j % sides);
    let mut faces = Vec::with_capacity(2 * segments * sides);
    for i in 0..segments {
        for j in 0..sides {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh { vertices, faces }
}

/// Translates a mesh in place.
pub fn translated(mut mesh: TriangleMesh, offset: Point3) -> TriangleMesh {
    for v in &mut mesh.vertices {
        for k in 0..3 {
            v[k] += offset[k];
        }
    }
    mesh
}

/// Scales each axis independently.
pub fn stretched(mut mesh: TriangleMesh, factors: Point3) -> TriangleMesh {
    for v in &mut mesh.vertices {
        for k in 0..3 {
            v[k] *= factors[k];
        }
    }
    mesh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_closed_outward(m: &TriangleMesh) {
        m.validate().unwrap();
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for f in &m.faces {
            for k in 0..3 {
                *edges.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        for (&(a, b), &c) in &edges {
            assert_eq!(c, 1, "directed edge repeated");
            assert_eq!(edges.get(&(b, a)), Some(&1), "edge without twin");
        }
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        assert_closed_outward(&icosphere(0.4, 2));
        assert_closed_outward(&axis_box([-0.1, -0.2, -0.3], [0.3, 0.2, 0.1]));
        assert_closed_outward(&capsule(0.2, 0.2, 16));
        assert_closed_outward(&torus(0.3, 0.1, 24, 12));
    }

    #[test]
    fn volumes_are_close_to_analytic() {
        let s = icosphere(1.0, 4).signed_volume();
        assert!((s - 4.0 / 3.0 * PI).abs() < 0.02);
        let b = axis_box([0.0; 3], [1.0, 2.0, 3.0]).signed_volume();
        assert!((b - 6.0).abs() < 1e-12);
    }
}
