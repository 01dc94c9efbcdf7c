use super::{cross, sub, Point3};
use crate::error::{Error, Result};

/// Indexed triangle mesh.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking index range and rejecting faces that repeat
    /// a vertex index.
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mesh = TriangleMesh { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (fi, f) in self.faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {bad} but only {n} vertices exist"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} repeats a vertex index: {f:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        let n = cross(sub(b, a), sub(c, a));
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.triangle_area(f)).sum()
    }

    /// Axis-aligned bounds `(min, max)`, or `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (
                [lo[0].min(v[0]), lo[1].min(v[1]), lo[2].min(v[2])],
                [hi[0].max(v[0]), hi[1].max(v[1]), hi[2].max(v[2])],
            )
        }))
    }

    /// Signed volume by the divergence theorem; positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
                let n = cross(b, c);
                (a[0] * n[0] + a[1] * n[1] + a[2] * n[2]) / 6.0
            })
            .sum()
    }
}

/// Centers the bounding box on the origin and scales uniformly so that the
/// longest bounding-box edge becomes 1.
pub fn normalize_mesh(mesh: &TriangleMesh) -> Result<TriangleMesh> {
    let (lo, hi) = mesh
        .bounds()
        .ok_or_else(|| Error::InvalidMesh("mesh has no vertices".into()))?;
    if mesh.vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("mesh vertex coordinates".into()));
    }
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if extent <= 0.0 {
        return Err(Error::InvalidMesh(
            "all vertices coincide; cannot normalize a zero-extent mesh".into(),
        ));
    }
    let center = [
        0.5 * (lo[0] + hi[0]),
        0.5 * (lo[1] + hi[1]),
        0.5 * (lo[2] + hi[2]),
    ];
    let s = 1.0 / extent;
    let vertices = mesh
        .vertices
        .iter()
        .map(|v| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                // rounding can leave the extreme coordinate a few ulps past 0.5
                out[k] = ((v[k] - center[k]) * s).clamp(-0.5, 0.5);
            }
            out
        })
        .collect();
    Ok(TriangleMesh {
        vertices,
        faces: mesh.faces.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn unit_cube_maps_to_centered_cube() {
        let cube = primitives::axis_box([0.0; 3], [1.0; 3]);
        let n = normalize_mesh(&cube).unwrap();
        let (lo, hi) = n.bounds().unwrap();
        assert_eq!(lo, [-0.5; 3]);
        assert_eq!(hi, [0.5; 3]);
    }

    #[test]
    fn box_scaled_by_longest_edge() {
        let b = primitives::axis_box([0.0; 3], [2.0, 1.0, 1.0]);
        let n = normalize_mesh(&b).unwrap();
        let (lo, hi) = n.bounds().unwrap();
        assert_eq!(lo, [-0.5, -0.25, -0.25]);
        assert_eq!(hi, [0.5, 0.25, 0.25]);
    }

    #[test]
    fn normalization_is_idempotent() {
        let b = primitives::axis_box([0.0; 3], [2.0, 1.0, 1.0]);
        let once = normalize_mesh(&b).unwrap();
        let twice = normalize_mesh(&once).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn coincident_vertices_rejected() {
        let m = TriangleMesh {
            vertices: vec![[1.0; 3]; 3],
            faces: vec![[0, 1, 2]],
        };
        assert!(normalize_mesh(&m).is_err());
    }

    #[test]
    fn degenerate_face_rejected() {
        assert!(TriangleMesh::new(vec![[0.0; 3]; 3], vec![[0, 0, 1]]).is_err());
        assert!(TriangleMesh::new(vec![[0.0; 3]; 3], vec![[0, 1, 3]]).is_err());
    }
}
