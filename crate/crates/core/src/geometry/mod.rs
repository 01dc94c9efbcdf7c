//! Meshes, signed distance fields and the conversions between them.

mod bvh;
mod marching_cubes;
mod mc_tables;
mod mesh;
mod obj;
pub mod primitives;
mod sampling;
mod sdf;

pub use bvh::Bvh;
pub use marching_cubes::marching_cubes;
pub use mesh::{normalize_mesh, TriangleMesh};
pub use obj::{load_mesh, parse_obj, write_obj, write_obj_string};
pub use sampling::sample_surface_points;
pub use sdf::{
    limit_sdf, limit_value, mesh_to_sdf, point_triangle_distance_sq, SdfDiagnostics, SdfGrid,
    DEFAULT_PADDING_CELLS, ON_SURFACE_FRACTION,
};

pub type Point3 = [f64; 3];

#[inline]
pub(crate) fn sub(a: Point3, b: Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn add(a: Point3, b: Point3) -> Point3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub(crate) fn scale(a: Point3, s: f64) -> Point3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub(crate) fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross(a: Point3, b: Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn distance_sq(a: Point3, b: Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
