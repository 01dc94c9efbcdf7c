//! Mesh voxelization into signed distance grids, and the tanh limiter.

use rayon::prelude::*;

use super::{add, dot, scale, sub, Bvh, Point3, TriangleMesh};
use crate::error::{Error, Result};
use crate::volume::Volume;

/// Voxels closer to the surface than this fraction of the spacing are treated
/// as lying on it: they get value 0 and their parity votes are ignored.
pub const ON_SURFACE_FRACTION: f64 = 1e-9;

/// Cells of padding added on every side of the `[-0.5, 0.5]³` box.
pub const DEFAULT_PADDING_CELLS: usize = 2;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SdfDiagnostics {
    /// Off-surface voxels whose three ray-parity votes were not unanimous.
    pub parity_disagreements: usize,
}

/// Regular `N³` grid of signed distances (positive inside) or of their
/// limited values.
#[derive(Debug, Clone, PartialEq)]
pub struct SdfGrid {
    pub resolution: usize,
    pub origin: Point3,
    pub spacing: f64,
    pub values: Volume,
    pub limited: bool,
    pub diagnostics: SdfDiagnostics,
}

impl SdfGrid {
    /// Grid placement covering `[-0.5, 0.5]³` plus `padding` cells per side:
    /// returns `(origin, spacing)` with `origin + (N−1)·spacing = 0.5 + padding·spacing`.
    pub fn placement(resolution: usize, padding: usize) -> Result<(Point3, f64)> {
        if resolution < 2 || resolution <= 1 + 2 * padding {
            return Err(Error::InvalidArgument(format!(
                "resolution {resolution} too small for {padding} padding cells"
            )));
        }
        let spacing = 1.0 / (resolution - 1 - 2 * padding) as f64;
        let o = -0.5 - padding as f64 * spacing;
        Ok(([o; 3], spacing))
    }

    /// Wraps an existing volume with the standard placement.
    pub fn from_volume(values: Volume, padding: usize, limited: bool) -> Result<Self> {
        let [nx, ny, nz] = values.dims();
        if nx != ny || ny != nz {
            return Err(Error::ShapeMismatch(format!(
                "SDF grids are cubic, got {:?}",
                values.dims()
            )));
        }
        let (origin, spacing) = Self::placement(nx, padding)?;
        Ok(SdfGrid {
            resolution: nx,
            origin,
            spacing,
            values,
            limited,
            diagnostics: SdfDiagnostics::default(),
        })
    }

    #[inline]
    pub fn point(&self, x: usize, y: usize, z: usize) -> Point3 {
        [
            self.origin[0] + x as f64 * self.spacing,
            self.origin[1] + y as f64 * self.spacing,
            self.origin[2] + z as f64 * self.spacing,
        ]
    }

    #[inline]
    pub fn coordinate(&self, axis: usize, index: usize) -> f64 {
        self.origin[axis] + index as f64 * self.spacing
    }
}

/// Squared Euclidean distance from `p` to a solid triangle.
pub fn point_triangle_distance_sq(p: Point3, tri: &[Point3; 3]) -> f64 {
    let closest = closest_point_on_triangle(p, tri);
    super::distance_sq(p, closest)
}

// Region classification over the triangle's Voronoi regions.
fn closest_point_on_triangle(p: Point3, [a, b, c]: &[Point3; 3]) -> Point3 {
    let (a, b, c) = (*a, *b, *c);
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return add(a, scale(ab, v));
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return add(a, scale(ac, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return add(b, scale(sub(c, b), w));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    add(a, add(scale(ab, v), scale(ac, w)))
}

/// Voxelizes a closed mesh into raw signed distances, positive inside.
///
/// Magnitudes are exact point-to-triangle distances found through a BVH.
/// Inside/outside comes from a majority vote over ray parity along +x, +y
/// and +z; each ray direction is evaluated per grid line with a top-left
/// fill rule so that rays through shared edges and vertices count once.
pub fn mesh_to_sdf(mesh: &TriangleMesh, resolution: usize, padding: usize) -> Result<SdfGrid> {
    if mesh.faces.is_empty() {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    if mesh.vertices.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("mesh vertex coordinates".into()));
    }
    mesh.validate()?;
    let (origin, spacing) = SdfGrid::placement(resolution, padding)?;
    let n = resolution;
    let template = SdfGrid {
        resolution: n,
        origin,
        spacing,
        values: Volume::zeros([n; 3]),
        limited: false,
        diagnostics: SdfDiagnostics::default(),
    };

    let mut votes = vec![0u8; n * n * n];
    for axis in 0..3 {
        cast_axis_rays(mesh, &template, axis, &mut votes);
    }

    let bvh = Bvh::build(mesh);
    let on_surface = ON_SURFACE_FRACTION * spacing;
    let mut values = vec![0.0; n * n * n];
    values
        .par_chunks_mut(n * n)
        .enumerate()
        .for_each(|(z, slab)| {
            for y in 0..n {
                for x in 0..n {
                    let p = template.point(x, y, z);
                    let (d2, _) = bvh.nearest(p).expect("mesh has faces");
                    let d = d2.sqrt();
                    let inside = votes[x + n * (y + n * z)] >= 2;
                    slab[x + n * y] = if d <= on_surface {
                        0.0
                    } else if inside {
                        d
                    } else {
                        -d
                    };
                }
            }
        });

    // on-surface voxels carry no sign, so their votes do not count
    let disagreements = votes
        .iter()
        .zip(&values)
        .filter(|(&v, &d)| (v == 1 || v == 2) && d != 0.0)
        .count();
    if disagreements > 0 {
        log::debug!("ray parity votes disagreed on {disagreements} voxels");
    }
    Ok(SdfGrid {
        values: Volume::cube(n, values)?,
        diagnostics: SdfDiagnostics {
            parity_disagreements: disagreements,
        },
        ..template
    })
}

/// Edge function for the directed edge `p → r` evaluated at `q`, computed in
/// a canonical endpoint order so that the two triangles sharing an edge see
/// exactly negated values.
#[inline]
fn edge_fn(p: [f64; 2], r: [f64; 2], q: [f64; 2]) -> f64 {
    let canonical = (p[0], p[1]) < (r[0], r[1]);
    let (s, t) = if canonical { (p, r) } else { (r, p) };
    let v = (t[0] - s[0]) * (q[1] - s[1]) - (t[1] - s[1]) * (q[0] - s[0]);
    if canonical {
        v
    } else {
        -v
    }
}

/// Top-left rule for a counter-clockwise edge `p → r`.
#[inline]
fn is_top_left(p: [f64; 2], r: [f64; 2]) -> bool {
    let dy = r[1] - p[1];
    let dx = r[0] - p[0];
    dy < 0.0 || (dy == 0.0 && dx < 0.0)
}

fn cast_axis_rays(mesh: &TriangleMesh, grid: &SdfGrid, axis: usize, votes: &mut [u8]) {
    let n = grid.resolution;
    let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); n * n];
    let h = grid.spacing;
    let index_range = |lo: f64, hi: f64, o: f64| -> Option<(usize, usize)> {
        let a = ((lo - o) / h).ceil().max(0.0);
        let b = ((hi - o) / h).floor().min((n - 1) as f64);
        (a <= b).then_some((a as usize, b as usize))
    };

    for f in 0..mesh.faces.len() {
        let t = mesh.triangle(f);
        let mut q = [[t[0][ua], t[0][va]], [t[1][ua], t[1][va]], [t[2][ua], t[2][va]]];
        let mut depth = [t[0][axis], t[1][axis], t[2][axis]];
        let area = edge_fn(q[0], q[1], q[2]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            q.swap(1, 2);
            depth.swap(1, 2);
        }
        let lo_u = q[0][0].min(q[1][0]).min(q[2][0]);
        let hi_u = q[0][0].max(q[1][0]).max(q[2][0]);
        let lo_v = q[0][1].min(q[1][1]).min(q[2][1]);
        let hi_v = q[0][1].max(q[1][1]).max(q[2][1]);
        let (Some((iu0, iu1)), Some((iv0, iv1))) = (
            index_range(lo_u, hi_u, grid.origin[ua]),
            index_range(lo_v, hi_v, grid.origin[va]),
        ) else {
            continue;
        };
        for iv in iv0..=iv1 {
            let pv = grid.coordinate(va, iv);
            for iu in iu0..=iu1 {
                let p = [grid.coordinate(ua, iu), pv];
                let w0 = edge_fn(q[1], q[2], p);
                let w1 = edge_fn(q[2], q[0], p);
                let w2 = edge_fn(q[0], q[1], p);
                let covers = |w: f64, a: [f64; 2], b: [f64; 2]| w > 0.0 || (w == 0.0 && is_top_left(a, b));
                if covers(w0, q[1], q[2]) && covers(w1, q[2], q[0]) && covers(w2, q[0], q[1]) {
                    let sum = w0 + w1 + w2;
                    let hit = (w0 * depth[0] + w1 * depth[1] + w2 * depth[2]) / sum;
                    hits[iu + n * iv].push(hit);
                }
            }
        }
    }

    // the ray from each voxel goes toward +axis; parity of hits beyond it
    for iv in 0..n {
        for iu in 0..n {
            let line = &mut hits[iu + n * iv];
            if line.is_empty() {
                continue;
            }
            line.sort_by(f64::total_cmp);
            let mut beyond = line.len();
            let mut next = 0usize;
            for ia in 0..n {
                let c = grid.coordinate(axis, ia);
                while next < line.len() && line[next] <= c {
                    next += 1;
                    beyond -= 1;
                }
                if beyond % 2 == 1 {
                    let mut idx = [0usize; 3];
                    idx[axis] = ia;
                    idx[ua] = iu;
                    idx[va] = iv;
                    votes[idx[0] + n * (idx[1] + n * idx[2])] += 1;
                }
            }
        }
    }
}

/// `g(f) = 0.5·tanh(f) − 0.5`, kept inside the open interval (−1, 0).
///
/// In f64 the tanh saturates for |f| ≳ 19; such values are pinned to the
/// nearest representable interior point.
#[inline]
pub fn limit_value(f: f64) -> f64 {
    const UPPER: f64 = -f64::MIN_POSITIVE;
    const LOWER: f64 = -1.0 + f64::EPSILON / 2.0;
    (0.5 * f.tanh() - 0.5).clamp(LOWER, UPPER)
}

/// Applies [`limit_value`] elementwise. The surface `f = 0` lands on −0.5.
pub fn limit_sdf(grid: &SdfGrid) -> Result<SdfGrid> {
    if grid.limited {
        return Err(Error::InvalidArgument("grid is already limited".into()));
    }
    let mut out = grid.clone();
    out.values
        .as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = limit_value(*v));
    out.limited = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn placement_spans_padded_box() {
        let (o, h) = SdfGrid::placement(64, 2).unwrap();
        assert!((o[0] + 63.0 * h - (0.5 + 2.0 * h)).abs() < 1e-15);
        assert!((o[0] + 2.0 * h + 0.5).abs() < 1e-15);
    }

    #[test]
    fn limiter_values() {
        assert_eq!(limit_value(0.0), -0.5);
        assert!((limit_value(0.1) - (-0.450166)).abs() < 1e-6);
        let far_in = limit_value(1e6);
        let far_out = limit_value(-1e6);
        assert!(far_in < 0.0 && far_in > -1e-300);
        assert!(far_out > -1.0 && far_out < -0.999_999);
    }

    #[test]
    fn limit_rejects_limited_grid() {
        let g = SdfGrid::from_volume(Volume::zeros([8; 3]), 2, true).unwrap();
        assert!(limit_sdf(&g).is_err());
    }

    #[test]
    fn closest_point_regions() {
        let tri = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        assert_eq!(point_triangle_distance_sq([0.2, 0.2, 1.0], &tri), 1.0);
        assert_eq!(point_triangle_distance_sq([-1.0, -1.0, 0.0], &tri), 2.0);
        assert_eq!(point_triangle_distance_sq([0.5, -2.0, 0.0], &tri), 4.0);
        assert!((point_triangle_distance_sq([1.0, 1.0, 0.0], &tri) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn box_sdf_signs_and_zero_on_vertices() {
        // box corners land exactly on grid nodes: N=21, pad=2 → spacing 1/16
        let mesh = primitives::axis_box([-0.25; 3], [0.25; 3]);
        let g = mesh_to_sdf(&mesh, 21, 2).unwrap();
        // (0.25,0.25,0.25) = origin + 12·h
        assert_eq!(g.values.get(14, 14, 14), 0.0);
        let c = g.values.get(10, 10, 10);
        assert!((c - 0.25).abs() < 1e-12, "center value {c}");
        assert!(g.values.get(0, 0, 0) < 0.0);
        assert_eq!(g.diagnostics.parity_disagreements, 0);
    }

    #[test]
    fn far_points_are_negative_with_large_magnitude() {
        let mesh = primitives::icosphere(0.2, 2);
        let g = mesh_to_sdf(&mesh, 24, 2).unwrap();
        let corner = g.point(0, 0, 0);
        let bound = (corner[0] * corner[0] * 3.0).sqrt() - 0.2;
        assert!(g.values.get(0, 0, 0) <= -bound + 1e-12);
    }
}
