use std::collections::HashMap;

use super::mc_tables::{CORNERS, EDGES, TRI_TABLE};
use super::{SdfGrid, TriangleMesh};
use crate::error::{Error, Result};

/// Extracts the `isolevel` surface of a grid as an indexed mesh in world
/// coordinates. The region above the isolevel is treated as the interior, so
/// triangles wind outward for positive-inside fields. Vertices on shared
/// cell edges are welded.
pub fn marching_cubes(grid: &SdfGrid, isolevel: f64) -> Result<TriangleMesh> {
    if isolevel.is_nan() {
        return Err(Error::InvalidArgument("isolevel is NaN".into()));
    }
    let [nx, ny, nz] = grid.values.dims();
    if nx < 2 || ny < 2 || nz < 2 {
        return Err(Error::InvalidArgument(format!(
            "marching cubes needs at least 2 samples per axis, got {:?}",
            grid.values.dims()
        )));
    }
    let vol = &grid.values;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut welded: HashMap<(usize, usize), usize> = HashMap::new();

    for z in 0..nz - 1 {
        for y in 0..ny - 1 {
            for x in 0..nx - 1 {
                let mut values = [0.0; 8];
                let mut case = 0usize;
                for (i, c) in CORNERS.iter().enumerate() {
                    values[i] = vol.get(x + c[0], y + c[1], z + c[2]);
                    if values[i] < isolevel {
                        case |= 1 << i;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut edge_vertex = [usize::MAX; 12];
                for tri in row.chunks_exact(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let mut idx = [0usize; 3];
                    for (k, &e) in tri.iter().enumerate() {
                        let e = e as usize;
                        if edge_vertex[e] == usize::MAX {
                            let [ca, cb] = EDGES[e];
                            let ga = [x + CORNERS[ca][0], y + CORNERS[ca][1], z + CORNERS[ca][2]];
                            let gb = [x + CORNERS[cb][0], y + CORNERS[cb][1], z + CORNERS[cb][2]];
                            let (ga, gb, va, vb) = if vol.index(ga[0], ga[1], ga[2])
                                < vol.index(gb[0], gb[1], gb[2])
                            {
                                (ga, gb, values[ca], values[cb])
                            } else {
                                (gb, ga, values[cb], values[ca])
                            };
                            let key = (vol.index(ga[0], ga[1], ga[2]), vol.index(gb[0], gb[1], gb[2]));
                            edge_vertex[e] = *welded.entry(key).or_insert_with(|| {
                                let denom = vb - va;
                                let t = if denom.abs() <= f64::EPSILON * va.abs().max(vb.abs()) {
                                    0.5
                                } else {
                                    ((isolevel - va) / denom).clamp(0.0, 1.0)
                                };
                                let pa = grid.point(ga[0], ga[1], ga[2]);
                                let pb = grid.point(gb[0], gb[1], gb[2]);
                                vertices.push([
                                    pa[0] + t * (pb[0] - pa[0]),
                                    pa[1] + t * (pb[1] - pa[1]),
                                    pa[2] + t * (pb[2] - pa[2]),
                                ]);
                                vertices.len() - 1
                            });
                        }
                        idx[k] = edge_vertex[e];
                    }
                    faces.push(idx);
                }
            }
        }
    }
    Ok(TriangleMesh { vertices, faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Volume;

    fn grid_from(values: Volume) -> SdfGrid {
        SdfGrid::from_volume(values, 0, false).unwrap()
    }

    #[test]
    fn table_rows_use_exactly_the_crossing_edges() {
        for case in 0..256usize {
            let mut crossing = [false; 12];
            for (e, [a, b]) in EDGES.iter().enumerate() {
                crossing[e] = ((case >> a) & 1) != ((case >> b) & 1);
            }
            let mut used = [false; 12];
            for &e in TRI_TABLE[case].iter().take_while(|&&e| e >= 0) {
                used[e as usize] = true;
            }
            assert_eq!(crossing, used, "case {case}");
        }
    }

    #[test]
    fn uniform_grid_is_empty() {
        let m = marching_cubes(&grid_from(Volume::filled([4; 3], 0.3)), 0.0).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn single_corner_above_gives_one_triangle() {
        let mut v = Volume::filled([2; 3], -1.0);
        v.set(1, 1, 1, 1.0);
        let m = marching_cubes(&grid_from(v), 0.0).unwrap();
        assert_eq!(m.faces.len(), 1);
        assert_eq!(m.vertices.len(), 3);
    }

    #[test]
    fn nan_isolevel_rejected() {
        assert!(marching_cubes(&grid_from(Volume::zeros([2; 3])), f64::NAN).is_err());
    }

    #[test]
    fn analytic_sphere_is_closed_and_outward() {
        let n = 24;
        let g = SdfGrid::from_volume(Volume::zeros([n; 3]), 2, false).unwrap();
        let mut vals = Volume::zeros([n; 3]);
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let p = g.point(x, y, z);
                    vals.set(x, y, z, 0.35 - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt());
                }
            }
        }
        let g = SdfGrid { values: vals, ..g };
        let m = marching_cubes(&g, 0.0).unwrap();
        assert!(m.signed_volume() > 0.0);
        // welded closed surface: every edge shared by exactly two faces
        let mut edges: HashMap<(usize, usize), i32> = HashMap::new();
        for f in &m.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        assert!(edges.values().all(|&c| c == 2));
    }
}
