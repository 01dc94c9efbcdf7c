use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point3, TriangleMesh};
use crate::error::{Error, Result};

/// Draws `count` i.i.d. surface points, area-weighted, uniform within each
/// triangle. Identical `(mesh, count, seed)` yields identical points.
pub fn sample_surface_points(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<Vec<Point3>> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces.len());
    let mut total = 0.0;
    for f in 0..mesh.faces.len() {
        total += mesh.triangle_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::InvalidMesh(format!(
            "surface area is {total}; nothing to sample"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| {
            let target = rng.random::<f64>() * total;
            let face = cumulative
                .partition_point(|&c| c <= target)
                .min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let r1: f64 = rng.random::<f64>().sqrt();
            let r2: f64 = rng.random();
            let (wa, wb, wc) = (1.0 - r1, r1 * (1.0 - r2), r1 * r2);
            [
                wa * a[0] + wb * b[0] + wc * c[0],
                wa * a[1] + wb * b[1] + wc * c[1],
                wa * a[2] + wb * b[2] + wc * c[2],
            ]
        })
        .collect();
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_triangles() -> TriangleMesh {
        // areas 1 and 3, in separate half-spaces of x
        TriangleMesh::new(
            vec![
                [0.0, 0.0, 0.0],
                [-1.0, 0.0, 0.0],
                [-1.0, 2.0, 0.0],
                [1.0, 0.0, 0.0],
                [4.0, 0.0, 0.0],
                [4.0, 2.0, 0.0],
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap()
    }

    #[test]
    fn points_stay_inside_single_triangle() {
        let m = TriangleMesh::new(
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        for p in sample_surface_points(&m, 5000, 11).unwrap() {
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-15);
            assert_eq!(p[2], 0.0);
        }
    }

    #[test]
    fn area_weighting_follows_binomial_bound() {
        let m = two_triangles();
        let pts = sample_surface_points(&m, 40_000, 5).unwrap();
        let second = pts.iter().filter(|p| p[0] > 0.5).count() as i64;
        // mean 30000, sd ≈ 86.6; ±500 is beyond 5 sd
        assert!((second - 30_000).abs() <= 500, "got {second}");
    }

    #[test]
    fn deterministic_given_seed() {
        let m = two_triangles();
        assert_eq!(
            sample_surface_points(&m, 100, 9).unwrap(),
            sample_surface_points(&m, 100, 9).unwrap()
        );
        assert_ne!(
            sample_surface_points(&m, 100, 9).unwrap(),
            sample_surface_points(&m, 100, 10).unwrap()
        );
    }

    #[test]
    fn zero_area_is_an_error() {
        let m = TriangleMesh::new(
            vec![[0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(sample_surface_points(&m, 10, 0).is_err());
    }
}
