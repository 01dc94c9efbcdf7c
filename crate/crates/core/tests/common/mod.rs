#![allow(dead_code)]

use forge_core::geometry::{distance_sq, Point3, SdfGrid, TriangleMesh};
use forge_core::Volume;

/// Exact signed distance of a centered sphere (positive inside) on the standard grid.
pub fn analytic_sphere_grid(n: usize, radius: f64) -> SdfGrid {
    let (origin, h) = SdfGrid::placement(n, 2).unwrap();
    let values = Volume::from_fn([n; 3], |x, y, z| {
        let p = [origin[0] + x as f64 * h, origin[1] + y as f64 * h, origin[2] + z as f64 * h];
        radius - (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
    });
    SdfGrid::from_volume(values, 2, false).unwrap()
}

fn directed(a: &[Point3], b: &[Point3]) -> f64 {
    a.iter()
        .map(|&p| b.iter().map(|&q| distance_sq(p, q)).fold(f64::INFINITY, f64::min))
        .sum::<f64>()
        / a.len() as f64
}

/// Brute-force symmetric Chamfer distance between vertex sets, in length units
/// (square root of each directed mean squared distance, summed).
pub fn vertex_chamfer(a: &TriangleMesh, b: &TriangleMesh) -> f64 {
    assert!(!a.vertices.is_empty() && !b.vertices.is_empty());
    directed(&a.vertices, &b.vertices).sqrt() + directed(&b.vertices, &a.vertices).sqrt()
}

/// Singular values of a row-major `rows × cols` matrix by one-sided Jacobi
/// rotations, descending.
pub fn jacobi_singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    // Columns of Aᵀ are the rows of A.
    let mut u: Vec<Vec<f64>> = (0..rows).map(|i| a[i * cols..(i + 1) * cols].to_vec()).collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..rows {
            for q in p + 1..rows {
                let alpha: f64 = u[p].iter().map(|x| x * x).sum();
                let beta: f64 = u[q].iter().map(|x| x * x).sum();
                let gamma: f64 = u[p].iter().zip(&u[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for k in 0..cols {
                    let (x, y) = (u[p][k], u[q][k]);
                    u[p][k] = c * x - s * y;
                    u[q][k] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = u.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
