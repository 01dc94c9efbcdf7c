use rayon::prelude::*;

use super::kdtree::KdTree;
use crate::error::{Error, Result};
use crate::geometry::{distance_sq, Point3};

/// Above this many target points the nearest-neighbor search uses a k-d tree.
pub const BRUTE_FORCE_LIMIT: usize = 256;

fn mean_nearest_sq(from: &[Point3], to: &[Point3]) -> f64 {
    let total: f64 = if to.len() > BRUTE_FORCE_LIMIT {
        let tree = KdTree::build(to);
        from.iter()
            .map(|&a| tree.nearest_distance_sq(a).expect("non-empty tree"))
            .sum()
    } else {
        from.iter()
            .map(|&a| to.iter().map(|&b| distance_sq(a, b)).fold(f64::INFINITY, f64::min))
            .sum()
    };
    total / from.len() as f64
}

/// Symmetric Chamfer distance: sum of both directed mean squared
/// nearest-neighbor distances.
pub fn chamfer_distance(a: &[Point3], b: &[Point3]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("Chamfer distance needs two non-empty point sets".into()));
    }
    Ok(mean_nearest_sq(a, b) + mean_nearest_sq(b, a))
}

/// Symmetric N × N matrix with an exact zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    /// Validates a row-major N × N buffer.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::ShapeMismatch(format!(
                "{} entries for a {n}×{n} distance matrix",
                values.len()
            )));
        }
        for i in 0..n {
            if values[i * n + i] != 0.0 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is not zero")));
            }
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "entry ({i}, {j}) = {v} is not a finite non-negative distance"
                    )));
                }
                if (v - values[j * n + i]).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!("entry ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(DistanceMatrix { n, values })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Self::from_values(n, values)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn off_diagonal(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).filter(move |&j| j != i).map(move |j| self.get(i, j)))
    }
}

/// Chamfer distance for every unordered pair, computed once per pair in parallel.
pub fn pairwise_chamfer(point_sets: &[Vec<Point3>]) -> Result<DistanceMatrix> {
    let n = point_sets.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "pairwise Chamfer needs at least 2 point sets, got {n}"
        )));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists = pairs
        .par_iter()
        .map(|&(i, j)| {
            chamfer_distance(&point_sets[i], &point_sets[j])
                .map_err(|e| Error::Empty(format!("pair ({i}, {j}): {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut values = vec![0.0; n * n];
    for (&(i, j), &d) in pairs.iter().zip(&dists) {
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    DistanceMatrix::from_values(n, values)
}
