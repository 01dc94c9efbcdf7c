use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const MAX_ITERATIONS: usize = 300;
pub const SHIFT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    /// n_clusters × k.
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

fn sq_dist_row(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    (0..points.ncols()).map(|j| (points[(i, j)] - centroids[(c, j)]).powi(2)).sum()
}

fn nearest_centroid(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist_row(points, i, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus_init(points: &DMatrix<f64>, n_clusters: usize, seed: u64) -> DMatrix<f64> {
    let (n, k) = points.shape();
    let mut rng = stream(seed, Purpose::KMeans, 0);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = vec![f64::INFINITY; n];
    while chosen.len() < n_clusters {
        let last = *chosen.last().expect("at least one center");
        for (i, slot) in d2.iter_mut().enumerate() {
            let d: f64 = (0..k).map(|j| (points[(i, j)] - points[(last, j)]).powi(2)).sum();
            *slot = slot.min(d);
        }
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the target just past the last positive weight.
            pick.unwrap_or_else(|| d2.iter().rposition(|&w| w > 0.0).expect("positive total"))
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("n_clusters ≤ N")
        };
        chosen.push(next);
    }
    DMatrix::from_fn(n_clusters, k, |c, j| points[(chosen[c], j)])
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// Clusters that empty out are re-seeded at the point farthest from its
/// assigned centroid (among points whose cluster keeps another member).
pub fn kmeans(points: &DMatrix<f64>, n_clusters: usize, seed: u64) -> Result<KMeans> {
    let (n, k) = points.shape();
    if n_clusters < 1 {
        return Err(Error::InvalidArgument("n_clusters must be at least 1".into()));
    }
    if n_clusters > n {
        return Err(Error::InvalidArgument(format!(
            "n_clusters = {n_clusters} exceeds the number of points {n}"
        )));
    }
    if points.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("k-means input".into()));
    }

    let mut centroids = plus_plus_init(points, n_clusters, seed);
    let mut assignments = vec![0usize; n];
    let mut dists = vec![0.0f64; n];
    let mut inertia_history = Vec::new();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for i in 0..n {
            let (c, d) = nearest_centroid(points, i, &centroids);
            assignments[i] = c;
            dists[i] = d;
        }
        repair_empty(points, &mut centroids, &mut assignments, &mut dists);
        inertia_history.push(dists.iter().sum());

        let mut sums = DMatrix::<f64>::zeros(n_clusters, k);
        let mut counts = vec![0usize; n_clusters];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for j in 0..k {
                sums[(assignments[i], j)] += points[(i, j)];
            }
        }
        let mut shift = 0.0f64;
        for c in 0..n_clusters {
            let mut moved = 0.0f64;
            for j in 0..k {
                let mean = sums[(c, j)] / counts[c] as f64;
                moved += (mean - centroids[(c, j)]).powi(2);
                centroids[(c, j)] = mean;
            }
            shift = shift.max(moved.sqrt());
        }
        if shift < SHIFT_TOLERANCE {
            break;
        }
    }
    let inertia = (0..n).map(|i| sq_dist_row(points, i, &centroids, assignments[i])).sum();
    Ok(KMeans {
        assignments,
        centroids,
        inertia,
        inertia_history,
        iterations,
    })
}

fn repair_empty(
    points: &DMatrix<f64>,
    centroids: &mut DMatrix<f64>,
    assignments: &mut [usize],
    dists: &mut [f64],
) {
    let n_clusters = centroids.nrows();
    let mut counts = vec![0usize; n_clusters];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for c in 0..n_clusters {
        if counts[c] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .fold(None, |best: Option<usize>, i| match best {
                Some(b) if dists[b] >= dists[i] => Some(b),
                _ => Some(i),
            })
            .expect("n_clusters ≤ N leaves a donor");
        log::debug!("k-means: re-seeding empty cluster {c} at point {donor}");
        counts[assignments[donor]] -= 1;
        counts[c] = 1;
        assignments[donor] = c;
        dists[donor] = 0.0;
        for j in 0..points.ncols() {
            centroids[(c, j)] = points[(donor, j)];
        }
    }
}

/// For each cluster, the member nearest its centroid (ties to the lowest index).
pub fn select_representatives(
    points: &DMatrix<f64>,
    assignments: &[usize],
    centroids: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    if assignments.len() != points.nrows() || centroids.ncols() != points.ncols() {
        return Err(Error::ShapeMismatch("assignments, points and centroids disagree".into()));
    }
    let mut best: Vec<Option<(usize, f64)>> = vec![None; centroids.nrows()];
    for (i, &c) in assignments.iter().enumerate() {
        if c >= centroids.nrows() {
            return Err(Error::InvalidArgument(format!("assignment {c} of point {i} out of range")));
        }
        let d = sq_dist_row(points, i, centroids, c);
        match best[c] {
            Some((_, bd)) if bd <= d => {}
            _ => best[c] = Some((i, d)),
        }
    }
    best.iter()
        .enumerate()
        .map(|(c, b)| b.map(|(i, _)| i).ok_or(Error::EmptyCluster { cluster: c }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cluster_per_point() {
        let pts = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 5.0, 5.0]);
        let km = kmeans(&pts, 4, 1).unwrap();
        assert_eq!(km.inertia, 0.0);
        let mut a = km.assignments.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2, 3]);
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = DMatrix::from_row_slice(4, 1, &[0.0, 0.0, 0.0, 1.0]);
        let km = kmeans(&pts, 3, 7).unwrap();
        let mut seen = km.assignments.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }

    #[test]
    fn rejects_bad_cluster_counts() {
        let pts = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert!(kmeans(&pts, 0, 0).is_err());
        assert!(kmeans(&pts, 3, 0).is_err());
    }

    #[test]
    fn representative_ties_and_empty() {
        let pts = DMatrix::from_row_slice(3, 1, &[-1.0, 0.0, 1.0]);
        let cen = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_eq!(select_representatives(&pts, &[0, 0, 0], &cen).unwrap(), vec![1]);
        let cen2 = DMatrix::from_row_slice(1, 1, &[0.5]);
        let pts2 = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        assert_eq!(select_representatives(&pts2, &[0, 0], &cen2).unwrap(), vec![0]);
        let cen3 = DMatrix::from_row_slice(2, 1, &[0.0, 9.0]);
        assert!(matches!(
            select_representatives(&pts2, &[0, 0], &cen3),
            Err(Error::EmptyCluster { cluster: 1 })
        ));
    }
}
