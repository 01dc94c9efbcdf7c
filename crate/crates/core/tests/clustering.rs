use forge_core::clustering::{
    chamfer_distance, diffusion_map, kmeans, pairwise_chamfer, select_representatives, Bandwidth,
    DistanceMatrix, KdTree,
};
use forge_core::geometry::{distance_sq, Point3};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize, seed: u64, offset: f64) -> Vec<Point3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [offset + rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()])
        .collect()
}

fn brute_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let dir = |x: &[Point3], y: &[Point3]| {
        x.iter()
            .map(|&p| y.iter().map(|&q| distance_sq(p, q)).fold(f64::INFINITY, f64::min))
            .sum::<f64>()
            / x.len() as f64
    };
    dir(a, b) + dir(b, a)
}

#[test]
fn chamfer_matches_brute_force_exactly() {
    for (na, nb) in [(50, 50), (300, 40), (600, 700)] {
        let a = cloud(na, na as u64, 0.0);
        let b = cloud(nb, nb as u64 + 1, 0.3);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), brute_chamfer(&a, &b));
    }
    let a = cloud(50, 1, 0.0);
    let tree = KdTree::build(&a);
    for q in cloud(50, 2, 0.5) {
        let brute = a.iter().map(|&p| distance_sq(p, q)).fold(f64::INFINITY, f64::min);
        assert_eq!(tree.nearest_distance_sq(q), Some(brute));
    }
}

#[test]
fn pairwise_matches_individual_calls() {
    let sets: Vec<Vec<Point3>> = (0..4).map(|i| cloud(30 + 100 * i, i as u64, i as f64 * 0.2)).collect();
    let d = pairwise_chamfer(&sets).unwrap();
    for i in 0..4 {
        assert_eq!(d.get(i, i), 0.0);
        for j in 0..4 {
            assert_eq!(d.get(i, j), d.get(j, i));
            if i != j {
                assert_eq!(d.get(i, j), chamfer_distance(&sets[i], &sets[j]).unwrap());
            }
        }
    }
    let dup = vec![sets[0].clone(), sets[1].clone(), sets[0].clone()];
    assert_eq!(pairwise_chamfer(&dup).unwrap().get(0, 2), 0.0);
    assert!(pairwise_chamfer(&sets[..1]).is_err());
}

fn line_distances(xs: &[f64]) -> DistanceMatrix {
    DistanceMatrix::from_fn(xs.len(), |i, j| (xs[i] - xs[j]).abs()).unwrap()
}

/// Row-stochastic Markov matrix built directly from the distances.
fn markov(d: &DistanceMatrix, eps: f64) -> DMatrix<f64> {
    let n = d.len();
    let k = DMatrix::from_fn(n, n, |i, j| (-(d.get(i, j).powi(2)) / eps).exp());
    DMatrix::from_fn(n, n, |i, j| k[(i, j)] / k.row(i).sum())
}

#[test]
fn two_groups_split_by_first_coordinate() {
    let xs = [0.0, 0.1, 0.2, 5.0, 5.1, 5.3];
    let d = line_distances(&xs);
    let e = diffusion_map(&d, 3, Bandwidth::Median).unwrap();
    assert!(!e.degenerate);
    let p = markov(&d, e.epsilon);
    for c in 0..3 {
        let lambda = e.eigenvalues[c];
        let psi = e.coords.column(c) / lambda;
        let residual = (&p * &psi - &psi * lambda).amax();
        assert!(residual < 1e-9, "eigenpair {c}: {residual}");
    }
    assert!(e.eigenvalues.iter().all(|&l| l <= 1.0 + 1e-12));
    assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    let first = e.coords.column(0);
    let left = first[0].signum();
    assert!(left != 0.0);
    assert!((0..3).all(|i| first[i].signum() == left));
    assert!((3..6).all(|i| first[i].signum() == -left));
}

#[test]
fn blobs_match_exhaustive_partition() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10;
    let pts = DMatrix::from_fn(n, 2, |i, _| if i < 6 { 0.0 } else { 20.0 } + rng.random_range(-0.5..0.5));
    let km = kmeans(&pts, 2, 3).unwrap();
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1..(1u32 << n) - 1 {
        let mut inertia = 0.0;
        for side in [0, 1] {
            let members: Vec<usize> = (0..n).filter(|&i| ((mask >> i) & 1) == side).collect();
            for j in 0..2 {
                let mean = members.iter().map(|&i| pts[(i, j)]).sum::<f64>() / members.len() as f64;
                inertia += members.iter().map(|&i| (pts[(i, j)] - mean).powi(2)).sum::<f64>();
            }
        }
        if inertia < best.0 {
            best = (inertia, mask);
        }
    }
    let same = |a: usize, b: usize| ((best.1 >> a) & 1) == ((best.1 >> b) & 1);
    for a in 0..n {
        for b in 0..n {
            assert_eq!(km.assignments[a] == km.assignments[b], same(a, b));
        }
    }
    assert!((km.inertia - best.0).abs() < 1e-9);

    let reps = select_representatives(&pts, &km.assignments, &km.centroids).unwrap();
    for (c, &r) in reps.iter().enumerate() {
        let scan = (0..n)
            .filter(|&i| km.assignments[i] == c)
            .map(|i| (i, (0..2).map(|j| (pts[(i, j)] - km.centroids[(c, j)]).powi(2)).sum::<f64>()))
            .fold((usize::MAX, f64::INFINITY), |b, x| if x.1 < b.1 { x } else { b });
        assert_eq!(r, scan.0);
    }
}

#[test]
fn kmeans_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pts = DMatrix::from_fn(40, 3, |_, _| rng.random::<f64>());
    assert_eq!(kmeans(&pts, 5, 9).unwrap(), kmeans(&pts, 5, 9).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn chamfer_symmetric_and_non_negative(seed in any::<u64>(), na in 1usize..40, nb in 1usize..40) {
        let a = cloud(na, seed, 0.0);
        let b = cloud(nb, seed.wrapping_add(1), 0.2);
        let ab = chamfer_distance(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, chamfer_distance(&b, &a).unwrap());
        prop_assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn inertia_never_increases(seed in any::<u64>(), k in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = DMatrix::from_fn(30, 2, |_, _| rng.random_range(-1.0..1.0));
        let km = kmeans(&pts, k, seed).unwrap();
        prop_assert!(km.inertia_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let reps = select_representatives(&pts, &km.assignments, &km.centroids).unwrap();
        let mut distinct = reps.clone();
        distinct.sort();
        distinct.dedup();
        prop_assert_eq!(distinct.len(), k);
    }

    #[test]
    fn embedding_follows_relabeling(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..7).map(|_| rng.random_range(0.0..3.0)).collect();
        let mut perm: Vec<usize> = (0..7).collect();
        for i in (1..7).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let permuted: Vec<f64> = perm.iter().map(|&p| xs[p]).collect();
        let a = diffusion_map(&line_distances(&xs), 2, Bandwidth::Median).unwrap();
        let b = diffusion_map(&line_distances(&permuted), 2, Bandwidth::Median).unwrap();
        // Only a well-separated leading eigenvalue pins down its eigenvector.
        prop_assume!((a.eigenvalues[0] - a.eigenvalues[1]).abs() > 1e-3);
        let col_a = a.coords.column(0);
        let col_b = b.coords.column(0);
        let same = (0..7).all(|i| (col_b[i] - col_a[perm[i]]).abs() < 1e-7);
        let flipped = (0..7).all(|i| (col_b[i] + col_a[perm[i]]).abs() < 1e-7);
        prop_assert!(same || flipped);
    }
}
