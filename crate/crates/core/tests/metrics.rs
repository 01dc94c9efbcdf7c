use forge_core::clustering::chamfer_distance;
use forge_core::geometry::Point3;
use forge_core::metrics::{coverage, evaluate, jsd, mmd, one_nna};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sets(count: usize, seed: u64) -> Vec<Vec<Point3>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(3..12);
            (0..n).map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect()
        })
        .collect()
}

fn cd(a: &[Point3], b: &[Point3]) -> f64 {
    chamfer_distance(a, b).unwrap()
}

fn mmd_oracle(g: &[Vec<Point3>], r: &[Vec<Point3>]) -> f64 {
    let mut total = 0.0;
    for ri in r {
        let mut best = f64::INFINITY;
        for gi in g {
            best = best.min(cd(ri, gi));
        }
        total += best;
    }
    total / r.len() as f64
}

fn cov_oracle(g: &[Vec<Point3>], r: &[Vec<Point3>]) -> f64 {
    let mut hit = vec![false; r.len()];
    for gi in g {
        let d: Vec<f64> = r.iter().map(|ri| cd(gi, ri)).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        hit[d.iter().position(|&v| v == min).unwrap()] = true;
    }
    100.0 * hit.iter().filter(|&&h| h).count() as f64 / r.len() as f64
}

fn nna_oracle(g: &[Vec<Point3>], r: &[Vec<Point3>]) -> f64 {
    let pool: Vec<(&Vec<Point3>, bool)> = g.iter().map(|s| (s, true)).chain(r.iter().map(|s| (s, false))).collect();
    let mut correct = 0;
    for (i, (si, li)) in pool.iter().enumerate() {
        let d: Vec<(f64, bool)> = pool
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, (sj, lj))| (cd(si, sj), *lj))
            .collect();
        let min = d.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        // Any tied neighbor with the other label wins.
        let opposite_tied = d.iter().any(|&(v, l)| v == min && l != *li);
        if !opposite_tied {
            correct += 1;
        }
    }
    100.0 * correct as f64 / pool.len() as f64
}

#[test]
fn metrics_equal_brute_force() {
    for seed in 0..4 {
        let g = sets(5 + seed as usize, seed);
        let r = sets(5, seed + 100);
        assert_eq!(mmd(&g, &r).unwrap(), mmd_oracle(&g, &r));
        assert_eq!(coverage(&g, &r).unwrap(), cov_oracle(&g, &r));
        assert_eq!(one_nna(&g, &r).unwrap(), nna_oracle(&g, &r));
        let report = evaluate(&g, &r, 8, 0, 0).unwrap();
        assert_eq!(report.mmd, mmd_oracle(&g, &r));
        assert_eq!(report.cov, cov_oracle(&g, &r));
        assert_eq!(report.one_nna, nna_oracle(&g, &r));
    }
}

#[test]
fn self_evaluation() {
    let x = sets(6, 42);
    let report = evaluate(&x, &x, 28, 0, 7).unwrap();
    assert_eq!((report.mmd, report.cov, report.jsd, report.one_nna), (0.0, 100.0, 0.0, 0.0));
    let kv = report.to_key_value();
    for key in ["mmd=", "cov=", "one_nna=", "jsd=", "seed=7"] {
        assert!(kv.contains(key));
    }
}

#[test]
fn jsd_hand_computed_on_two_cubed_grid() {
    let a = vec![vec![[-0.4, -0.4, -0.4], [-0.3, -0.2, -0.1], [-0.1, -0.4, -0.2], [0.3, 0.3, 0.3]]];
    let b = vec![vec![[-0.4, -0.4, -0.4], [-0.2, -0.2, -0.2], [0.2, -0.3, -0.3], [0.4, -0.1, -0.4]]];
    let kl_p = 0.75 * (0.75f64 / 0.625).ln() + 0.25 * (0.25f64 / 0.125).ln();
    let kl_q = 0.5 * (0.5f64 / 0.625).ln() + 0.5 * (0.5f64 / 0.25).ln();
    let expect = 0.5 * kl_p + 0.5 * kl_q;
    assert!((jsd(&a, &b, 2).unwrap() - expect).abs() < 1e-15);
}

#[test]
fn size_and_emptiness_errors() {
    let x = sets(3, 1);
    assert!(mmd(&[], &x).is_err());
    assert!(coverage(&x, &[]).is_err());
    assert!(one_nna(&x[..1], &x).is_err());
    assert!(jsd(&[vec![]], &x, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metric_invariants(seed in any::<u64>(), ng in 2usize..6, nr in 2usize..6) {
        let g = sets(ng, seed);
        let r = sets(nr, seed ^ 0x55);
        let m = mmd(&g, &r).unwrap();
        prop_assert!(m >= 0.0);
        let mut more = g.clone();
        more.extend(sets(2, seed ^ 0xAA));
        prop_assert!(mmd(&more, &r).unwrap() <= m);
        let c = coverage(&g, &r).unwrap();
        prop_assert!(c > 0.0 && c <= 100.0);
        prop_assert_eq!(one_nna(&g, &r).unwrap(), one_nna(&r, &g).unwrap());
        let j = jsd(&g, &r, 4).unwrap();
        prop_assert!((0.0..=std::f64::consts::LN_2 + 1e-12).contains(&j));
        prop_assert!((j - jsd(&r, &g, 4).unwrap()).abs() < 1e-15);
    }
}
