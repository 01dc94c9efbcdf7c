//! Set-level generative metrics over point clouds.
//!
//! MMD, COV and 1-NNA compare shapes through the Chamfer distance; JSD compares
//! pooled voxel-occupancy histograms.

use std::fmt;

use rayon::prelude::*;

use crate::clustering::chamfer_distance;
use crate::error::{Error, Result};
use crate::geometry::Point3;

pub const DEFAULT_POINTS_PER_SHAPE: usize = 2048;
pub const DEFAULT_JSD_RESOLUTION: usize = 28;

fn require_non_empty(sets: &[Vec<Point3>], what: &str) -> Result<()> {
    if sets.is_empty() {
        return Err(Error::Empty(format!("{what} set list is empty")));
    }
    Ok(())
}

/// Row-major `a.len() × b.len()` matrix of Chamfer distances.
pub fn cross_chamfer(a: &[Vec<Point3>], b: &[Vec<Point3>]) -> Result<Vec<Vec<f64>>> {
    (0..a.len())
        .into_par_iter()
        .map(|i| b.iter().map(|bj| chamfer_distance(&a[i], bj)).collect())
        .collect()
}

fn mmd_from(cross_gr: &[Vec<f64>], n_ref: usize) -> f64 {
    let total: f64 = (0..n_ref)
        .map(|r| cross_gr.iter().map(|row| row[r]).fold(f64::INFINITY, f64::min))
        .sum();
    total / n_ref as f64
}

fn cov_from(cross_gr: &[Vec<f64>], n_ref: usize) -> f64 {
    let mut matched = vec![false; n_ref];
    for row in cross_gr {
        let mut best = 0;
        for r in 1..n_ref {
            if row[r] < row[best] {
                best = r;
            }
        }
        matched[best] = true;
    }
    100.0 * matched.iter().filter(|&&m| m).count() as f64 / n_ref as f64
}

/// Mean over references of the Chamfer distance to the closest generated shape.
pub fn mmd(generated: &[Vec<Point3>], reference: &[Vec<Point3>]) -> Result<f64> {
    require_non_empty(generated, "generated")?;
    require_non_empty(reference, "reference")?;
    Ok(mmd_from(&cross_chamfer(generated, reference)?, reference.len()))
}

/// Percentage of references that are the nearest reference of some generated shape.
pub fn coverage(generated: &[Vec<Point3>], reference: &[Vec<Point3>]) -> Result<f64> {
    require_non_empty(generated, "generated")?;
    require_non_empty(reference, "reference")?;
    Ok(cov_from(&cross_chamfer(generated, reference)?, reference.len()))
}

fn one_nna_from(n_gen: usize, dist: impl Fn(usize, usize) -> f64, n_total: usize) -> f64 {
    let label = |i: usize| i < n_gen;
    let mut correct = 0usize;
    for i in 0..n_total {
        let mut best: Option<(usize, f64)> = None;
        for j in (0..n_total).filter(|&j| j != i) {
            let d = dist(i, j);
            let better = match best {
                None => true,
                Some((b, bd)) => d < bd || (d == bd && label(b) == label(i) && label(j) != label(i)),
            };
            if better {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("pool has at least two samples");
        if label(j) == label(i) {
            correct += 1;
        }
    }
    100.0 * correct as f64 / n_total as f64
}

/// Leave-one-out 1-nearest-neighbor accuracy of the generated/reference labeling.
///
/// Distance ties resolve toward the opposite label.
pub fn one_nna(generated: &[Vec<Point3>], reference: &[Vec<Point3>]) -> Result<f64> {
    if generated.len() < 2 || reference.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "1-NNA needs at least 2 shapes per group, got {} and {}",
            generated.len(),
            reference.len()
        )));
    }
    let pool: Vec<Vec<Point3>> = generated.iter().chain(reference).cloned().collect();
    let full = cross_chamfer(&pool, &pool)?;
    Ok(one_nna_from(generated.len(), |i, j| full[i][j], pool.len()))
}

fn histogram(sets: &[Vec<Point3>], resolution: usize) -> Vec<f64> {
    let r = resolution as f64;
    let bin = |v: f64| (((v + 0.5) * r).floor().max(0.0) as usize).min(resolution - 1);
    let mut counts = vec![0.0; resolution * resolution * resolution];
    for p in sets.iter().flatten() {
        counts[bin(p[0]) + resolution * (bin(p[1]) + resolution * bin(p[2]))] += 1.0;
    }
    counts
}

fn kl_term(p: f64, m: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * (p / m).ln()
    }
}

/// Jensen–Shannon divergence (natural log) of pooled occupancy histograms over
/// `[−0.5, 0.5]³`; points outside land in the boundary bins.
pub fn jsd(generated: &[Vec<Point3>], reference: &[Vec<Point3>], resolution: usize) -> Result<f64> {
    if resolution == 0 {
        return Err(Error::InvalidArgument("JSD grid resolution must be positive".into()));
    }
    let p = histogram(generated, resolution);
    let q = histogram(reference, resolution);
    let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
    if sp == 0.0 || sq == 0.0 {
        return Err(Error::Empty("JSD needs points in both groups".into()));
    }
    let mut kl_p = 0.0;
    let mut kl_q = 0.0;
    for (a, b) in p.iter().zip(&q) {
        let (a, b) = (a / sp, b / sq);
        let m = 0.5 * (a + b);
        kl_p += kl_term(a, m);
        kl_q += kl_term(b, m);
    }
    Ok((0.5 * kl_p + 0.5 * kl_q).max(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Raw MMD; multiplied by 10³ only for display.
    pub mmd: f64,
    pub cov: f64,
    pub one_nna: f64,
    pub jsd: f64,
    pub n_generated: usize,
    pub n_reference: usize,
    pub points_per_shape: usize,
    pub jsd_resolution: usize,
    pub seed: u64,
}

/// Computes all four metrics, sharing one pooled Chamfer matrix.
pub fn evaluate(
    generated: &[Vec<Point3>],
    reference: &[Vec<Point3>],
    jsd_resolution: usize,
    points_per_shape: usize,
    seed: u64,
) -> Result<EvalReport> {
    if generated.len() < 2 || reference.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "evaluation needs at least 2 shapes per group, got {} and {}",
            generated.len(),
            reference.len()
        )));
    }
    let n_gen = generated.len();
    let n_ref = reference.len();
    let pool: Vec<Vec<Point3>> = generated.iter().chain(reference).cloned().collect();
    let full = cross_chamfer(&pool, &pool)?;
    let cross_gr: Vec<Vec<f64>> = full[..n_gen].iter().map(|row| row[n_gen..].to_vec()).collect();
    Ok(EvalReport {
        mmd: mmd_from(&cross_gr, n_ref),
        cov: cov_from(&cross_gr, n_ref),
        one_nna: one_nna_from(n_gen, |i, j| full[i][j], pool.len()),
        jsd: jsd(generated, reference, jsd_resolution)?,
        n_generated: n_gen,
        n_reference: n_ref,
        points_per_shape,
        jsd_resolution,
        seed,
    })
}

impl EvalReport {
    /// Line-oriented `key=value` text.
    pub fn to_key_value(&self) -> String {
        format!(
            "mmd={:e}\ncov={}\none_nna={}\njsd={:e}\nn_generated={}\nn_reference={}\npoints_per_shape={}\njsd_resolution={}\nseed={}\n",
            self.mmd,
            self.cov,
            self.one_nna,
            self.jsd,
            self.n_generated,
            self.n_reference,
            self.points_per_shape,
            self.jsd_resolution,
            self.seed
        )
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>12}", "metric", "value")?;
        writeln!(f, "{:<12} {:>12.4}", "MMD (x10^3)", self.mmd * 1e3)?;
        writeln!(f, "{:<12} {:>11.2}%", "COV", self.cov)?;
        writeln!(f, "{:<12} {:>11.2}%", "1-NNA", self.one_nna)?;
        writeln!(f, "{:<12} {:>12.6}", "JSD", self.jsd)?;
        write!(
            f,
            "{} generated vs {} reference, {} points/shape, {}^3 JSD grid, seed {}",
            self.n_generated, self.n_reference, self.points_per_shape, self.jsd_resolution, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(p: Point3) -> Vec<Point3> {
        vec![p]
    }

    #[test]
    fn mmd_hand_example() {
        // CD between singletons is twice the squared distance.
        let a = single([0.0; 3]);
        let b = single([1.0, 0.0, 0.0]);
        let c = single([5f64.sqrt() / 2f64.sqrt(), 0.0, 0.0]);
        let v = mmd(&[b, c], &[a]).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn coverage_all_identical_generated() {
        let refs: Vec<_> = (0..4).map(|i| single([i as f64, 0.0, 0.0])).collect();
        let gen = vec![single([0.0; 3]); 3];
        assert_eq!(coverage(&gen, &refs).unwrap(), 25.0);
    }

    #[test]
    fn one_nna_copy_is_zero_and_separated_is_hundred() {
        let a: Vec<_> = (0..3).map(|i| single([i as f64, 0.0, 0.0])).collect();
        assert_eq!(one_nna(&a, &a).unwrap(), 0.0);
        let far: Vec<_> = (0..3).map(|i| single([100.0 + i as f64, 0.0, 0.0])).collect();
        assert_eq!(one_nna(&a, &far).unwrap(), 100.0);
        assert!(one_nna(&a[..1], &far).is_err());
    }

    #[test]
    fn jsd_extremes() {
        let a = vec![vec![[-0.4; 3], [0.4; 3]]];
        let b = vec![vec![[-0.4, 0.4, -0.4]]];
        assert_eq!(jsd(&a, &a, 4).unwrap(), 0.0);
        assert!((jsd(&a, &b, 4).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(jsd(&a, &[vec![]], 4).is_err());
    }

    #[test]
    fn out_of_range_points_clamp() {
        let a = vec![vec![[0.9, -0.9, 0.5]]];
        let b = vec![vec![[0.49, -0.49, 0.49]]];
        assert_eq!(jsd(&a, &b, 2).unwrap(), 0.0);
    }
}
