use ndarray::ArrayView2;
use rand::seq::index;

use super::edm::EdmConfig;
use super::loss::{loss, loss_and_grad, NoiseDraws};
use super::network::Denoiser;
use crate::error::Result;
use crate::rng::{stream, Purpose};

/// Magnitudes below this are treated as zero in the relative error.
pub const RELATIVE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Parameter index with the largest error.
    pub worst_index: usize,
    pub checked: usize,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic[i]` with the central difference of `objective` at each index.
pub fn compare_gradients(
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    epsilon: f64,
    mut objective: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<GradCheckReport> {
    let mut p = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: indices.first().copied().unwrap_or(0),
        checked: 0,
    };
    for &i in indices {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = objective(&p)?;
        p[i] = orig - epsilon;
        let down = objective(&p)?;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = i;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Checks the loss gradient on `count` randomly chosen parameters.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    net: &Denoiser,
    batch: ArrayView2<f64>,
    draws: &NoiseDraws,
    config: &EdmConfig,
    slopes: &[f64],
    epsilon: f64,
    count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, analytic) = loss_and_grad(net, batch, draws, config, slopes)?;
    let n = net.num_params();
    let mut rng = stream(seed, Purpose::GradientCheck, 0);
    let mut indices = index::sample(&mut rng, n, count.min(n)).into_vec();
    indices.sort_unstable();
    let mut probe = net.clone();
    compare_gradients(net.params(), &analytic, &indices, epsilon, |p| {
        probe.params_mut().copy_from_slice(p);
        Ok(loss(&probe, batch, draws, config, slopes)?.total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn quadratic_objective() {
        let params = [1.0, -2.0, 0.5];
        let analytic: Vec<f64> = params.iter().map(|p| 2.0 * p).collect();
        let f = |p: &[f64]| Ok(p.iter().map(|x| x * x).sum());
        let ok = compare_gradients(&params, &analytic, &[0, 1, 2], 1e-5, f).unwrap();
        assert!(ok.max_relative_error < 1e-8);
        let mut wrong = analytic.clone();
        wrong[1] *= 1.05;
        let bad = compare_gradients(&params, &wrong, &[0, 1, 2], 1e-5, f).unwrap();
        assert_eq!(bad.worst_index, 1);
        assert!(bad.max_relative_error > 1e-2);
    }
}
