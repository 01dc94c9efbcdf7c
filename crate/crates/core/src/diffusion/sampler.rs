use ndarray::{Array2, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use super::edm::{sigma_schedule, EdmConfig};
use super::network::Denoiser;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

fn check_finite(x: &Array2<f64>, step: usize) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            step: step as u64,
            message: "sampler state became non-finite".into(),
        });
    }
    Ok(())
}

/// Deterministic Heun integration of the probability-flow ODE.
///
/// `schedule` is descending and ends in 0. The step into σ = 0 takes the
/// Euler update, which lands exactly on the denoiser output.
pub fn heun_sample<F>(mut denoise: F, schedule: &[f64], x0: Array2<f64>) -> Result<Array2<f64>>
where
    F: FnMut(ArrayView2<f64>, f64) -> Result<Array2<f64>>,
{
    if schedule.len() < 2 || *schedule.last().expect("non-empty") != 0.0 {
        return Err(Error::InvalidArgument("schedule needs at least one level and a terminal 0".into()));
    }
    if schedule.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("schedule must be strictly decreasing".into()));
    }
    let mut x = x0;
    check_finite(&x, 0)?;
    for i in 0..schedule.len() - 1 {
        let (s, s_next) = (schedule[i], schedule[i + 1]);
        let denoised = denoise(x.view(), s)?;
        if s_next == 0.0 {
            x = denoised;
        } else {
            let slope = (&x - &denoised) / s;
            let x_euler = &x + &(&slope * (s_next - s));
            let denoised_next = denoise(x_euler.view(), s_next)?;
            let slope_next = (&x_euler - &denoised_next) / s_next;
            x = &x + &((&slope + &slope_next) * (0.5 * (s_next - s)));
        }
        check_finite(&x, i + 1)?;
    }
    Ok(x)
}

/// `count` starting points `x₀ ~ N(0, σ₀² I)`; row `i` depends only on `(seed, i)`.
pub fn initial_noise(count: usize, dim: usize, sigma0: f64, seed: u64) -> Array2<f64> {
    let mut x = Array2::zeros((count, dim));
    for r in 0..count {
        let mut rng = stream(seed, Purpose::Sampling, r as u64);
        for j in 0..dim {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[(r, j)] = sigma0 * z;
        }
    }
    x
}

/// Samples over an explicit schedule, which may be shorter than the config's.
pub fn sample_with_schedule(
    net: &Denoiser,
    sigma_data: f64,
    schedule: &[f64],
    count: usize,
    seed: u64,
) -> Result<Array2<f64>> {
    let sigma0 = *schedule
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty schedule".into()))?;
    let x0 = initial_noise(count, net.dim(), sigma0, seed);
    heun_sample(
        |x, s| net.denoise_batch(x, &vec![s; x.nrows()], sigma_data),
        schedule,
        x0,
    )
}

/// `count` normalized feature vectors from the config's schedule.
pub fn sample(net: &Denoiser, config: &EdmConfig, count: usize, seed: u64) -> Result<Array2<f64>> {
    let schedule = sigma_schedule(config)?;
    sample_with_schedule(net, config.sigma_data, &schedule, count, seed)
}
