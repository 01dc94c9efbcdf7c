use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::edm::{loss_weight, EdmConfig, Preconditioning};
use super::network::Denoiser;
use crate::error::{Error, Result};

/// Per-sample noise levels and the noise added to each feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub sigma: Vec<f64>,
    /// B × d, already scaled by the row's σ.
    pub eta: Array2<f64>,
}

impl NoiseDraws {
    /// `ln σ ~ N(p_mean, p_std²)`, `η ~ N(0, σ² I)`.
    pub fn sample<R: Rng>(batch: usize, dim: usize, config: &EdmConfig, rng: &mut R) -> Self {
        let mut sigma = Vec::with_capacity(batch);
        let mut eta = Array2::zeros((batch, dim));
        for r in 0..batch {
            let z: f64 = StandardNormal.sample(rng);
            let s = (config.p_mean + config.p_std * z).exp();
            sigma.push(s);
            for j in 0..dim {
                let n: f64 = StandardNormal.sample(rng);
                eta[(r, j)] = s * n;
            }
        }
        NoiseDraws { sigma, eta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    /// `(1 − λ) L_α + λ L_C`.
    pub total: f64,
    pub l_alpha: f64,
    pub l_c: f64,
}

fn check_inputs(net: &Denoiser, batch: ArrayView2<f64>, draws: &NoiseDraws, slopes: &[f64]) -> Result<()> {
    let (b, d) = batch.dim();
    if b == 0 {
        return Err(Error::Empty("empty training batch".into()));
    }
    if d != net.dim() || slopes.len() != d || draws.eta.dim() != (b, d) || draws.sigma.len() != b {
        return Err(Error::ShapeMismatch(format!(
            "batch {:?}, noise {:?}, {} slopes for a {}-dimensional denoiser",
            batch.dim(),
            draws.eta.dim(),
            slopes.len(),
            net.dim()
        )));
    }
    Ok(())
}

fn weighted_loss(r: ArrayView2<f64>, weights: &[f64], lambda: f64, slopes: &[f64]) -> LossValue {
    let b = r.nrows();
    let (mut l_alpha, mut l_c) = (0.0, 0.0);
    for (i, row) in r.outer_iter().enumerate() {
        let (mut ea, mut ec) = (0.0, 0.0);
        for (v, s) in row.iter().zip(slopes) {
            ea += v * v;
            ec += (v * s).powi(2);
        }
        l_alpha += weights[i] * ea;
        l_c += weights[i] * ec;
    }
    l_alpha /= b as f64;
    l_c /= b as f64;
    LossValue {
        total: (1.0 - lambda) * l_alpha + lambda * l_c,
        l_alpha,
        l_c,
    }
}

/// Loss of given denoiser outputs against clean features at noise levels `sigma`.
pub fn loss_from_denoised(
    batch: ArrayView2<f64>,
    denoised: ArrayView2<f64>,
    sigma: &[f64],
    config: &EdmConfig,
    slopes: &[f64],
) -> Result<LossValue> {
    let (b, d) = batch.dim();
    if denoised.dim() != (b, d) || sigma.len() != b || slopes.len() != d {
        return Err(Error::ShapeMismatch(format!(
            "batch {:?}, denoised {:?}, {} noise levels, {} slopes",
            batch.dim(),
            denoised.dim(),
            sigma.len(),
            slopes.len()
        )));
    }
    if b == 0 {
        return Err(Error::Empty("empty batch".into()));
    }
    let weights: Vec<f64> = sigma.iter().map(|&s| loss_weight(s, config.sigma_data)).collect();
    let r = &denoised - &batch;
    Ok(weighted_loss(r.view(), &weights, config.lambda, slopes))
}

struct Residuals {
    r: Array2<f64>,
    weights: Vec<f64>,
    precond: Vec<Preconditioning>,
    value: LossValue,
}

fn residuals(
    net: &Denoiser,
    batch: ArrayView2<f64>,
    draws: &NoiseDraws,
    config: &EdmConfig,
    slopes: &[f64],
    want_cache: bool,
) -> Result<(Residuals, Option<super::network::ForwardCache>)> {
    check_inputs(net, batch, draws, slopes)?;
    let (b, d) = batch.dim();
    let noisy = &batch + &draws.eta;
    let precond: Vec<Preconditioning> = draws
        .sigma
        .iter()
        .map(|&s| Preconditioning::new(s, config.sigma_data))
        .collect();
    let (f, cache) = net.forward(net.input(noisy.view(), &precond));
    let mut denoised = Array2::zeros((b, d));
    for i in 0..b {
        let p = precond[i];
        for j in 0..d {
            denoised[(i, j)] = p.c_skip * noisy[(i, j)] + p.c_out * f[(i, j)];
        }
    }
    let r = &denoised - &batch;
    let weights: Vec<f64> = draws.sigma.iter().map(|&s| loss_weight(s, config.sigma_data)).collect();
    let value = weighted_loss(r.view(), &weights, config.lambda, slopes);
    if !value.total.is_finite() {
        return Err(Error::Diverged {
            step: 0,
            message: format!("non-finite loss (L_α = {}, L_C = {})", value.l_alpha, value.l_c),
        });
    }
    Ok((
        Residuals { r, weights, precond, value },
        want_cache.then_some(cache),
    ))
}

/// Composite training loss on normalized features.
///
/// The coefficient-space term is evaluated in feature space: with an
/// orthonormal basis the residual's norm after mapping through `V_dᵀ` equals
/// its norm after per-dimension scaling by the denormalization `slopes`.
pub fn loss(
    net: &Denoiser,
    batch: ArrayView2<f64>,
    draws: &NoiseDraws,
    config: &EdmConfig,
    slopes: &[f64],
) -> Result<LossValue> {
    Ok(residuals(net, batch, draws, config, slopes, false)?.0.value)
}

/// Loss together with its gradient with respect to the flat network parameters.
pub fn loss_and_grad(
    net: &Denoiser,
    batch: ArrayView2<f64>,
    draws: &NoiseDraws,
    config: &EdmConfig,
    slopes: &[f64],
) -> Result<(LossValue, Vec<f64>)> {
    let (res, cache) = residuals(net, batch, draws, config, slopes, true)?;
    let cache = cache.expect("cache requested");
    let (b, d) = batch.dim();
    let lambda = config.lambda;
    let mix: Vec<f64> = slopes.iter().map(|s| (1.0 - lambda) + lambda * s * s).collect();
    let mut grad_f = Array2::zeros((b, d));
    for i in 0..b {
        let scale = 2.0 / b as f64 * res.weights[i] * res.precond[i].c_out;
        for j in 0..d {
            grad_f[(i, j)] = scale * res.r[(i, j)] * mix[j];
        }
    }
    Ok((res.value, net.backward(&cache, grad_f)))
}
