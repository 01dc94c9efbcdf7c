use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::Rng;

use super::edm::EdmConfig;
use super::loss::{loss, loss_and_grad, LossValue, NoiseDraws};
use super::network::Denoiser;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Upper bound of the EMA decay; early steps use a shorter warm-up horizon.
    pub ema_decay: f64,
    /// Draw batch rows with replacement (needed when n < batch_size).
    pub with_replacement: bool,
    /// Checkpoint interval in steps; 0 disables periodic checkpoints.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 100_000,
            batch_size: 32,
            learning_rate: 5e-4,
            seed: 0,
            ema_decay: 0.999,
            with_replacement: false,
            checkpoint_every: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub step: u64,
    pub loss: LossValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub net: Denoiser,
    /// Exponential moving average of the parameters, used for sampling.
    pub ema: Vec<f64>,
    pub adam: AdamState,
    /// Completed optimizer steps.
    pub step: u64,
    /// Root seed of the batch and noise streams.
    pub seed: u64,
    pub history: Vec<LossRecord>,
}

impl TrainState {
    pub fn new(net: Denoiser, seed: u64) -> Self {
        let n = net.num_params();
        TrainState {
            ema: net.params().to_vec(),
            adam: AdamState {
                m: vec![0.0; n],
                v: vec![0.0; n],
                step: 0,
            },
            net,
            step: 0,
            seed,
            history: Vec::new(),
        }
    }

    pub fn ema_denoiser(&self) -> Denoiser {
        let mut net = self.net.clone();
        net.params_mut().copy_from_slice(&self.ema);
        net
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.net.num_params();
        if self.ema.len() != n || self.adam.m.len() != n || self.adam.v.len() != n {
            return Err(Error::ShapeMismatch("optimizer state does not mirror parameters".into()));
        }
        Ok(())
    }
}

/// EMA decay at a given step: `min(max, (1 + t) / (10 + t))`.
pub fn ema_decay_at(step: u64, max: f64) -> f64 {
    let t = step as f64;
    max.min((1.0 + t) / (10.0 + t))
}

/// Row indices of the mini-batch used at `step`.
pub fn select_batch(n: usize, batch: usize, with_replacement: bool, seed: u64, step: u64) -> Result<Vec<usize>> {
    if n == 0 || batch == 0 {
        return Err(Error::Empty("no training rows or zero batch size".into()));
    }
    let mut rng = stream(seed, Purpose::BatchSelection, step);
    if with_replacement {
        Ok((0..batch).map(|_| rng.random_range(0..n)).collect())
    } else if batch <= n {
        Ok(index::sample(&mut rng, n, batch).into_vec())
    } else {
        Err(Error::InvalidArgument(format!(
            "batch size {batch} exceeds {n} training rows; enable sampling with replacement"
        )))
    }
}

fn gather(features: ArrayView2<f64>, rows: &[usize]) -> Array2<f64> {
    features.select(Axis(0), rows)
}

fn diverged(step: u64, message: impl Into<String>) -> Error {
    Error::Diverged {
        step,
        message: message.into(),
    }
}

/// Runs Adam steps until `config.steps` steps are complete.
///
/// Batch rows and noise at step `t` come from streams keyed by the state's
/// seed and `t`, so a resumed run reproduces an uninterrupted one. On
/// divergence the state is left at the last good step.
pub fn train(
    state: &mut TrainState,
    features: ArrayView2<f64>,
    edm: &EdmConfig,
    slopes: &[f64],
    config: &TrainConfig,
    mut on_checkpoint: impl FnMut(&TrainState) -> Result<()>,
) -> Result<()> {
    edm.validate()?;
    state.validate()?;
    if !(config.learning_rate > 0.0) || !(0.0..1.0).contains(&config.ema_decay) {
        return Err(Error::InvalidArgument("learning rate must be positive and ema_decay in [0, 1)".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    let (n, d) = features.dim();
    while state.step < config.steps {
        let t = state.step;
        let rows = select_batch(n, config.batch_size, config.with_replacement, state.seed, t)?;
        let batch = gather(features, &rows);
        let mut noise_rng = stream(state.seed, Purpose::TrainingNoise, t);
        let draws = NoiseDraws::sample(rows.len(), d, edm, &mut noise_rng);
        let (value, grad) = loss_and_grad(&state.net, batch.view(), &draws, edm, slopes).map_err(|e| match e {
            Error::Diverged { message, .. } => diverged(t, message),
            other => other,
        })?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(diverged(t, "non-finite gradient"));
        }

        let k = state.adam.step + 1;
        let bc1 = 1.0 - BETA1.powi(k as i32);
        let bc2 = 1.0 - BETA2.powi(k as i32);
        let mut next = state.net.params().to_vec();
        let mut m = state.adam.m.clone();
        let mut v = state.adam.v.clone();
        for i in 0..next.len() {
            m[i] = BETA1 * m[i] + (1.0 - BETA1) * grad[i];
            v[i] = BETA2 * v[i] + (1.0 - BETA2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            next[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPS);
        }
        if next.iter().any(|p| !p.is_finite()) {
            return Err(diverged(t, "parameters became non-finite"));
        }

        state.net.params_mut().copy_from_slice(&next);
        state.adam = AdamState { m, v, step: k };
        let decay = ema_decay_at(t, config.ema_decay);
        for (e, p) in state.ema.iter_mut().zip(&next) {
            *e = decay * *e + (1.0 - decay) * p;
        }
        state.history.push(LossRecord { step: t, loss: value });
        state.step += 1;
        if state.step.is_multiple_of(500) {
            log::info!("step {}: loss {:.5} (L_α {:.5}, L_C {:.5})", state.step, value.total, value.l_alpha, value.l_c);
        }
        if config.checkpoint_every > 0 && state.step.is_multiple_of(config.checkpoint_every) {
            on_checkpoint(state)?;
        }
    }
    Ok(())
}

/// Mean loss of `net` over the whole feature set under `rounds` fixed noise
/// draws, a low-variance estimate for comparing networks.
pub fn evaluate_loss(
    net: &Denoiser,
    features: ArrayView2<f64>,
    edm: &EdmConfig,
    slopes: &[f64],
    seed: u64,
    rounds: u64,
) -> Result<LossValue> {
    if rounds == 0 {
        return Err(Error::InvalidArgument("need at least one evaluation round".into()));
    }
    let (n, d) = features.dim();
    let mut acc = LossValue { total: 0.0, l_alpha: 0.0, l_c: 0.0 };
    for k in 0..rounds {
        let mut rng = stream(seed, Purpose::LossEvaluation, k);
        let draws = NoiseDraws::sample(n, d, edm, &mut rng);
        let v = loss(net, features, &draws, edm, slopes)?;
        acc.total += v.total;
        acc.l_alpha += v.l_alpha;
        acc.l_c += v.l_c;
    }
    let r = rounds as f64;
    Ok(LossValue {
        total: acc.total / r,
        l_alpha: acc.l_alpha / r,
        l_c: acc.l_c / r,
    })
}
