use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Noise distribution, sampling schedule and loss mix.
#[derive(Debug, Clone, PartialEq)]
pub struct EdmConfig {
    pub p_mean: f64,
    pub p_std: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    /// Number of sampling noise levels T.
    pub steps: usize,
    pub sigma_data: f64,
    /// Weight of the coefficient-space term; 0 trains on the feature loss only.
    pub lambda: f64,
}

impl Default for EdmConfig {
    fn default() -> Self {
        EdmConfig {
            p_mean: -1.2,
            p_std: 1.2,
            sigma_min: 0.002,
            sigma_max: 80.0,
            rho: 5.0,
            steps: 64,
            sigma_data: 0.5,
            lambda: 0.5,
        }
    }
}

impl EdmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite()) {
            return bad(format!(
                "need 0 < sigma_min < sigma_max, got {} and {}",
                self.sigma_min, self.sigma_max
            ));
        }
        if self.steps < 2 {
            return bad(format!("need at least 2 sampling steps, got {}", self.steps));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(self.sigma_data > 0.0 && self.sigma_data.is_finite()) {
            return bad(format!("sigma_data must be positive, got {}", self.sigma_data));
        }
        if !(self.rho > 0.0 && self.p_std > 0.0 && self.p_mean.is_finite() && self.p_std.is_finite()) {
            return bad("rho and p_std must be positive and p_mean finite".into());
        }
        Ok(())
    }
}

/// Descending noise levels `σ_0 = σ_max, …, σ_{T−1} = σ_min` followed by a terminal 0.
pub fn sigma_schedule(config: &EdmConfig) -> Result<Vec<f64>> {
    config.validate()?;
    let t = config.steps;
    let inv = 1.0 / config.rho;
    let (hi, lo) = (config.sigma_max.powf(inv), config.sigma_min.powf(inv));
    let mut out: Vec<f64> = (0..t)
        .map(|i| (hi + (i as f64 / (t - 1) as f64) * (lo - hi)).powf(config.rho))
        .collect();
    // Pin the endpoints against rounding in the power round trip.
    out[0] = config.sigma_max;
    out[t - 1] = config.sigma_min;
    out.push(0.0);
    Ok(out)
}

/// Input/output scalings of the preconditioned denoiser at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preconditioning {
    pub c_skip: f64,
    pub c_out: f64,
    pub c_in: f64,
    pub c_noise: f64,
}

impl Preconditioning {
    pub fn new(sigma: f64, sigma_data: f64) -> Self {
        let s2 = sigma * sigma;
        let d2 = sigma_data * sigma_data;
        let norm = (s2 + d2).sqrt();
        Preconditioning {
            c_skip: d2 / (s2 + d2),
            c_out: sigma * sigma_data / norm,
            c_in: 1.0 / norm,
            c_noise: sigma.ln() / 4.0,
        }
    }
}

/// Per-sample loss weight `(σ² + σ_d²) / (σ σ_d)²`.
pub fn loss_weight(sigma: f64, sigma_data: f64) -> f64 {
    (sigma * sigma + sigma_data * sigma_data) / (sigma * sigma_data).powi(2)
}

/// Population standard deviation over all entries of the feature matrix.
pub fn estimate_sigma_data(features: ArrayView2<f64>) -> Result<f64> {
    let n = features.len();
    if n == 0 {
        return Err(Error::Empty("no features to estimate sigma_data from".into()));
    }
    let mean = features.iter().sum::<f64>() / n as f64;
    let var = features.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let sd = var.sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "features have no spread (std = {sd}); cannot set sigma_data"
        )));
    }
    Ok(sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        let s = sigma_schedule(&EdmConfig::default()).unwrap();
        assert_eq!(s.len(), 65);
        assert_eq!((s[0], s[63], s[64]), (80.0, 0.002, 0.0));
        assert!(s.windows(2).all(|w| w[0] > w[1]));
        let two = EdmConfig { steps: 2, ..EdmConfig::default() };
        assert_eq!(sigma_schedule(&two).unwrap(), vec![80.0, 0.002, 0.0]);
    }

    #[test]
    fn preconditioning_at_sigma_data() {
        let p = Preconditioning::new(0.7, 0.7);
        assert!((p.c_skip - 0.5).abs() < 1e-15);
        assert!((p.c_in - 1.0 / (0.7 * 2f64.sqrt())).abs() < 1e-15);
        let tiny = Preconditioning::new(1e-12, 0.5);
        assert!((tiny.c_skip - 1.0).abs() < 1e-15 && tiny.c_out < 1e-11);
    }

    #[test]
    fn invalid_configs() {
        let base = EdmConfig::default();
        assert!(EdmConfig { steps: 1, ..base.clone() }.validate().is_err());
        assert!(EdmConfig { lambda: 1.5, ..base.clone() }.validate().is_err());
        assert!(EdmConfig { sigma_min: 90.0, ..base.clone() }.validate().is_err());
        assert!(EdmConfig { sigma_data: 0.0, ..base }.validate().is_err());
    }
}
