use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use super::edm::Preconditioning;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Shape of the dense denoiser body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub hidden_layers: usize,
    pub width: usize,
    /// Number of Fourier features of the noise level (even).
    pub embedding: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden_layers: 4,
            width: 1024,
            embedding: 64,
        }
    }
}

impl NetworkConfig {
    pub fn desk() -> Self {
        NetworkConfig {
            hidden_layers: 3,
            width: 256,
            embedding: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 || self.width == 0 {
            return Err(Error::InvalidArgument("network needs at least one non-empty hidden layer".into()));
        }
        if self.embedding == 0 || !self.embedding.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "noise embedding width must be a positive even number, got {}",
                self.embedding
            )));
        }
        Ok(())
    }

    /// `(out, in)` of every dense layer for a `dim`-dimensional feature space.
    pub fn layer_shapes(&self, dim: usize) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut fan_in = dim + self.embedding;
        for _ in 0..self.hidden_layers {
            shapes.push((self.width, fan_in));
            fan_in = self.width;
        }
        shapes.push((dim, fan_in));
        shapes
    }

    pub fn param_count(&self, dim: usize) -> usize {
        self.layer_shapes(dim).iter().map(|(o, i)| o * i + o).sum()
    }
}

/// Geometric frequencies from 0.25 to 16.
fn frequencies(count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![1.0];
    }
    let (lo, hi) = (0.25f64.ln(), 16f64.ln());
    (0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

pub(crate) fn silu(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

pub(crate) fn silu_grad(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s * (1.0 + z * (1.0 - s))
}

/// Activations kept from a forward pass for the backward pass.
pub(crate) struct ForwardCache {
    /// Input to each layer.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
}

/// Fully connected network `F_θ` with flat parameter storage.
///
/// Parameters are laid out layer by layer, weight matrix (row-major,
/// out × in) followed by its bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    dim: usize,
    config: NetworkConfig,
    shapes: Vec<(usize, usize)>,
    freqs: Vec<f64>,
    params: Vec<f64>,
}

impl Denoiser {
    /// Uniform `±1/√fan_in` initialization from the weight-init stream of `seed`.
    pub fn new(dim: usize, config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(dim, config)?;
        let mut rng = stream(seed, Purpose::WeightInit, 0);
        let mut offset = 0;
        for &(o, i) in &net.shapes {
            let bound = 1.0 / (i as f64).sqrt();
            for p in &mut net.params[offset..offset + o * i + o] {
                *p = rng.random_range(-bound..bound);
            }
            offset += o * i + o;
        }
        Ok(net)
    }

    pub fn zeros(dim: usize, config: NetworkConfig) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("feature dimension must be positive".into()));
        }
        config.validate()?;
        let shapes = config.layer_shapes(dim);
        let count = config.param_count(dim);
        Ok(Denoiser {
            dim,
            freqs: frequencies(config.embedding / 2),
            config,
            shapes,
            params: vec![0.0; count],
        })
    }

    pub fn from_params(dim: usize, config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(dim, config)?;
        if params.len() != net.params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters given, network needs {}",
                params.len(),
                net.params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn layer_shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer(&self, offset: usize, (o, i): (usize, usize)) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let w = ArrayView2::from_shape((o, i), &self.params[offset..offset + o * i]).expect("layer shape");
        let b = ArrayView1::from(&self.params[offset + o * i..offset + o * i + o]);
        (w, b)
    }

    /// Network input rows `[c_in·x, cos(f·c_noise), sin(f·c_noise)]`.
    pub(crate) fn input(&self, x: ArrayView2<f64>, precond: &[Preconditioning]) -> Array2<f64> {
        let b = x.nrows();
        let e = self.freqs.len();
        let mut input = Array2::zeros((b, self.dim + 2 * e));
        for r in 0..b {
            let p = precond[r];
            for j in 0..self.dim {
                input[(r, j)] = p.c_in * x[(r, j)];
            }
            for (k, f) in self.freqs.iter().enumerate() {
                input[(r, self.dim + k)] = (f * p.c_noise).cos();
                input[(r, self.dim + e + k)] = (f * p.c_noise).sin();
            }
        }
        input
    }

    pub(crate) fn forward(&self, input: Array2<f64>) -> (Array2<f64>, ForwardCache) {
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.shapes.len()),
            pre: Vec::with_capacity(self.shapes.len() - 1),
        };
        let mut a = input;
        let mut offset = 0;
        let last = self.shapes.len() - 1;
        for (l, &shape) in self.shapes.iter().enumerate() {
            let (w, bias) = self.layer(offset, shape);
            let z = a.dot(&w.t()) + bias;
            offset += shape.0 * shape.1 + shape.0;
            cache.inputs.push(a);
            if l == last {
                return (z, cache);
            }
            a = z.mapv(silu);
            cache.pre.push(z);
        }
        unreachable!("network has an output layer")
    }

    /// Gradient of a scalar with respect to the parameters, given its
    /// gradient with respect to the network output.
    pub(crate) fn backward(&self, cache: &ForwardCache, grad_out: Array2<f64>) -> Vec<f64> {
        let mut grad = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(self.shapes.len());
        let mut offset = 0;
        for &(o, i) in &self.shapes {
            offsets.push(offset);
            offset += o * i + o;
        }
        let mut dz = grad_out;
        for l in (0..self.shapes.len()).rev() {
            let (o, i) = self.shapes[l];
            let off = offsets[l];
            let dw = dz.t().dot(&cache.inputs[l]);
            grad[off..off + o * i].copy_from_slice(dw.as_slice().expect("standard layout"));
            let db = dz.sum_axis(Axis(0));
            grad[off + o * i..off + o * i + o].copy_from_slice(db.as_slice().expect("contiguous"));
            if l > 0 {
                let (w, _) = self.layer(off, (o, i));
                let mut da = dz.dot(&w);
                da.zip_mut_with(&cache.pre[l - 1], |g, &z| *g *= silu_grad(z));
                dz = da;
            }
        }
        grad
    }

    /// Preconditioned denoiser `D(x; σ)` applied row-wise with per-row noise levels.
    pub fn denoise_batch(&self, x: ArrayView2<f64>, sigmas: &[f64], sigma_data: f64) -> Result<Array2<f64>> {
        if x.ncols() != self.dim || sigmas.len() != x.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "batch {:?} with {} noise levels for a {}-dimensional denoiser",
                x.dim(),
                sigmas.len(),
                self.dim
            )));
        }
        if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0)) {
            return Err(Error::InvalidArgument(format!("noise level {s} must be positive")));
        }
        let precond: Vec<Preconditioning> = sigmas.iter().map(|&s| Preconditioning::new(s, sigma_data)).collect();
        let (f, _) = self.forward(self.input(x, &precond));
        let mut out = Array2::zeros(x.dim());
        for r in 0..x.nrows() {
            let p = precond[r];
            for j in 0..self.dim {
                out[(r, j)] = p.c_skip * x[(r, j)] + p.c_out * f[(r, j)];
            }
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step: 0,
                message: "denoiser produced a non-finite value".into(),
            });
        }
        Ok(out)
    }

    /// Single-vector convenience wrapper around [`Denoiser::denoise_batch`].
    pub fn denoise(&self, x: &[f64], sigma: f64, sigma_data: f64) -> Result<Vec<f64>> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("denoiser input".into()));
        }
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.denoise_batch(view, &[sigma], sigma_data)?.slice(s![0, ..]).to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            hidden_layers: 2,
            width: 8,
            embedding: 4,
        }
    }

    #[test]
    fn param_layout() {
        let c = tiny();
        assert_eq!(c.layer_shapes(3), vec![(8, 7), (8, 8), (3, 8)]);
        assert_eq!(Denoiser::new(3, c, 1).unwrap().num_params(), 8 * 7 + 8 + 8 * 8 + 8 + 3 * 8 + 3);
    }

    #[test]
    fn zero_network_is_skip_only() {
        let net = Denoiser::zeros(3, tiny()).unwrap();
        let x = [0.3, -1.0, 2.0];
        let p = Preconditioning::new(0.9, 0.5);
        let out = net.denoise(&x, 0.9, 0.5).unwrap();
        for j in 0..3 {
            assert_eq!(out[j], p.c_skip * x[j]);
        }
    }

    #[test]
    fn silu_derivative_matches_difference() {
        for &z in &[-3.0, -0.2, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (silu(z + h) - silu(z - h)) / (2.0 * h);
            assert!((fd - silu_grad(z)).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let net = Denoiser::new(2, tiny(), 0).unwrap();
        assert!(net.denoise(&[0.0, 0.0], 0.0, 0.5).is_err());
        assert!(net.denoise(&[f64::NAN, 0.0], 1.0, 0.5).is_err());
        assert!(net.denoise(&[0.0], 1.0, 0.5).is_err());
        assert!(Denoiser::from_params(2, tiny(), vec![0.0; 3]).is_err());
    }
}
