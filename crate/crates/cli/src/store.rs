//! Bundle layouts for the basis store, feature file and training checkpoints.

use std::path::Path;

use anyhow::{ensure, Context, Result};
use forge_core::diffusion::{AdamState, Denoiser, LossRecord, LossValue, NetworkConfig, TrainState};
use forge_core::spectral::{NormalizationParams, SpectralBasis};
use nalgebra::DMatrix;

use crate::container::{Bundle, Tensor};

/// Spectral basis plus the feature normalization it was fitted with.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisStore {
    pub basis: SpectralBasis,
    pub normalization: NormalizationParams,
    /// Every singular value above the rank floor, not just the kept ones.
    pub spectrum: Vec<f64>,
    pub padding: usize,
}

impl BasisStore {
    pub fn basis_id(&self) -> String {
        self.basis.basis_id()
    }

    pub fn resolution(&self) -> Result<usize> {
        self.basis.source_resolution.context("basis store lacks a source resolution")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let b = &self.basis;
        let mut bundle = Bundle::default();
        bundle.set_meta("basis_id", self.basis_id());
        bundle.set_meta("coarse_dims", join(&b.coarse_dims));
        bundle.set_meta("n_samples", b.n_samples);
        bundle.set_meta("padding", self.padding);
        if let Some(r) = b.source_resolution {
            bundle.set_meta("resolution", r);
        }
        if let Some(f) = &b.filter {
            bundle.set_meta("filter", f);
        }
        bundle.push("v", matrix_tensor(&b.v)?);
        bundle.push("singular_values", Tensor::vector(b.singular_values.clone()));
        bundle.push("spectrum", Tensor::vector(self.spectrum.clone()));
        bundle.push("alpha_min", Tensor::vector(self.normalization.alpha_min.clone()));
        bundle.push("alpha_max", Tensor::vector(self.normalization.alpha_max.clone()));
        bundle.write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bundle = Bundle::read(path)?;
        let dims = split::<usize>(bundle.meta("coarse_dims")?)?;
        ensure!(dims.len() == 3, "coarse_dims must have three entries");
        let basis = SpectralBasis {
            v: tensor_matrix(bundle.get("v")?)?,
            singular_values: bundle.get("singular_values")?.to_f64(),
            coarse_dims: [dims[0], dims[1], dims[2]],
            n_samples: bundle.meta_parse("n_samples")?,
            source_resolution: bundle.meta("resolution").ok().map(str::parse).transpose()?,
            filter: bundle.meta("filter").ok().map(String::from),
        };
        let normalization = NormalizationParams::from_extremes(
            bundle.get("alpha_min")?.to_f64(),
            bundle.get("alpha_max")?.to_f64(),
        )?;
        let store = BasisStore {
            normalization,
            spectrum: bundle.get("spectrum")?.to_f64(),
            padding: bundle.meta_parse("padding")?,
            basis,
        };
        ensure!(
            store.basis_id() == bundle.meta("basis_id")?,
            "basis store {} does not match its recorded basis_id",
            path.display()
        );
        ensure!(store.normalization.dim() == store.basis.rank(), "normalization and basis rank disagree");
        Ok(store)
    }
}

/// Normalized training features with their mesh ids.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub basis_id: String,
    pub ids: Vec<String>,
    pub alpha_hat: DMatrix<f64>,
}

impl FeatureStore {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bundle = Bundle::default();
        bundle.set_meta("basis_id", &self.basis_id);
        bundle.set_meta("ids", self.ids.join("\t"));
        bundle.push("alpha_hat", matrix_tensor(&self.alpha_hat)?);
        bundle.write(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bundle = Bundle::read(path)?;
        let alpha_hat = tensor_matrix(bundle.get("alpha_hat")?)?;
        let ids: Vec<String> = bundle.meta("ids")?.split('\t').map(String::from).collect();
        ensure!(ids.len() == alpha_hat.nrows(), "feature file has {} ids for {} rows", ids.len(), alpha_hat.nrows());
        Ok(FeatureStore {
            basis_id: bundle.meta("basis_id")?.to_string(),
            ids,
            alpha_hat,
        })
    }
}

/// Checkpoint metadata that travels with the training state.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointInfo {
    pub basis_id: String,
    pub sigma_data: f64,
}

pub fn write_checkpoint(path: &Path, state: &TrainState, info: &CheckpointInfo) -> Result<()> {
    let cfg = state.net.config();
    let mut bundle = Bundle::default();
    bundle.set_meta("basis_id", &info.basis_id);
    bundle.set_meta("sigma_data", format!("{:e}", info.sigma_data));
    bundle.set_meta("dim", state.net.dim());
    bundle.set_meta("hidden_layers", cfg.hidden_layers);
    bundle.set_meta("width", cfg.width);
    bundle.set_meta("embedding", cfg.embedding);
    bundle.set_meta("step", state.step);
    bundle.set_meta("seed", state.seed);
    bundle.set_meta("adam_step", state.adam.step);
    bundle.push("params", Tensor::vector(state.net.params().to_vec()));
    bundle.push("ema", Tensor::vector(state.ema.clone()));
    bundle.push("adam_m", Tensor::vector(state.adam.m.clone()));
    bundle.push("adam_v", Tensor::vector(state.adam.v.clone()));
    let h = &state.history;
    bundle.push("history_step", Tensor::vector(h.iter().map(|r| r.step as f64).collect()));
    bundle.push("history_total", Tensor::vector(h.iter().map(|r| r.loss.total).collect()));
    bundle.push("history_l_alpha", Tensor::vector(h.iter().map(|r| r.loss.l_alpha).collect()));
    bundle.push("history_l_c", Tensor::vector(h.iter().map(|r| r.loss.l_c).collect()));
    bundle.write(path)
}

pub fn read_checkpoint(path: &Path) -> Result<(TrainState, CheckpointInfo)> {
    let bundle = Bundle::read(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    let dim: usize = bundle.meta_parse("dim")?;
    let config = NetworkConfig {
        hidden_layers: bundle.meta_parse("hidden_layers")?,
        width: bundle.meta_parse("width")?,
        embedding: bundle.meta_parse("embedding")?,
    };
    let net = Denoiser::from_params(dim, config, bundle.get("params")?.to_f64())?;
    let steps = bundle.get("history_step")?.to_f64();
    let total = bundle.get("history_total")?.to_f64();
    let l_alpha = bundle.get("history_l_alpha")?.to_f64();
    let l_c = bundle.get("history_l_c")?.to_f64();
    ensure!(
        total.len() == steps.len() && l_alpha.len() == steps.len() && l_c.len() == steps.len(),
        "checkpoint loss history columns differ in length"
    );
    let history = (0..steps.len())
        .map(|i| LossRecord {
            step: steps[i] as u64,
            loss: LossValue {
                total: total[i],
                l_alpha: l_alpha[i],
                l_c: l_c[i],
            },
        })
        .collect();
    let state = TrainState {
        net,
        ema: bundle.get("ema")?.to_f64(),
        adam: AdamState {
            m: bundle.get("adam_m")?.to_f64(),
            v: bundle.get("adam_v")?.to_f64(),
            step: bundle.meta_parse("adam_step")?,
        },
        step: bundle.meta_parse("step")?,
        seed: bundle.meta_parse("seed")?,
        history,
    };
    state.validate()?;
    let info = CheckpointInfo {
        basis_id: bundle.meta("basis_id")?.to_string(),
        sigma_data: bundle.meta_parse("sigma_data")?,
    };
    Ok((state, info))
}

fn matrix_tensor(m: &DMatrix<f64>) -> Result<Tensor> {
    let row_major: Vec<f64> = (0..m.nrows()).flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect();
    Tensor::f64(&[m.nrows(), m.ncols()], row_major)
}

fn tensor_matrix(t: &Tensor) -> Result<DMatrix<f64>> {
    let dims = t.dims_usize();
    ensure!(dims.len() == 2, "expected a matrix, got dims {dims:?}");
    Ok(DMatrix::from_row_slice(dims[0], dims[1], &t.to_f64()))
}

fn join(values: &[usize]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn split<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    Ok(s.split(',').map(|p| p.trim().parse()).collect::<Result<_, _>>()?)
}
