//! Mesh → limited SDF → coarse wavelet band → spectral features.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use forge_core::geometry::limit_sdf;
use forge_core::spectral::{decode, fit_svd, flatten, normalize_features, stack_coefficients, truncation_error};
use forge_core::wavelet::dwt3_forward;
use forge_core::Volume;
use rayon::prelude::*;

use super::write_text;
use crate::config::PipelineConfig;
use crate::store::{BasisStore, FeatureStore};
use crate::workspace::{list_meshes, read_ids, read_mesh_bytes, Workspace};

#[derive(Debug, Clone, Default, Args)]
pub struct EncodeArgs {
    /// Mesh ids to encode; defaults to the cluster representatives, or the
    /// whole corpus when no clustering has been run.
    #[arg(long)]
    pub ids: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct EncodeOutcome {
    pub ids: Vec<String>,
    pub rank: usize,
    /// Per-shape ‖c − V Vᵀ c‖ / ‖c‖ in coefficient space.
    pub relative_residuals: Vec<f64>,
    /// Σ‖c − V Vᵀ c‖² over all shapes.
    pub residual_sq: f64,
    /// Σ_{i>d} σ_i², the Eckart–Young prediction of `residual_sq`.
    pub predicted_sq: f64,
    pub compression: String,
}

pub fn run(cfg: &PipelineConfig, ws: &Workspace, args: &EncodeArgs) -> Result<()> {
    let out = encode(cfg, ws, args)?;
    let max = out.relative_residuals.iter().copied().fold(0.0, f64::max);
    println!("encoded {} meshes at rank {}", out.ids.len(), out.rank);
    println!("max relative residual = {max:e}");
    println!("residual = {:e} (predicted {:e})", out.residual_sq, out.predicted_sq);
    println!("{}", out.compression);
    Ok(())
}

fn resolve_ids(cfg: &PipelineConfig, ws: &Workspace, args: &EncodeArgs) -> Result<Vec<String>> {
    if let Some(path) = &args.ids {
        return read_ids(path);
    }
    if ws.ids_file().exists() {
        return read_ids(&ws.ids_file());
    }
    log::info!("no cluster representatives found; encoding the whole corpus");
    Ok(list_meshes(&cfg.paths.corpus)?.into_keys().collect())
}

pub fn encode(cfg: &PipelineConfig, ws: &Workspace, args: &EncodeArgs) -> Result<EncodeOutcome> {
    let corpus = list_meshes(&cfg.paths.corpus)?;
    let ids = resolve_ids(cfg, ws, args)?;
    if ids.is_empty() {
        bail!("no meshes to encode");
    }
    ws.create()?;
    let filter = cfg.filter()?;
    let (res, pad) = (cfg.encode.resolution, cfg.encode.padding);
    log::info!("encoding {} meshes at {res}^3", ids.len());

    let results: Vec<Result<Volume>> = ids
        .par_iter()
        .map(|id| {
            let Some(path) = corpus.get(id) else {
                bail!("mesh {id} not found in {}", cfg.paths.corpus.display());
            };
            let grid = ws.cached_sdf(id, &read_mesh_bytes(id, path)?, res, pad)?;
            let limited = limit_sdf(&grid)?;
            Ok(dwt3_forward(&limited.values, &filter)?.coarse)
        })
        .collect();
    let mut coarse = Vec::with_capacity(ids.len());
    let mut failures = Vec::new();
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(c) => coarse.push(c),
            Err(e) => failures.push(format!("{id}: {e:#}")),
        }
    }
    if !failures.is_empty() {
        bail!("{} of {} meshes failed:\n  {}", failures.len(), ids.len(), failures.join("\n  "));
    }

    let x = stack_coefficients(&coarse, ids.clone())?;
    let mut fit = fit_svd(&x, cfg.encode.d)?;
    fit.basis.source_resolution = Some(res);
    fit.basis.filter = Some(filter.name.to_string());
    let rank = fit.basis.rank();
    let (alpha_hat, normalization) = normalize_features(&fit.features.alpha)?;

    let mut relative_residuals = Vec::with_capacity(ids.len());
    let mut residual_sq = 0.0;
    for i in 0..x.rows() {
        let alpha: Vec<f64> = fit.features.alpha.row(i).iter().copied().collect();
        let recon = flatten(&decode(&alpha, &fit.basis)?);
        let row = x.row(i);
        let err: f64 = row.iter().zip(&recon).map(|(a, b)| (a - b).powi(2)).sum();
        let norm: f64 = row.iter().map(|a| a * a).sum();
        residual_sq += err;
        relative_residuals.push(if norm > 0.0 { (err / norm).sqrt() } else { err.sqrt() });
    }
    let predicted_sq = truncation_error(&fit.spectrum, rank);

    let store = BasisStore {
        basis: fit.basis,
        normalization,
        spectrum: fit.spectrum,
        padding: pad,
    };
    store.write(&ws.basis_file())?;
    FeatureStore {
        basis_id: store.basis_id(),
        ids: ids.clone(),
        alpha_hat,
    }
    .write(&ws.features_file())?;

    let mut csv = String::from("id,relative_residual\n");
    for (id, r) in ids.iter().zip(&relative_residuals) {
        writeln!(csv, "{id},{r:e}")?;
    }
    write_text(&ws.report("encode-residuals.csv"), &csv)?;
    let compression = format!(
        "compression d/N^3 = {rank}/{res}^3 = {:e}",
        rank as f64 / (res as f64).powi(3)
    );
    let max = relative_residuals.iter().copied().fold(0.0, f64::max);
    let summary = format!(
        "basis_id={}\nn_samples={}\nrank={rank}\nrequested_rank={}\nresolution={res}\nfilter={}\nmax_relative_residual={max:e}\nresidual_sq={residual_sq:e}\npredicted_residual_sq={predicted_sq:e}\ncompression={rank}/{res}^3\ncompression_ratio={:e}\n",
        store.basis_id(),
        ids.len(),
        cfg.encode.d,
        filter.name,
        rank as f64 / (res as f64).powi(3),
    );
    write_text(&ws.report("encode.txt"), &summary)?;
    Ok(EncodeOutcome {
        ids,
        rank,
        relative_residuals,
        residual_sq,
        predicted_sq,
        compression,
    })
}
