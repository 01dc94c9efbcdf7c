//! Feature sampling and mesh extraction.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use forge_core::diffusion::sample;
use forge_core::geometry::{marching_cubes, write_obj_string, SdfGrid, TriangleMesh};
use forge_core::spectral::{decode, denormalize_features};
use forge_core::wavelet::dwt3_inverse_coarse_only;
use rayon::prelude::*;

use super::{clear_prefixed, write_text};
use crate::config::PipelineConfig;
use crate::store::{read_checkpoint, BasisStore, FeatureStore};
use crate::workspace::Workspace;

/// Isolevel of the surface in limited-SDF space.
pub const SURFACE_LEVEL: f64 = -0.5;

#[derive(Debug, Clone, Default, Args)]
pub struct GenerateArgs {
    /// Number of shapes; defaults to the configured count.
    #[arg(long)]
    pub count: Option<usize>,
    /// Checkpoint to sample from; defaults to the final checkpoint.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Decodes this row of the training features instead of sampling.
    #[arg(long)]
    pub from_training_row: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct GenerateOutcome {
    /// Written OBJ paths, `None` where the extracted surface was empty.
    pub meshes: Vec<Option<PathBuf>>,
}

impl GenerateOutcome {
    pub fn non_empty(&self) -> usize {
        self.meshes.iter().filter(|m| m.is_some()).count()
    }
}

pub fn run(cfg: &PipelineConfig, ws: &Workspace, args: &GenerateArgs) -> Result<()> {
    let out = generate(cfg, ws, args)?;
    println!(
        "generated {} meshes ({} empty) in {}",
        out.meshes.len(),
        out.meshes.len() - out.non_empty(),
        ws.dir("samples").display()
    );
    Ok(())
}

/// Maps normalized features back to a mesh in the unit box.
pub fn features_to_mesh(alpha_hat: &[f64], store: &BasisStore, cfg: &PipelineConfig) -> Result<TriangleMesh> {
    let alpha = denormalize_features(alpha_hat, &store.normalization)?;
    let coarse = decode(&alpha, &store.basis)?;
    let res = store.resolution()?;
    let filter = cfg.filter()?;
    if let Some(f) = &store.basis.filter {
        ensure!(f == filter.name, "basis was fitted with filter {f}, config names {}", filter.name);
    }
    let volume = dwt3_inverse_coarse_only(&coarse, [res; 3], &filter)?;
    let grid = SdfGrid::from_volume(volume, store.padding, true)?;
    Ok(marching_cubes(&grid, SURFACE_LEVEL)?)
}

pub fn generate(cfg: &PipelineConfig, ws: &Workspace, args: &GenerateArgs) -> Result<GenerateOutcome> {
    let store = BasisStore::read(&ws.basis_file()).context("loading basis store; run encode first")?;
    let d = store.basis.rank();
    let rows: Vec<Vec<f64>> = if let Some(r) = args.from_training_row {
        let features = FeatureStore::read(&ws.features_file())?;
        ensure!(features.basis_id == store.basis_id(), "feature file does not belong to the basis store");
        ensure!(r < features.ids.len(), "training row {r} out of range (n = {})", features.ids.len());
        log::info!("decoding training row {r} ({})", features.ids[r]);
        vec![features.alpha_hat.row(r).iter().copied().collect()]
    } else {
        let path = args.checkpoint.clone().unwrap_or_else(|| ws.final_checkpoint());
        let (state, info) = read_checkpoint(&path)?;
        if state.net.dim() != d {
            bail!("checkpoint {} has feature dimension d = {} but the basis has d = {d}", path.display(), state.net.dim());
        }
        if info.basis_id != store.basis_id() {
            bail!("checkpoint was trained against basis {}, the basis store holds {}", info.basis_id, store.basis_id());
        }
        let count = args.count.unwrap_or(cfg.generate.count);
        ensure!(count >= 1, "count must be positive");
        let edm = cfg.edm_config(info.sigma_data)?;
        let samples = sample(&state.ema_denoiser(), &edm, count, cfg.seed)?;
        samples.outer_iter().map(|r| r.to_vec()).collect()
    };

    ws.create()?;
    let dir = ws.dir("samples");
    clear_prefixed(&dir, "sample-")?;
    let meshes: Vec<Option<PathBuf>> = rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let mesh = features_to_mesh(row, &store, cfg).with_context(|| format!("sample {i}"))?;
            if mesh.is_empty() {
                return Ok(None);
            }
            let path = dir.join(format!("sample-{i:04}.obj"));
            write_text(&path, &write_obj_string(&mesh))?;
            Ok(Some(path))
        })
        .collect::<Result<_>>()?;

    let mut report = String::new();
    for (i, m) in meshes.iter().enumerate() {
        match m {
            Some(_) => writeln!(report, "sample-{i:04}=ok")?,
            None => {
                log::warn!("sample {i} produced an empty surface");
                writeln!(report, "sample-{i:04}=empty")?
            }
        }
    }
    write_text(&ws.report("generate.txt"), &report)?;
    Ok(GenerateOutcome { meshes })
}
