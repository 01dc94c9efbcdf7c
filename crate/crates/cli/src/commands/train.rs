//! Denoiser training on the encoded features.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use forge_core::diffusion::{estimate_sigma_data, train as run_training, Denoiser, TrainState};
use ndarray::Array2;
use nalgebra::DMatrix;

use super::{clear_prefixed, write_text};
use crate::config::PipelineConfig;
use crate::store::{write_checkpoint, BasisStore, CheckpointInfo, FeatureStore};
use crate::workspace::Workspace;

pub fn run(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let state = train(cfg, ws)?;
    let tail = &state.history[state.history.len().saturating_sub(100)..];
    let mean = tail.iter().map(|r| r.loss.total).sum::<f64>() / tail.len().max(1) as f64;
    println!("trained {} steps; mean loss over the last {} steps = {mean:.6}", state.step, tail.len());
    println!("final checkpoint: {}", ws.final_checkpoint().display());
    Ok(())
}

pub fn to_array(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn(m.shape(), |(i, j)| m[(i, j)])
}

pub fn train(cfg: &PipelineConfig, ws: &Workspace) -> Result<TrainState> {
    let basis = BasisStore::read(&ws.basis_file()).context("loading basis store; run encode first")?;
    let features = FeatureStore::read(&ws.features_file()).context("loading features; run encode first")?;
    if features.basis_id != basis.basis_id() {
        bail!(
            "features were encoded against basis {} but the basis store holds {}; rerun encode",
            features.basis_id,
            basis.basis_id()
        );
    }
    ws.create()?;
    let alpha = to_array(&features.alpha_hat);
    let (n, d) = alpha.dim();
    let sigma_data = match cfg.edm.sigma_data {
        Some(s) => s,
        None => estimate_sigma_data(alpha.view())?,
    };
    let edm = cfg.edm_config(sigma_data)?;
    let mut tcfg = cfg.train_config();
    if !tcfg.with_replacement && tcfg.batch_size > n {
        log::warn!("batch size {} exceeds the {n} training rows; using {n}", tcfg.batch_size);
        tcfg.batch_size = n;
    }
    let slopes = basis.normalization.slopes();
    let net = Denoiser::new(d, cfg.network_config(), cfg.seed)?;
    log::info!("training {} parameters on {n}×{d} features, sigma_data = {sigma_data:.5}", net.num_params());
    let mut state = TrainState::new(net, cfg.seed);
    let info = CheckpointInfo {
        basis_id: basis.basis_id(),
        sigma_data,
    };

    let dir = ws.dir("checkpoints");
    clear_prefixed(&dir, "step-")?;
    clear_prefixed(&dir, "final")?;
    let mut last: Option<PathBuf> = None;
    let mut write_error: Option<anyhow::Error> = None;
    let outcome = run_training(&mut state, alpha.view(), &edm, &slopes, &tcfg, |s| {
        let path = ws.checkpoint_file(s.step);
        match write_checkpoint(&path, s, &info) {
            Ok(()) => {
                last = Some(path);
                Ok(())
            }
            Err(e) => {
                write_error = Some(e);
                Err(forge_core::Error::InvalidArgument("checkpoint write failed".into()))
            }
        }
    });
    if let Some(e) = write_error {
        return Err(e.context("writing checkpoint"));
    }
    write_loss_csv(ws, &state)?;
    if let Err(e) = outcome {
        let kept = last.map_or("none".to_string(), |p| p.display().to_string());
        return Err(anyhow::Error::new(e).context(format!("training aborted; last checkpoint: {kept}")));
    }
    write_checkpoint(&ws.final_checkpoint(), &state, &info)?;
    Ok(state)
}

fn write_loss_csv(ws: &Workspace, state: &TrainState) -> Result<()> {
    let mut csv = String::from("step,total,l_alpha,l_c\n");
    for r in &state.history {
        writeln!(csv, "{},{:e},{:e},{:e}", r.step, r.loss.total, r.loss.l_alpha, r.loss.l_c)?;
    }
    write_text(&ws.report("loss.csv"), &csv)
}
