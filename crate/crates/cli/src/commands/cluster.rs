//! Corpus reduction: Chamfer distances, diffusion-map embedding, K-Means and
//! one representative per cluster.

use std::fmt::Write as _;

use anyhow::{Context, Result};
use forge_core::clustering::{diffusion_map, kmeans, pairwise_chamfer, select_representatives, Bandwidth};
use nalgebra::DMatrix;

use super::{sample_point_sets, write_text};
use crate::config::PipelineConfig;
use crate::container::{write_tensor, Tensor};
use crate::workspace::{list_meshes, load_mesh, Workspace};
use crate::UsageError;

pub struct ClusterOutcome {
    pub ids: Vec<String>,
    pub representatives: Vec<String>,
    pub assignments: Vec<usize>,
}

pub fn run(cfg: &PipelineConfig, ws: &Workspace) -> Result<()> {
    let out = cluster(cfg, ws)?;
    println!(
        "clustered {} meshes into {} clusters; representatives written to {}",
        out.ids.len(),
        out.representatives.len(),
        ws.ids_file().display()
    );
    Ok(())
}

pub fn cluster(cfg: &PipelineConfig, ws: &Workspace) -> Result<ClusterOutcome> {
    let corpus = list_meshes(&cfg.paths.corpus)?;
    let k = cfg.cluster.n_clusters;
    if k > corpus.len() {
        return Err(UsageError(format!(
            "n_clusters = {k} exceeds the {} meshes in {}",
            corpus.len(),
            cfg.paths.corpus.display()
        ))
        .into());
    }
    ws.create()?;
    let meshes = corpus
        .iter()
        .map(|(id, path)| Ok((id.clone(), load_mesh(id, path)?)))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<String> = meshes.iter().map(|(id, _)| id.clone()).collect();
    let n = ids.len();
    log::info!("sampling {} points on each of {n} meshes", cfg.cluster.points_per_shape);
    let points = sample_point_sets(&meshes, cfg.cluster.points_per_shape, cfg.seed)?;
    log::info!("computing {} pairwise Chamfer distances", n * (n - 1) / 2);
    let distances = pairwise_chamfer(&points)?;
    write_tensor(&ws.dir("clusters").join("distances.spdt"), &Tensor::f64(&[n, n], distances.as_slice().to_vec())?)?;

    let (coords, assignments, reps) = if n == 1 {
        (DMatrix::zeros(1, 0), vec![0], vec![0])
    } else {
        let eigenpairs = cfg.cluster.eigenpairs.min(n - 1);
        let embedding = diffusion_map(&distances, eigenpairs, Bandwidth::Median).context("diffusion map")?;
        if embedding.degenerate {
            log::warn!("all shapes coincide; the embedding is degenerate");
        }
        let km = kmeans(&embedding.coords, k, cfg.seed)?;
        log::info!("k-means converged after {} iterations, inertia {:.6e}", km.iterations, km.inertia);
        let reps = select_representatives(&embedding.coords, &km.assignments, &km.centroids)?;
        (embedding.coords, km.assignments, reps)
    };
    let row_major: Vec<f64> = (0..coords.nrows()).flat_map(|i| coords.row(i).iter().copied().collect::<Vec<_>>()).collect();
    write_tensor(
        &ws.dir("clusters").join("embedding.spdt"),
        &Tensor::f64(&[coords.nrows(), coords.ncols()], row_major)?,
    )?;

    let representatives: Vec<String> = reps.iter().map(|&i| ids[i].clone()).collect();
    write_text(&ws.ids_file(), &(representatives.join("\n") + "\n"))?;
    let mut csv = String::from("id,cluster,representative\n");
    for (i, id) in ids.iter().enumerate() {
        let c = assignments[i];
        writeln!(csv, "{id},{c},{}", u8::from(reps[c] == i))?;
    }
    write_text(&ws.dir("clusters").join("assignments.csv"), &csv)?;
    Ok(ClusterOutcome {
        ids,
        representatives,
        assignments,
    })
}
