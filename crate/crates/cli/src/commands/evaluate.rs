//! Distribution metrics of generated meshes against a reference set.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{ensure, Result};
use clap::Args;
use forge_core::geometry::TriangleMesh;
use forge_core::metrics::{cross_chamfer, evaluate as evaluate_sets, EvalReport};

use super::{sample_point_sets, write_text};
use crate::config::PipelineConfig;
use crate::workspace::{list_meshes, load_mesh, read_ids, Workspace};

#[derive(Debug, Clone, Default, Args)]
pub struct EvaluateArgs {
    /// Directory of generated OBJ meshes; defaults to the workspace samples.
    #[arg(long)]
    pub generated: Option<PathBuf>,
    /// Directory of reference OBJ meshes; defaults to the cluster
    /// representatives, or the whole corpus when no clustering has been run.
    #[arg(long)]
    pub reference: Option<PathBuf>,
}

pub fn run(cfg: &PipelineConfig, ws: &Workspace, args: &EvaluateArgs) -> Result<()> {
    let report = evaluate(cfg, ws, args)?;
    println!("{report}");
    Ok(())
}

fn load_dir(dir: &Path) -> Result<Vec<(String, TriangleMesh)>> {
    let listing = list_meshes(dir)?;
    ensure!(!listing.is_empty(), "no OBJ meshes in {}", dir.display());
    listing.iter().map(|(id, p)| Ok((id.clone(), load_mesh(id, p)?))).collect()
}

fn load_reference(cfg: &PipelineConfig, ws: &Workspace, args: &EvaluateArgs) -> Result<Vec<(String, TriangleMesh)>> {
    if let Some(dir) = &args.reference {
        return load_dir(dir);
    }
    if !ws.ids_file().exists() {
        return load_dir(&cfg.paths.corpus);
    }
    let corpus: BTreeMap<String, PathBuf> = list_meshes(&cfg.paths.corpus)?;
    read_ids(&ws.ids_file())?
        .into_iter()
        .map(|id| {
            let path = corpus
                .get(&id)
                .ok_or_else(|| anyhow::anyhow!("reference mesh {id} not found in {}", cfg.paths.corpus.display()))?;
            let mesh = load_mesh(&id, path)?;
            Ok((id, mesh))
        })
        .collect()
}

pub fn evaluate(cfg: &PipelineConfig, ws: &Workspace, args: &EvaluateArgs) -> Result<EvalReport> {
    let generated = load_dir(&args.generated.clone().unwrap_or_else(|| ws.dir("samples")))?;
    let reference = load_reference(cfg, ws, args)?;
    let pps = cfg.evaluate.points_per_shape;
    log::info!("evaluating {} generated against {} reference meshes", generated.len(), reference.len());
    let gen_points = sample_point_sets(&generated, pps, cfg.seed)?;
    let ref_points = sample_point_sets(&reference, pps, cfg.seed)?;
    let report = evaluate_sets(&gen_points, &ref_points, cfg.evaluate.jsd_resolution, pps, cfg.seed)?;

    ws.create()?;
    let cross = cross_chamfer(&gen_points, &ref_points)?;
    let mut csv = String::from("generated,nearest_reference,chamfer\n");
    for ((id, _), row) in generated.iter().zip(&cross) {
        let (j, d) = row
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (j, &d)| if d < best.1 { (j, d) } else { best });
        writeln!(csv, "{id},{},{d:e}", reference[j].0)?;
    }
    write_text(&ws.report("novelty.csv"), &csv)?;
    write_text(&ws.report("eval.txt"), &format!("{report}\n\n{}", report.to_key_value()))?;
    Ok(report)
}
