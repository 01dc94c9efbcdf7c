//! Reconstruction of one mesh through the wavelet transform, with and without
//! its detail bands.

use std::path::PathBuf;

use anyhow::{ensure, Context, Result};
use clap::Args;
use forge_core::clustering::{chamfer_distance, KdTree};
use forge_core::geometry::{
    limit_sdf, marching_cubes, normalize_mesh, sample_surface_points, write_obj_string, Point3, SdfGrid,
};
use forge_core::rng::{derive_seed, Purpose};
use forge_core::wavelet::{dwt3_forward, dwt3_inverse, dwt3_inverse_coarse_only};

use super::generate::SURFACE_LEVEL;
use super::write_text;
use crate::config::PipelineConfig;
use crate::workspace::{read_mesh_bytes, Workspace};

#[derive(Debug, Clone, Args)]
pub struct RoundtripArgs {
    /// OBJ mesh to reconstruct.
    #[arg(long)]
    pub mesh: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundtripOutcome {
    pub spacing: f64,
    /// Squared-distance Chamfer of each reconstruction to the source.
    pub full_chamfer: f64,
    pub coarse_chamfer: f64,
    /// Sum of the two directed root-mean-square distances, in length units.
    pub full_distance: f64,
    pub coarse_distance: f64,
}

pub fn run(cfg: &PipelineConfig, ws: &Workspace, args: &RoundtripArgs) -> Result<()> {
    let out = roundtrip(cfg, ws, args)?;
    println!("spacing = {:e}", out.spacing);
    println!("full-band:   chamfer = {:e}, distance = {:e}", out.full_chamfer, out.full_distance);
    println!("coarse-only: chamfer = {:e}, distance = {:e}", out.coarse_chamfer, out.coarse_distance);
    Ok(())
}

/// `sqrt(mean_a min_b |a−b|²) + sqrt(mean_b min_a |a−b|²)`.
pub fn rms_chamfer(a: &[Point3], b: &[Point3]) -> f64 {
    let directed = |from: &[Point3], to: &[Point3]| {
        let tree = KdTree::build(to);
        let sum: f64 = from.iter().map(|&p| tree.nearest_distance_sq(p).unwrap_or(f64::INFINITY)).sum();
        (sum / from.len() as f64).sqrt()
    };
    directed(a, b) + directed(b, a)
}

pub fn roundtrip(cfg: &PipelineConfig, ws: &Workspace, args: &RoundtripArgs) -> Result<RoundtripOutcome> {
    let id = args
        .mesh
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("mesh")
        .to_string();
    let bytes = read_mesh_bytes(&id, &args.mesh)?;
    let source = crate::workspace::load_mesh(&id, &args.mesh)?;
    let source = normalize_mesh(&source)?;
    ws.create()?;
    let (res, pad) = (cfg.encode.resolution, cfg.encode.padding);
    let grid = limit_sdf(&ws.cached_sdf(&id, &bytes, res, pad)?)?;
    let filter = cfg.filter()?;
    let coeffs = dwt3_forward(&grid.values, &filter)?;
    let full = dwt3_inverse(&coeffs)?;
    let coarse = dwt3_inverse_coarse_only(&coeffs.coarse, coeffs.source_dims, &filter)?;

    let pps = cfg.cluster.points_per_shape;
    let src_points = sample_surface_points(&source, pps, derive_seed(cfg.seed, Purpose::SurfaceSampling, 0))?;
    let mut results = Vec::new();
    for (k, (name, volume)) in [("full", full), ("coarse", coarse)].into_iter().enumerate() {
        let mesh = marching_cubes(&SdfGrid::from_volume(volume, pad, true)?, SURFACE_LEVEL)?;
        ensure!(!mesh.is_empty(), "{name} reconstruction of {id} has no surface");
        write_text(&ws.report(&format!("roundtrip-{name}.obj")), &write_obj_string(&mesh))?;
        let seed = derive_seed(cfg.seed, Purpose::SurfaceSampling, k as u64 + 1);
        let points = sample_surface_points(&mesh, pps, seed).with_context(|| format!("sampling {name} reconstruction"))?;
        results.push((chamfer_distance(&src_points, &points)?, rms_chamfer(&src_points, &points)));
    }
    let out = RoundtripOutcome {
        spacing: grid.spacing,
        full_chamfer: results[0].0,
        full_distance: results[0].1,
        coarse_chamfer: results[1].0,
        coarse_distance: results[1].1,
    };
    let report = format!(
        "mesh={id}\nresolution={res}\nspacing={:e}\nfull_chamfer={:e}\ncoarse_chamfer={:e}\nfull_distance={:e}\ncoarse_distance={:e}\n",
        out.spacing, out.full_chamfer, out.coarse_chamfer, out.full_distance, out.coarse_distance
    );
    write_text(&ws.report("roundtrip.txt"), &report)?;
    Ok(out)
}
