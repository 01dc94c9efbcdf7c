//! One module per subcommand. Each prints a short summary to stdout and
//! writes its artifacts under the workspace.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use forge_core::geometry::{normalize_mesh, sample_surface_points, Point3, TriangleMesh};
use forge_core::rng::{derive_seed, Purpose};
use rayon::prelude::*;

use crate::container::write_atomic;

pub mod cluster;
pub mod encode;
pub mod evaluate;
pub mod generate;
pub mod roundtrip;
pub mod train;

/// Surface samples of each normalized mesh; mesh `i` uses stream `i`.
pub fn sample_point_sets(meshes: &[(String, TriangleMesh)], count: usize, seed: u64) -> Result<Vec<Vec<Point3>>> {
    meshes
        .par_iter()
        .enumerate()
        .map(|(i, (id, mesh))| {
            let normalized = normalize_mesh(mesh).with_context(|| format!("normalizing mesh {id}"))?;
            let s = derive_seed(seed, Purpose::SurfaceSampling, i as u64);
            sample_surface_points(&normalized, count, s).with_context(|| format!("sampling mesh {id}"))
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Removes files in `dir` whose names start with `prefix`.
pub fn clear_prefixed(dir: &Path, prefix: &str) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with(prefix)) {
            fs::remove_file(&path).with_context(|| format!("removing {}", path.display()))?;
        }
    }
    Ok(())
}
