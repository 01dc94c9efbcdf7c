//! Workspace layout, corpus listing and the on-disk SDF cache.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use forge_core::geometry::{mesh_to_sdf, normalize_mesh, parse_obj, SdfGrid, TriangleMesh};
use forge_core::Volume;
use sha2::{Digest, Sha256};

use crate::container::{read_tensor, write_tensor, Tensor};

pub const SUBDIRS: [&str; 7] = ["clusters", "sdf-cache", "basis", "features", "checkpoints", "samples", "reports"];

#[derive(Debug, Clone)]
pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Workspace { root: root.into() }
    }

    pub fn create(&self) -> Result<()> {
        for sub in SUBDIRS {
            let dir = self.root.join(sub);
            fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(())
    }

    pub fn dir(&self, sub: &str) -> PathBuf {
        self.root.join(sub)
    }

    pub fn ids_file(&self) -> PathBuf {
        self.dir("clusters").join("ids.txt")
    }

    pub fn basis_file(&self) -> PathBuf {
        self.dir("basis").join("basis.spdb")
    }

    pub fn features_file(&self) -> PathBuf {
        self.dir("features").join("features.spdb")
    }

    pub fn checkpoint_file(&self, step: u64) -> PathBuf {
        self.dir("checkpoints").join(format!("step-{step:08}.spdb"))
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir("checkpoints").join("final.spdb")
    }

    pub fn report(&self, name: &str) -> PathBuf {
        self.dir("reports").join(name)
    }

    fn sdf_cache_file(&self, hash: &str, resolution: usize, padding: usize) -> PathBuf {
        self.dir("sdf-cache").join(format!("{hash}-r{resolution}-p{padding}.spdt"))
    }

    /// Raw signed distances of the normalized mesh in `bytes`, computed once
    /// per (content hash, resolution, padding).
    pub fn cached_sdf(&self, id: &str, bytes: &[u8], resolution: usize, padding: usize) -> Result<SdfGrid> {
        let hash: String = Sha256::digest(bytes)[..16].iter().map(|b| format!("{b:02x}")).collect();
        let path = self.sdf_cache_file(&hash, resolution, padding);
        if path.exists() {
            let t = read_tensor(&path)?;
            ensure!(
                t.dims_usize() == [resolution; 3],
                "cached SDF {} has dims {:?}",
                path.display(),
                t.dims
            );
            let volume = Volume::cube(resolution, t.to_f64())?;
            return Ok(SdfGrid::from_volume(volume, padding, false)?);
        }
        let mesh = parse_mesh(id, bytes)?;
        let grid = mesh_to_sdf(&normalize_mesh(&mesh)?, resolution, padding).with_context(|| format!("voxelizing mesh {id}"))?;
        if grid.diagnostics.parity_disagreements > 0 {
            log::warn!("mesh {id}: {} voxels with split inside/outside votes", grid.diagnostics.parity_disagreements);
        }
        write_tensor(&path, &Tensor::f64(&[resolution; 3], grid.values.as_slice().to_vec())?)?;
        Ok(grid)
    }
}

fn parse_mesh(id: &str, bytes: &[u8]) -> Result<TriangleMesh> {
    let text = std::str::from_utf8(bytes).with_context(|| format!("mesh {id} is not UTF-8"))?;
    parse_obj(text).with_context(|| format!("reading mesh {id}"))
}

/// `*.obj` files of `dir` keyed by file stem, in id order.
pub fn list_meshes(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let entries = fs::read_dir(dir).with_context(|| format!("reading mesh directory {}", dir.display()))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry?.path();
        let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
        if !is_obj || !path.is_file() {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .with_context(|| format!("non UTF-8 file name {}", path.display()))?
            .to_string();
        if let Some(prev) = out.insert(id.clone(), path.clone()) {
            bail!("mesh id {id} appears twice ({} and {})", prev.display(), path.display());
        }
    }
    Ok(out)
}

pub fn read_mesh_bytes(id: &str, path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading mesh {id} ({})", path.display()))
}

/// Loads and parses one mesh, naming it in any error.
pub fn load_mesh(id: &str, path: &Path) -> Result<TriangleMesh> {
    parse_mesh(id, &read_mesh_bytes(id, path)?)
}

/// Newline-delimited id list; blank lines and `#` comments are skipped.
pub fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading id list {}", path.display()))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}
