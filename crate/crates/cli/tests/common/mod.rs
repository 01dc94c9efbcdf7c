#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use forge_core::geometry::primitives::{axis_box, capsule, icosphere, stretched};
use forge_core::geometry::{write_obj_string, TriangleMesh};

/// Deterministic sphere, box or capsule with index-dependent proportions.
pub fn synthetic_shape(i: usize) -> TriangleMesh {
    let a = 0.45 + 0.5 * ((i as f64 * 0.618_034).fract());
    let b = 0.45 + 0.5 * ((i as f64 * 0.414_214 + 0.3).fract());
    match i % 3 {
        0 => stretched(icosphere(0.5, 3), [1.0, a, b]),
        1 => axis_box([-0.5, -0.5 * a, -0.5 * b], [0.5, 0.5 * a, 0.5 * b]),
        _ => stretched(capsule(0.2, 0.1 + 0.25 * a, 24), [1.0, b, 1.0]),
    }
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) {
    fs::write(path, write_obj_string(mesh)).unwrap();
}

/// Writes `n` synthetic shapes as `shape-XX.obj` into `dir`.
pub fn write_corpus(dir: &Path, n: usize) {
    fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        write_mesh(&dir.join(format!("shape-{i:02}.obj")), &synthetic_shape(i));
    }
}

/// Writes `config.toml` in `dir`: `body`, then paths pointing at
/// `dir/corpus` and `dir/ws`.
pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, format!("{body}\n[paths]\ncorpus = \"corpus\"\nworkspace = \"ws\"\n")).unwrap();
    path
}

pub fn forge(config: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_forge"));
    cmd.args(args).arg("--config").arg(config).env("RUST_LOG", "warn");
    cmd.output().expect("forge binary runs")
}

/// Runs the binary and panics with its stderr unless it exits 0.
pub fn forge_ok(config: &Path, args: &[&str]) -> String {
    let out = forge(config, args);
    assert!(
        out.status.success(),
        "forge {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// `key=value` lines of a report file.
pub fn report_value(path: &Path, key: &str) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .to_string()
}

/// Sorted `(file name, bytes)` of every file under `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((name, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}
