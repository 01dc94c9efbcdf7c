//! Minimal Wavefront OBJ reader/writer: `v` and `f` records only.

use std::fmt::Write as _;
use std::path::Path;

use super::TriangleMesh;
use crate::error::{Error, Result};

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_obj(&text)
}

/// Parses OBJ text. Polygons are fan-triangulated around their first vertex;
/// `v/vt/vn` style references and negative (relative) indices are accepted.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut dropped = 0usize;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(Error::ObjParse {
                        line,
                        message: format!("vertex needs 3 coordinates, found {}", coords.len()),
                    });
                }
                let mut p = [0.0; 3];
                for k in 0..3 {
                    p[k] = coords[k].parse::<f64>().map_err(|_| Error::ObjParse {
                        line,
                        message: format!("bad coordinate {:?}", coords[k]),
                    })?;
                }
                vertices.push(p);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: i64 = head.parse().map_err(|_| Error::ObjParse {
                        line,
                        message: format!("bad face index {tok:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let resolved = match idx {
                        i if i > 0 => i - 1,
                        i if i < 0 => n + i,
                        _ => {
                            return Err(Error::ObjParse {
                                line,
                                message: "face index 0 is invalid (OBJ is 1-based)".into(),
                            })
                        }
                    };
                    if resolved < 0 || resolved >= n {
                        return Err(Error::FaceIndexOutOfRange {
                            line,
                            index: idx,
                            vertex_count: vertices.len(),
                        });
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::ObjParse {
                        line,
                        message: format!("face needs at least 3 vertices, found {}", poly.len()),
                    });
                }
                for k in 1..poly.len() - 1 {
                    let tri = [poly[0], poly[k], poly[k + 1]];
                    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                        dropped += 1;
                        continue;
                    }
                    faces.push(tri);
                }
            }
            _ => {}
        }
    }
    if dropped > 0 {
        log::warn!("dropped {dropped} triangles with repeated vertex indices");
    }
    TriangleMesh::new(vertices, faces)
}

pub fn write_obj_string(mesh: &TriangleMesh) -> String {
    let mut out = String::with_capacity(32 * (mesh.vertices.len() + mesh.faces.len()));
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_obj_string(mesh)).map_err(|e| Error::io(path, e))
}
