//! Plain-text mesh files.
//!
//! ```text
//! aximesh 1
//! vertices N
//! r z
//! cells M
//! i j k
//! bedges K
//! i j TAG
//! ```

use super::{AxiMesh, BoundaryEdge, BoundaryTag, MeshError};
use std::fmt::Write as _;
use std::path::Path;

pub fn write_mesh_string(mesh: &AxiMesh) -> String {
    let mut s = String::with_capacity(64 * mesh.num_vertices());
    s.push_str("aximesh 1\n");
    let _ = writeln!(s, "vertices {}", mesh.num_vertices());
    for [r, z] in &mesh.vertices {
        let _ = writeln!(s, "{r:.16e} {z:.16e}");
    }
    let _ = writeln!(s, "cells {}", mesh.num_cells());
    for [a, b, c] in &mesh.cells {
        let _ = writeln!(s, "{a} {b} {c}");
    }
    let _ = writeln!(s, "bedges {}", mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let _ = writeln!(s, "{} {} {}", e.a, e.b, e.tag.keyword());
    }
    s
}

pub fn write_mesh(mesh: &AxiMesh, path: &Path) -> Result<(), MeshError> {
    std::fs::write(path, write_mesh_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<AxiMesh, MeshError> {
    read_mesh_str(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_content(&mut self) -> Option<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Some((i + 1, t));
            }
        }
        None
    }

    fn header(&mut self, name: &str) -> Result<usize, MeshError> {
        let (line, text) = self
            .next_content()
            .ok_or_else(|| MeshError::MissingSection(name.to_string()))?;
        let mut it = text.split_whitespace();
        if it.next() != Some(name) {
            return Err(MeshError::MissingSection(name.to_string()));
        }
        let count = it.next().and_then(|c| c.parse().ok()).ok_or_else(|| MeshError::Parse {
            line,
            message: format!("expected `{name} <count>`"),
        })?;
        Ok(count)
    }

    fn record(&mut self, section: &str) -> Result<(usize, Vec<&'a str>), MeshError> {
        let (line, text) = self.next_content().ok_or_else(|| MeshError::Parse {
            line: self.last,
            message: format!("unexpected end of file in section `{section}`"),
        })?;
        Ok((line, text.split_whitespace().collect()))
    }
}

fn parse<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        message: format!("cannot parse `{tok}`"),
    })
}

fn arity(fields: &[&str], n: usize, line: usize) -> Result<(), MeshError> {
    if fields.len() != n {
        return Err(MeshError::Parse {
            line,
            message: format!("expected {n} fields, found {}", fields.len()),
        });
    }
    Ok(())
}

/// Parses a mesh and checks its invariants.
pub fn read_mesh_str(text: &str) -> Result<AxiMesh, MeshError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    match lines.next_content() {
        Some((_, "aximesh 1")) => {}
        Some((line, other)) => {
            return Err(MeshError::Parse {
                line,
                message: format!("expected `aximesh 1`, found `{other}`"),
            })
        }
        None => return Err(MeshError::MissingSection("aximesh".into())),
    }
    let nv = lines.header("vertices")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, f) = lines.record("vertices")?;
        arity(&f, 2, line)?;
        vertices.push([parse(f[0], line)?, parse(f[1], line)?]);
    }
    let nc = lines.header("cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, f) = lines.record("cells")?;
        arity(&f, 3, line)?;
        let cell: [usize; 3] = [parse(f[0], line)?, parse(f[1], line)?, parse(f[2], line)?];
        if cell.iter().any(|&i| i >= nv) {
            return Err(MeshError::Parse {
                line,
                message: "vertex index out of range".into(),
            });
        }
        cells.push(cell);
    }
    let ne = lines.header("bedges")?;
    let mut boundary_edges = Vec::with_capacity(ne);
    for _ in 0..ne {
        let (line, f) = lines.record("bedges")?;
        arity(&f, 3, line)?;
        let tag = BoundaryTag::from_keyword(f[2]).ok_or_else(|| MeshError::Parse {
            line,
            message: format!("unknown boundary tag `{}`", f[2]),
        })?;
        let (a, b) = (parse(f[0], line)?, parse(f[1], line)?);
        if a >= nv || b >= nv {
            return Err(MeshError::Parse {
                line,
                message: "vertex index out of range".into(),
            });
        }
        boundary_edges.push(BoundaryEdge { a, b, tag });
    }
    if let Some((line, _)) = lines.next_content() {
        return Err(MeshError::Parse {
            line,
            message: "trailing content after `bedges` section".into(),
        });
    }
    let mesh = AxiMesh::new(vertices, cells, boundary_edges);
    mesh.validate()?;
    Ok(mesh)
}
