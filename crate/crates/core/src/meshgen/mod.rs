//! Triangulations of the meridian domain.
//!
//! The mesh lives in the body frame and never changes during a run. Body
//! boundaries are piecewise linear with every body vertex snapped onto the
//! exact level set.

mod generate;
mod io;

use crate::geometry::{BodyShape, GeometryError};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

pub use generate::{generate_mesh, SizeField};
pub use io::{read_mesh, read_mesh_str, write_mesh, write_mesh_string};

/// Smallest interior angle accepted for any cell, in degrees.
pub const MIN_ANGLE_DEG: f64 = 15.0;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh sizes: {0}")]
    InvalidSizes(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("meshing failed near (r={r:.4}, z={z:.4}): {reason}")]
    MeshingFailed { r: f64, z: f64, reason: String },
    #[error("mesh invariant violated: {0}")]
    Invariant(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("malformed mesh file: missing section `{0}`")]
    MissingSection(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryTag {
    Axis,
    Body,
    Lateral,
    OutflowTop,
    OutflowBottom,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 5] = [
        BoundaryTag::Axis,
        BoundaryTag::Body,
        BoundaryTag::Lateral,
        BoundaryTag::OutflowTop,
        BoundaryTag::OutflowBottom,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BoundaryTag::Axis => "AXIS",
            BoundaryTag::Body => "BODY",
            BoundaryTag::Lateral => "LATERAL",
            BoundaryTag::OutflowTop => "OUTTOP",
            BoundaryTag::OutflowBottom => "OUTBOT",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.keyword() == s)
    }

    pub fn mirrored(self) -> Self {
        match self {
            BoundaryTag::OutflowTop => BoundaryTag::OutflowBottom,
            BoundaryTag::OutflowBottom => BoundaryTag::OutflowTop,
            other => other,
        }
    }

    pub fn is_outflow(self) -> bool {
        matches!(self, BoundaryTag::OutflowTop | BoundaryTag::OutflowBottom)
    }

    /// Bit used in per-node tag sets.
    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Conforming triangulation of the meridian domain in `(r, z)` coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiMesh {
    pub vertices: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    /// Longest edge of each cell.
    pub target_sizes: Vec<f64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

impl AxiMesh {
    /// Builds a mesh and fills in the per-cell sizes.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
    ) -> Self {
        let mut mesh = Self {
            vertices,
            cells,
            boundary_edges,
            target_sizes: Vec::new(),
        };
        mesh.target_sizes = mesh.cells.iter().map(|c| mesh.cell_diameter(c)).collect();
        mesh
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn cell_diameter(&self, c: &[usize; 3]) -> f64 {
        let p = c.map(|i| self.vertices[i]);
        dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
    }

    /// Signed area of a cell (positive for counter-clockwise orientation in `(r, z)`).
    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cells[cell].map(|i| self.vertices[i]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Interior angles of a cell in degrees.
    pub fn cell_angles(&self, cell: usize) -> [f64; 3] {
        let p = self.cells[cell].map(|i| self.vertices[i]);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let c = p[(k + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cos = (u[0] * v[0] + u[1] * v[1])
                / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
            out[k] = cos.clamp(-1.0, 1.0).acos().to_degrees();
        }
        out
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.num_cells())
            .flat_map(|c| self.cell_angles(c))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn edges_with_tag(&self, tag: BoundaryTag) -> impl Iterator<Item = &BoundaryEdge> {
        self.boundary_edges.iter().filter(move |e| e.tag == tag)
    }

    /// Lengths of the body edges.
    pub fn body_edge_lengths(&self) -> Vec<f64> {
        self.edges_with_tag(BoundaryTag::Body)
            .map(|e| dist(self.vertices[e.a], self.vertices[e.b]))
            .collect()
    }

    /// Per-vertex set of boundary tags (bitmask of [`BoundaryTag::bit`]).
    pub fn vertex_tags(&self) -> Vec<u8> {
        let mut tags = vec![0u8; self.num_vertices()];
        for e in &self.boundary_edges {
            tags[e.a] |= e.tag.bit();
            tags[e.b] |= e.tag.bit();
        }
        tags
    }

    /// Checks every structural invariant that does not need the body shape.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.num_vertices();
        for (i, v) in self.vertices.iter().enumerate() {
            if !(v[0].is_finite() && v[1].is_finite()) {
                return Err(MeshError::Invariant(format!("vertex {i} is not finite")));
            }
            if v[0] < 0.0 {
                return Err(MeshError::Invariant(format!(
                    "vertex {i} has negative r = {}",
                    v[0]
                )));
            }
        }
        for (c, cell) in self.cells.iter().enumerate() {
            if cell.iter().any(|&i| i >= nv) {
                return Err(MeshError::Invariant(format!("cell {c} references a missing vertex")));
            }
            if cell[0] == cell[1] || cell[1] == cell[2] || cell[0] == cell[2] {
                return Err(MeshError::Invariant(format!("cell {c} is degenerate")));
            }
            if self.signed_area(c) <= 0.0 {
                return Err(MeshError::Invariant(format!("cell {c} is not positively oriented")));
            }
        }
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for cell in &self.cells {
            for k in 0..3 {
                *edge_count.entry(edge_key(cell[k], cell[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut tagged: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
        for e in &self.boundary_edges {
            if e.a >= nv || e.b >= nv {
                return Err(MeshError::Invariant("boundary edge references a missing vertex".into()));
            }
            if tagged.insert(edge_key(e.a, e.b), e.tag).is_some() {
                return Err(MeshError::Invariant(format!(
                    "boundary edge ({}, {}) is tagged twice",
                    e.a, e.b
                )));
            }
            if e.tag == BoundaryTag::Axis && (self.vertices[e.a][0] != 0.0 || self.vertices[e.b][0] != 0.0) {
                return Err(MeshError::Invariant(format!(
                    "axis edge ({}, {}) is off the axis",
                    e.a, e.b
                )));
            }
        }
        for (key, count) in &edge_count {
            match count {
                1 => {
                    if !tagged.contains_key(key) {
                        return Err(MeshError::Invariant(format!(
                            "boundary edge {:?} has no tag",
                            key
                        )));
                    }
                }
                2 => {
                    if tagged.contains_key(key) {
                        return Err(MeshError::Invariant(format!(
                            "interior edge {:?} carries a boundary tag",
                            key
                        )));
                    }
                }
                n => {
                    return Err(MeshError::Invariant(format!(
                        "edge {:?} is shared by {n} cells",
                        key
                    )))
                }
            }
        }
        for key in tagged.keys() {
            if edge_count.get(key) != Some(&1) {
                return Err(MeshError::Invariant(format!(
                    "tagged edge {:?} is not on the boundary",
                    key
                )));
            }
        }
        let min_angle = self.min_angle();
        if min_angle < MIN_ANGLE_DEG {
            return Err(MeshError::Invariant(format!(
                "minimum angle {min_angle:.3}° below {MIN_ANGLE_DEG}°"
            )));
        }
        Ok(())
    }

    /// Checks that every body vertex lies on the level set of `shape` within
    /// `rel_tol` times the local mesh size.
    pub fn check_body_on_shape(&self, shape: &BodyShape, rel_tol: f64) -> Result<(), MeshError> {
        for e in self.edges_with_tag(BoundaryTag::Body) {
            let local = dist(self.vertices[e.a], self.vertices[e.b]);
            for &v in &[e.a, e.b] {
                let [r, z] = self.vertices[v];
                let d = body_distance_estimate(shape, r, z)?;
                if d > rel_tol * local {
                    return Err(MeshError::Invariant(format!(
                        "body vertex {v} at ({r}, {z}) is {d:.3e} off the surface"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mirror image through `z = 0`.
    pub fn reflect(&self) -> AxiMesh {
        reflect_mesh(self)
    }
}

/// First-order distance estimate `|Λ| / |∇Λ|` to the level set.
fn body_distance_estimate(shape: &BodyShape, r: f64, z: f64) -> Result<f64, GeometryError> {
    let lam = shape.level_value(r, z)?;
    let s = 1.0 + shape.taper * z;
    let dr = 2.0 * shape.c_r * r / (s * s);
    let dz = -2.0 * shape.c_r * r * r * shape.taper / (s * s * s) + 2.0 * shape.c_z * z;
    let g = (dr * dr + dz * dz).sqrt();
    Ok(if g > 0.0 { lam.abs() / g } else { lam.abs() })
}

/// Applies `z ↦ −z`, swaps the outflow tags and restores the orientation.
pub fn reflect_mesh(mesh: &AxiMesh) -> AxiMesh {
    let vertices = mesh.vertices.iter().map(|&[r, z]| [r, -z]).collect();
    let cells = mesh.cells.iter().map(|&[a, b, c]| [a, c, b]).collect();
    let boundary_edges = mesh
        .boundary_edges
        .iter()
        .map(|e| BoundaryEdge {
            a: e.b,
            b: e.a,
            tag: e.tag.mirrored(),
        })
        .collect();
    AxiMesh::new(vertices, cells, boundary_edges)
}

/// Splits every cell into four through its edge midpoints.
pub fn refine_uniform(mesh: &AxiMesh) -> AxiMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        *midpoint.entry(edge_key(a, b)).or_insert_with(|| {
            let (p, q) = (vertices[a], vertices[b]);
            let r = if p[0] == 0.0 && q[0] == 0.0 { 0.0 } else { 0.5 * (p[0] + q[0]) };
            vertices.push([r, 0.5 * (p[1] + q[1])]);
            vertices.len() - 1
        })
    };
    let mut cells = Vec::with_capacity(4 * mesh.num_cells());
    for &[a, b, c] in &mesh.cells {
        let ab = mid(a, b, &mut vertices);
        let bc = mid(b, c, &mut vertices);
        let ca = mid(c, a, &mut vertices);
        cells.push([a, ab, ca]);
        cells.push([ab, b, bc]);
        cells.push([ca, bc, c]);
        cells.push([ab, bc, ca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let m = mid(e.a, e.b, &mut vertices);
        boundary_edges.push(BoundaryEdge { a: e.a, b: m, tag: e.tag });
        boundary_edges.push(BoundaryEdge { a: m, b: e.b, tag: e.tag });
    }
    AxiMesh::new(vertices, cells, boundary_edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_square_mesh() -> AxiMesh {
        // (0,0) (1,0) (1,1) (0,1), split along the diagonal, r in [0,1]
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let cells = vec![[0, 1, 2], [0, 2, 3]];
        let boundary_edges = vec![
            BoundaryEdge { a: 0, b: 1, tag: BoundaryTag::OutflowBottom },
            BoundaryEdge { a: 1, b: 2, tag: BoundaryTag::Lateral },
            BoundaryEdge { a: 2, b: 3, tag: BoundaryTag::OutflowTop },
            BoundaryEdge { a: 3, b: 0, tag: BoundaryTag::Axis },
        ];
        AxiMesh::new(vertices, cells, boundary_edges)
    }

    #[test]
    fn square_is_valid_and_refines() {
        let m = unit_square_mesh();
        m.validate().unwrap();
        let r = refine_uniform(&m);
        r.validate().unwrap();
        assert_eq!(r.num_cells(), 8);
        assert_eq!(r.num_vertices(), 9);
        assert_eq!(r.boundary_edges.len(), 8);
    }

    #[test]
    fn reflection_is_an_involution() {
        let m = unit_square_mesh();
        let rr = reflect_mesh(&reflect_mesh(&m));
        assert_eq!(rr.vertices, m.vertices);
        assert_eq!(rr.cells, m.cells);
        let r = reflect_mesh(&m);
        r.validate().unwrap();
        assert_eq!(r.edges_with_tag(BoundaryTag::OutflowTop).count(), 1);
        assert_eq!(r.min_angle(), m.min_angle());
    }

    #[test]
    fn negative_radius_is_rejected() {
        let mut m = unit_square_mesh();
        m.vertices[1][0] = -0.5;
        assert!(matches!(m.validate(), Err(MeshError::Invariant(_))));
    }

    #[test]
    fn untagged_boundary_is_rejected() {
        let mut m = unit_square_mesh();
        m.boundary_edges.pop();
        assert!(m.validate().is_err());
    }
}
