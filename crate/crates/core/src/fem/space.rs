use crate::meshgen::{AxiMesh, BoundaryTag};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ElementMode {
    /// Quadratic velocity, linear pressure.
    #[default]
    TaylorHood,
    /// Quadratic velocity and pressure with local projection stabilization.
    EqualOrderLps,
}

/// Degrees of freedom of the mixed space.
///
/// Global layout: `[u_r (nodes) | u_z (nodes) | p]`. Nodes are the mesh
/// vertices followed by one node per edge.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub mode: ElementMode,
    pub n_vertices: usize,
    pub n_nodes: usize,
    pub n_pressure: usize,
    pub node_coords: Vec<[f64; 2]>,
    pub cell_nodes: Vec<[usize; 6]>,
    /// Boundary tag bits per node (see [`BoundaryTag::bit`]).
    pub node_tags: Vec<u8>,
    /// `u_r` dofs on the axis.
    pub axis_constraints: Vec<usize>,
}

impl DofMap {
    pub fn n_dofs(&self) -> usize {
        2 * self.n_nodes + self.n_pressure
    }

    pub fn n_velocity(&self) -> usize {
        2 * self.n_nodes
    }

    pub fn ur(&self, node: usize) -> usize {
        node
    }

    pub fn uz(&self, node: usize) -> usize {
        self.n_nodes + node
    }

    pub fn p(&self, k: usize) -> usize {
        2 * self.n_nodes + k
    }

    pub fn n_cells(&self) -> usize {
        self.cell_nodes.len()
    }

    /// Number of local pressure dofs per cell.
    pub fn local_pressure(&self) -> usize {
        match self.mode {
            ElementMode::TaylorHood => 3,
            ElementMode::EqualOrderLps => 6,
        }
    }

    /// Global pressure index (within the pressure block) of local pressure dof `k`.
    pub fn cell_pressure(&self, cell: usize, k: usize) -> usize {
        self.cell_nodes[cell][k]
    }

    /// Global dof indices of a cell: 6 `u_r`, 6 `u_z`, then the pressure dofs.
    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let nodes = &self.cell_nodes[cell];
        let mut out = Vec::with_capacity(12 + self.local_pressure());
        out.extend(nodes.iter().map(|&n| self.ur(n)));
        out.extend(nodes.iter().map(|&n| self.uz(n)));
        out.extend((0..self.local_pressure()).map(|k| self.p(self.cell_pressure(cell, k))));
        out
    }

    pub fn node_has(&self, node: usize, tag: BoundaryTag) -> bool {
        self.node_tags[node] & tag.bit() != 0
    }

    /// Coordinates of pressure dof `k`.
    pub fn pressure_coords(&self, k: usize) -> [f64; 2] {
        self.node_coords[k]
    }
}

/// Builds the quadratic node numbering and the pressure space.
pub fn build_spaces(mesh: &AxiMesh, mode: ElementMode) -> DofMap {
    let nv = mesh.num_vertices();
    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut cell_nodes = Vec::with_capacity(mesh.num_cells());
    for cell in &mesh.cells {
        let mut nodes = [cell[0], cell[1], cell[2], 0, 0, 0];
        for (k, [a, b]) in super::quadrature::EDGE_VERTICES.iter().enumerate() {
            let (va, vb) = (cell[*a], cell[*b]);
            let key = (va.min(vb), va.max(vb));
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push([key.0, key.1]);
                edges.len() - 1
            });
            nodes[3 + k] = nv + e;
        }
        cell_nodes.push(nodes);
    }
    let n_nodes = nv + edges.len();
    let mut node_coords = mesh.vertices.clone();
    for [a, b] in &edges {
        let (p, q) = (mesh.vertices[*a], mesh.vertices[*b]);
        let r = if p[0] == 0.0 && q[0] == 0.0 { 0.0 } else { 0.5 * (p[0] + q[0]) };
        node_coords.push([r, 0.5 * (p[1] + q[1])]);
    }
    let mut node_tags = vec![0u8; n_nodes];
    node_tags[..nv].copy_from_slice(&mesh.vertex_tags());
    for e in &mesh.boundary_edges {
        let key = (e.a.min(e.b), e.a.max(e.b));
        if let Some(&k) = edge_index.get(&key) {
            node_tags[nv + k] |= e.tag.bit();
        }
    }
    let axis_constraints = (0..n_nodes)
        .filter(|&n| node_tags[n] & BoundaryTag::Axis.bit() != 0)
        .collect();
    let n_pressure = match mode {
        ElementMode::TaylorHood => nv,
        ElementMode::EqualOrderLps => n_nodes,
    };
    DofMap {
        mode,
        n_vertices: nv,
        n_nodes,
        n_pressure,
        node_coords,
        cell_nodes,
        node_tags,
        axis_constraints,
    }
}

/// Velocity–pressure coefficients at one time instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldVP {
    pub n_nodes: usize,
    pub n_pressure: usize,
    /// `[u_r | u_z | p]` in the [`DofMap`] layout.
    pub values: Vec<f64>,
    pub time_tag: f64,
}

impl FieldVP {
    pub fn zeros(dm: &DofMap) -> Self {
        Self {
            n_nodes: dm.n_nodes,
            n_pressure: dm.n_pressure,
            values: vec![0.0; dm.n_dofs()],
            time_tag: 0.0,
        }
    }

    pub fn from_values(dm: &DofMap, values: Vec<f64>, time_tag: f64) -> Self {
        assert_eq!(values.len(), dm.n_dofs(), "field length does not match the dof map");
        Self {
            n_nodes: dm.n_nodes,
            n_pressure: dm.n_pressure,
            values,
            time_tag,
        }
    }

    pub fn ur(&self) -> &[f64] {
        &self.values[..self.n_nodes]
    }

    pub fn uz(&self) -> &[f64] {
        &self.values[self.n_nodes..2 * self.n_nodes]
    }

    pub fn p(&self) -> &[f64] {
        &self.values[2 * self.n_nodes..]
    }

    pub fn velocity(&self) -> &[f64] {
        &self.values[..2 * self.n_nodes]
    }

    pub fn conforms_to(&self, dm: &DofMap) -> bool {
        self.n_nodes == dm.n_nodes && self.n_pressure == dm.n_pressure
    }
}
