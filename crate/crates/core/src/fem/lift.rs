//! The lift field `z̄`: `e_z` on the body, extended harmonically over the two
//! cell layers around it and zero beyond.

use super::assembly::QuadCache;
use super::space::{DofMap, FieldVP};
use super::FemError;
use crate::linsolve::{CsrMatrix, LuFactor};
use crate::meshgen::{AxiMesh, BoundaryTag};

#[derive(Debug, Clone)]
pub struct LiftField {
    pub field: FieldVP,
    /// Cells on which `z̄` may be nonzero.
    pub band_cells: Vec<usize>,
}

impl LiftField {
    pub fn values(&self) -> &[f64] {
        &self.field.values
    }
}

pub fn build_lift(mesh: &AxiMesh, cache: &QuadCache, dm: &DofMap) -> Result<LiftField, FemError> {
    let nv = mesh.num_vertices();
    let body_bit = BoundaryTag::Body.bit();
    let mut near = vec![false; nv];
    for v in 0..nv {
        near[v] = dm.node_tags[v] & body_bit != 0;
    }
    let mut in_band = vec![false; mesh.num_cells()];
    for _layer in 0..2 {
        let touching: Vec<bool> = mesh.cells.iter().map(|c| c.iter().any(|&v| near[v])).collect();
        for (c, t) in touching.iter().enumerate() {
            if *t {
                in_band[c] = true;
                for &v in &mesh.cells[c] {
                    near[v] = true;
                }
            }
        }
    }
    let band_cells: Vec<usize> = (0..mesh.num_cells()).filter(|&c| in_band[c]).collect();

    // nodes touched by cells outside the band are held at zero
    let mut outside = vec![false; dm.n_nodes];
    let mut inside = vec![false; dm.n_nodes];
    for (c, nodes) in dm.cell_nodes.iter().enumerate() {
        for &n in nodes {
            if in_band[c] {
                inside[n] = true;
            } else {
                outside[n] = true;
            }
        }
    }
    let outer_bits = BoundaryTag::Lateral.bit() | BoundaryTag::OutflowTop.bit() | BoundaryTag::OutflowBottom.bit();
    let mut value = vec![0.0; dm.n_nodes];
    let mut local_index = vec![usize::MAX; dm.n_nodes];
    let mut free_nodes = Vec::new();
    for n in 0..dm.n_nodes {
        if !inside[n] {
            continue;
        }
        if dm.node_tags[n] & body_bit != 0 {
            value[n] = 1.0;
        } else if !outside[n] && dm.node_tags[n] & outer_bits == 0 {
            local_index[n] = free_nodes.len();
            free_nodes.push(n);
        }
    }
    let nf = free_nodes.len();
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; nf];
    for &c in &band_cells {
        let nodes = &dm.cell_nodes[c];
        let mut k = [[0.0; 6]; 6];
        for q in &cache.cells[c].qp {
            for i in 0..6 {
                for j in 0..6 {
                    k[i][j] += q.w * (q.dphi[i][0] * q.dphi[j][0] + q.dphi[i][1] * q.dphi[j][1]);
                }
            }
        }
        for i in 0..6 {
            let li = local_index[nodes[i]];
            if li == usize::MAX {
                continue;
            }
            for j in 0..6 {
                let lj = local_index[nodes[j]];
                if lj == usize::MAX {
                    rhs[li] -= k[i][j] * value[nodes[j]];
                } else {
                    triplets.push((li, lj, k[i][j]));
                }
            }
        }
    }
    if nf > 0 {
        let a = CsrMatrix::from_triplets(nf, &triplets);
        let x = LuFactor::new(&a)?.solve(&rhs)?;
        for (k, &n) in free_nodes.iter().enumerate() {
            value[n] = x[k];
        }
    }
    let mut field = FieldVP::zeros(dm);
    for n in 0..dm.n_nodes {
        field.values[dm.uz(n)] = value[n];
    }
    Ok(LiftField { field, band_cells })
}
