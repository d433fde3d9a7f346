//! Cell geometry cache and assembly of the mass, viscous, divergence and
//! stabilization operators.

use super::quadrature::{self, NQ};
use super::space::{DofMap, ElementMode, FieldVP};
use crate::linsolve::{CsrMatrix, Pattern};
use crate::meshgen::AxiMesh;
use std::f64::consts::PI;
use std::sync::Arc;

/// Default stabilization coefficient `α₀` of the LPS mode.
pub const LPS_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct QuadPoint {
    /// Weight including `|J|` and the axisymmetric factor `2πr`.
    pub w: f64,
    pub r: f64,
    pub z: f64,
    pub phi: [f64; 6],
    pub dphi: [[f64; 2]; 6],
    pub lambda: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct CellData {
    pub grad_lambda: [[f64; 2]; 3],
    pub diameter: f64,
    pub qp: [QuadPoint; NQ],
}

/// Per-cell quadrature data shared by every assembly routine.
#[derive(Debug, Clone)]
pub struct QuadCache {
    pub cells: Vec<CellData>,
}

impl QuadCache {
    pub fn new(mesh: &AxiMesh) -> Self {
        let rule = quadrature::points();
        let cells = mesh
            .cells
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                let [p0, p1, p2] = cell.map(|i| mesh.vertices[i]);
                let j = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                // ∇λ₁, ∇λ₂ are the rows of J⁻¹
                let g1 = [j[1][1] / det, -j[0][1] / det];
                let g2 = [-j[1][0] / det, j[0][0] / det];
                let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
                let grad_lambda = [g0, g1, g2];
                let qp = rule.map(|(l, wref)| {
                    let r = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
                    let z = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
                    let dl = quadrature::p2_lambda_derivatives(l);
                    let mut dphi = [[0.0; 2]; 6];
                    for i in 0..6 {
                        for k in 0..3 {
                            dphi[i][0] += dl[i][k] * grad_lambda[k][0];
                            dphi[i][1] += dl[i][k] * grad_lambda[k][1];
                        }
                    }
                    QuadPoint {
                        w: wref * det.abs() * 2.0 * PI * r,
                        r,
                        z,
                        phi: quadrature::p2_values(l),
                        dphi,
                        lambda: l,
                    }
                });
                CellData {
                    grad_lambda,
                    diameter: mesh.target_sizes[c],
                    qp,
                }
            })
            .collect();
        Self { cells }
    }
}

/// Local pressure basis value at a quadrature point.
#[inline]
pub fn pressure_value(mode: ElementMode, q: &QuadPoint, k: usize) -> f64 {
    match mode {
        ElementMode::TaylorHood => q.lambda[k],
        ElementMode::EqualOrderLps => q.phi[k],
    }
}

/// Sparse operators of the mixed discretization on one shared pattern.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub pattern: Arc<Pattern>,
    /// Velocity mass matrix (both components).
    pub mass: CsrMatrix,
    /// Viscous matrix `2∫D(u):D(φ)`.
    pub viscous: CsrMatrix,
    /// `−∫p div φ` in velocity rows and `−∫q div u` in pressure rows.
    pub divergence: CsrMatrix,
    /// Pressure stabilization (zero in Taylor–Hood mode).
    pub stabilization: CsrMatrix,
    /// CSR positions of each cell's local dof pairs, row-major `nloc × nloc`.
    pub cell_positions: Vec<u32>,
    pub nloc: usize,
}

impl OperatorSet {
    #[inline]
    pub fn positions(&self, cell: usize) -> &[u32] {
        let s = self.nloc * self.nloc;
        &self.cell_positions[cell * s..(cell + 1) * s]
    }

    /// `Σ cᵢ·Mᵢ` over the operators of this set.
    pub fn combine(&self, terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        CsrMatrix::combine(&self.pattern, terms)
    }
}

fn build_pattern(dm: &DofMap) -> (Arc<Pattern>, Vec<u32>, usize) {
    let n = dm.n_dofs();
    let nloc = 12 + dm.local_pressure();
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); n];
    for c in 0..dm.n_cells() {
        let dofs = dm.cell_dofs(c);
        for &i in &dofs {
            rows[i].extend_from_slice(&dofs);
        }
    }
    let pattern = Arc::new(Pattern::from_rows(rows));
    let mut positions = Vec::with_capacity(dm.n_cells() * nloc * nloc);
    for c in 0..dm.n_cells() {
        let dofs = dm.cell_dofs(c);
        for &i in &dofs {
            for &j in &dofs {
                positions.push(pattern.find(i, j).expect("cell pair in pattern") as u32);
            }
        }
    }
    (pattern, positions, nloc)
}

/// Assembles `M`, `A`, the divergence coupling and `S`.
pub fn assemble_operators(cache: &QuadCache, dm: &DofMap) -> OperatorSet {
    let (pattern, cell_positions, nloc) = build_pattern(dm);
    let mut mass = CsrMatrix::zeros(pattern.clone());
    let mut viscous = CsrMatrix::zeros(pattern.clone());
    let mut divergence = CsrMatrix::zeros(pattern.clone());
    let mut stabilization = CsrMatrix::zeros(pattern.clone());
    let npl = dm.local_pressure();
    let mut lm = vec![0.0; nloc * nloc];
    let mut la = vec![0.0; nloc * nloc];
    let mut lb = vec![0.0; nloc * nloc];
    let mut ls = vec![0.0; nloc * nloc];
    for (c, cd) in cache.cells.iter().enumerate() {
        lm.iter_mut().for_each(|v| *v = 0.0);
        la.iter_mut().for_each(|v| *v = 0.0);
        lb.iter_mut().for_each(|v| *v = 0.0);
        ls.iter_mut().for_each(|v| *v = 0.0);
        for q in &cd.qp {
            let w = q.w;
            let inv_r2 = 1.0 / (q.r * q.r);
            for i in 0..6 {
                let (pi, [dri, dzi]) = (q.phi[i], q.dphi[i]);
                for j in 0..6 {
                    let (pj, [drj, dzj]) = (q.phi[j], q.dphi[j]);
                    let m = w * pi * pj;
                    lm[i * nloc + j] += m;
                    lm[(6 + i) * nloc + 6 + j] += m;
                    la[i * nloc + j] += w * (2.0 * dri * drj + dzi * dzj + 2.0 * pi * pj * inv_r2);
                    la[(6 + i) * nloc + 6 + j] += w * (2.0 * dzi * dzj + dri * drj);
                    la[i * nloc + 6 + j] += w * drj * dzi;
                    la[(6 + i) * nloc + j] += w * dzj * dri;
                }
                let div_r = dri + pi / q.r;
                for k in 0..npl {
                    let psi = pressure_value(dm.mode, q, k);
                    let pr = 12 + k;
                    lb[pr * nloc + i] -= w * psi * div_r;
                    lb[pr * nloc + 6 + i] -= w * psi * dzi;
                    lb[i * nloc + pr] -= w * psi * div_r;
                    lb[(6 + i) * nloc + pr] -= w * psi * dzi;
                }
            }
            if dm.mode == ElementMode::EqualOrderLps {
                let tau = LPS_ALPHA * cd.diameter * cd.diameter;
                let mut g = [[0.0; 2]; 6];
                for (k, gk) in g.iter_mut().enumerate() {
                    *gk = q.dphi[k];
                    if k < 3 {
                        gk[0] -= cd.grad_lambda[k][0];
                        gk[1] -= cd.grad_lambda[k][1];
                    }
                }
                for k in 0..6 {
                    for l in 0..6 {
                        ls[(12 + k) * nloc + 12 + l] +=
                            tau * w * (g[k][0] * g[l][0] + g[k][1] * g[l][1]);
                    }
                }
            }
        }
        let pos = &cell_positions[c * nloc * nloc..(c + 1) * nloc * nloc];
        for (t, &p) in pos.iter().enumerate() {
            let p = p as usize;
            mass.vals[p] += lm[t];
            viscous.vals[p] += la[t];
            divergence.vals[p] += lb[t];
            stabilization.vals[p] += ls[t];
        }
    }
    OperatorSet {
        pattern,
        mass,
        viscous,
        divergence,
        stabilization,
        cell_positions,
        nloc,
    }
}

/// Load vector `∫ f·φ · 2πr` of a volume force (used for verification only).
pub fn assemble_body_force<F>(cache: &QuadCache, dm: &DofMap, force: F) -> Vec<f64>
where
    F: Fn(f64, f64) -> [f64; 2],
{
    let mut out = vec![0.0; dm.n_dofs()];
    for (c, cd) in cache.cells.iter().enumerate() {
        let nodes = &dm.cell_nodes[c];
        for q in &cd.qp {
            let [fr, fz] = force(q.r, q.z);
            for i in 0..6 {
                out[dm.ur(nodes[i])] += q.w * fr * q.phi[i];
                out[dm.uz(nodes[i])] += q.w * fz * q.phi[i];
            }
        }
    }
    out
}

/// Velocity value and gradient of `values` at a quadrature point of `cell`:
/// `([u_r, u_z], [[∂_r u_r, ∂_z u_r], [∂_r u_z, ∂_z u_z]])`.
#[inline]
pub fn velocity_at(dm: &DofMap, values: &[f64], cell: usize, q: &QuadPoint) -> ([f64; 2], [[f64; 2]; 2]) {
    let nodes = &dm.cell_nodes[cell];
    let mut u = [0.0; 2];
    let mut g = [[0.0; 2]; 2];
    for i in 0..6 {
        let ur = values[nodes[i]];
        let uz = values[dm.n_nodes + nodes[i]];
        u[0] += ur * q.phi[i];
        u[1] += uz * q.phi[i];
        g[0][0] += ur * q.dphi[i][0];
        g[0][1] += ur * q.dphi[i][1];
        g[1][0] += uz * q.dphi[i][0];
        g[1][1] += uz * q.dphi[i][1];
    }
    (u, g)
}

/// `L²` error of the velocity against an exact field (axisymmetric measure).
pub fn velocity_l2_error<F>(cache: &QuadCache, dm: &DofMap, field: &FieldVP, exact: F) -> f64
where
    F: Fn(f64, f64) -> [f64; 2],
{
    let mut s = 0.0;
    for (c, cd) in cache.cells.iter().enumerate() {
        for q in &cd.qp {
            let (u, _) = velocity_at(dm, &field.values, c, q);
            let e = exact(q.r, q.z);
            s += q.w * ((u[0] - e[0]).powi(2) + (u[1] - e[1]).powi(2));
        }
    }
    s.sqrt()
}

/// `L²` norm of the velocity part of a coefficient vector, `√(vᵀ M v)`.
pub fn velocity_l2_norm(ops: &OperatorSet, values: &[f64]) -> f64 {
    ops.mass.bilinear(values, values).max(0.0).sqrt()
}

/// Barycentric coordinates of `p` in `cell`, if it lies inside (with tolerance).
fn locate(mesh: &AxiMesh, cell: usize, p: [f64; 2]) -> Option<[f64; 3]> {
    let [a, b, c] = mesh.cells[cell].map(|i| mesh.vertices[i]);
    let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (p[1] - a[1])) / det;
    let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
    let l0 = 1.0 - l1 - l2;
    let tol = -1e-12;
    (l0 >= tol && l1 >= tol && l2 >= tol).then_some([l0, l1, l2])
}

/// Velocity of a field at an arbitrary point of the mesh.
pub fn evaluate_velocity(mesh: &AxiMesh, dm: &DofMap, field: &FieldVP, p: [f64; 2]) -> Option<[f64; 2]> {
    (0..mesh.num_cells()).find_map(|c| {
        locate(mesh, c, p).map(|l| {
            let phi = quadrature::p2_values(l);
            let nodes = &dm.cell_nodes[c];
            let mut u = [0.0; 2];
            for i in 0..6 {
                u[0] += field.ur()[nodes[i]] * phi[i];
                u[1] += field.uz()[nodes[i]] * phi[i];
            }
            u
        })
    })
}
