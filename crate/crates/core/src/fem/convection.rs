//! Relative convection `((w − γ e_z)·∇)u` in axisymmetric components.

use super::assembly::{velocity_at, OperatorSet, QuadCache};
use super::space::{DofMap, FieldVP};
use super::FemError;
use crate::linsolve::CsrMatrix;

fn check_len(dm: &DofMap, v: &[f64]) -> Result<(), FemError> {
    if v.len() != dm.n_dofs() {
        return Err(FemError::Dimension(format!(
            "vector of length {} for {} dofs",
            v.len(),
            dm.n_dofs()
        )));
    }
    Ok(())
}

/// Matrix of `u ↦ ((w − γ e_z)·∇)u` tested against the velocity basis.
pub fn convection_matrix(
    cache: &QuadCache,
    dm: &DofMap,
    ops: &OperatorSet,
    w: &[f64],
    gamma: f64,
) -> Result<CsrMatrix, FemError> {
    check_len(dm, w)?;
    let mut out = CsrMatrix::zeros(ops.pattern.clone());
    let nloc = ops.nloc;
    let mut local = vec![0.0; 36];
    for (c, cd) in cache.cells.iter().enumerate() {
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in &cd.qp {
            let (a, _) = velocity_at(dm, w, c, q);
            let adv = [a[0], a[1] - gamma];
            for j in 0..6 {
                let d = q.w * (adv[0] * q.dphi[j][0] + adv[1] * q.dphi[j][1]);
                for i in 0..6 {
                    local[i * 6 + j] += q.phi[i] * d;
                }
            }
        }
        let pos = ops.positions(c);
        for i in 0..6 {
            for j in 0..6 {
                let v = local[i * 6 + j];
                out.vals[pos[i * nloc + j] as usize] += v;
                out.vals[pos[(6 + i) * nloc + 6 + j] as usize] += v;
            }
        }
    }
    Ok(out)
}

/// Jacobian of `u ↦ N(u, γ)·u`.
pub fn convection_jacobian(
    cache: &QuadCache,
    dm: &DofMap,
    ops: &OperatorSet,
    u: &[f64],
    gamma: f64,
) -> Result<CsrMatrix, FemError> {
    let mut out = convection_matrix(cache, dm, ops, u, gamma)?;
    let nloc = ops.nloc;
    let mut local = [[0.0; 36]; 4];
    for (c, cd) in cache.cells.iter().enumerate() {
        local.iter_mut().for_each(|b| b.iter_mut().for_each(|v| *v = 0.0));
        for q in &cd.qp {
            let (_, g) = velocity_at(dm, u, c, q);
            for i in 0..6 {
                for j in 0..6 {
                    let m = q.w * q.phi[i] * q.phi[j];
                    // block (a, b): ∂_b u_a
                    local[0][i * 6 + j] += m * g[0][0];
                    local[1][i * 6 + j] += m * g[0][1];
                    local[2][i * 6 + j] += m * g[1][0];
                    local[3][i * 6 + j] += m * g[1][1];
                }
            }
        }
        let pos = ops.positions(c);
        for i in 0..6 {
            for j in 0..6 {
                let t = i * 6 + j;
                out.vals[pos[i * nloc + j] as usize] += local[0][t];
                out.vals[pos[i * nloc + 6 + j] as usize] += local[1][t];
                out.vals[pos[(6 + i) * nloc + j] as usize] += local[2][t];
                out.vals[pos[(6 + i) * nloc + 6 + j] as usize] += local[3][t];
            }
        }
    }
    Ok(out)
}

/// Vector `∫ ((a − γ e_z)·∇)u · φ_i` over the velocity test functions.
pub fn convection_vector(
    cache: &QuadCache,
    dm: &DofMap,
    a: &[f64],
    u: &[f64],
    gamma: f64,
) -> Result<Vec<f64>, FemError> {
    check_len(dm, a)?;
    check_len(dm, u)?;
    let mut out = vec![0.0; dm.n_dofs()];
    for (c, cd) in cache.cells.iter().enumerate() {
        let nodes = &dm.cell_nodes[c];
        for q in &cd.qp {
            let (av, _) = velocity_at(dm, a, c, q);
            let (_, g) = velocity_at(dm, u, c, q);
            let adv = [av[0], av[1] - gamma];
            let cr = adv[0] * g[0][0] + adv[1] * g[0][1];
            let cz = adv[0] * g[1][0] + adv[1] * g[1][1];
            for i in 0..6 {
                out[dm.ur(nodes[i])] += q.w * cr * q.phi[i];
                out[dm.uz(nodes[i])] += q.w * cz * q.phi[i];
            }
        }
    }
    Ok(out)
}

/// `∫ ((V − ξ e_z)·∇V)·h · 2πr dr dz`.
pub fn nonlinear_form_against(
    cache: &QuadCache,
    dm: &DofMap,
    v: &FieldVP,
    xi: f64,
    h: &FieldVP,
) -> Result<f64, FemError> {
    if !v.conforms_to(dm) || !h.conforms_to(dm) {
        return Err(FemError::Dimension("field does not match the dof map".into()));
    }
    Ok(nonlinear_form_values(cache, dm, &v.values, xi, &h.values))
}

/// [`nonlinear_form_against`] on raw coefficient vectors.
pub fn nonlinear_form_values(cache: &QuadCache, dm: &DofMap, v: &[f64], xi: f64, h: &[f64]) -> f64 {
    let mut s = 0.0;
    for (c, cd) in cache.cells.iter().enumerate() {
        for q in &cd.qp {
            let (hv, _) = velocity_at(dm, h, c, q);
            if hv[0] == 0.0 && hv[1] == 0.0 {
                continue;
            }
            let (vv, g) = velocity_at(dm, v, c, q);
            let adv = [vv[0], vv[1] - xi];
            let cr = adv[0] * g[0][0] + adv[1] * g[0][1];
            let cz = adv[0] * g[1][0] + adv[1] * g[1][1];
            s += q.w * (cr * hv[0] + cz * hv[1]);
        }
    }
    s
}
