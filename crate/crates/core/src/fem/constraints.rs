//! Dirichlet constraints for the two boundary regimes.

use super::space::DofMap;
use super::FemError;
use crate::linsolve::{CsrMatrix, LuFactor, Pattern, SolveError, SparseSystem};
use crate::meshgen::BoundaryTag;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Do-nothing outflow at `z = ±R`.
    Linear,
    /// Every outer boundary is a no-slip wall and one pressure dof is pinned.
    Closed,
}

/// Constrained dofs and the map onto the free unknowns.
#[derive(Debug, Clone)]
pub struct Constraints {
    pub regime: Regime,
    pub fixed: Vec<bool>,
    /// `u_z` dofs on the body (value γ).
    pub body_uz: Vec<usize>,
    /// Dofs held at zero.
    pub zero: Vec<usize>,
    pub pinned_pressure: Option<usize>,
    /// Full index → free index (`usize::MAX` when constrained).
    pub free_index: Vec<usize>,
    pub n_free: usize,
}

impl Constraints {
    pub fn new(dm: &DofMap, regime: Regime) -> Result<Self, FemError> {
        let n = dm.n_dofs();
        let mut fixed = vec![false; n];
        let mut body_uz = Vec::new();
        let mut zero = Vec::new();
        for node in 0..dm.n_nodes {
            let on_body = dm.node_has(node, BoundaryTag::Body);
            let on_wall = dm.node_has(node, BoundaryTag::Lateral)
                || (regime == Regime::Closed
                    && (dm.node_has(node, BoundaryTag::OutflowTop)
                        || dm.node_has(node, BoundaryTag::OutflowBottom)));
            if on_body && on_wall {
                return Err(FemError::ConflictingConstraints(format!(
                    "node {node} lies on the body and on an outer wall"
                )));
            }
            if on_body {
                body_uz.push(dm.uz(node));
                zero.push(dm.ur(node));
            } else if on_wall {
                zero.push(dm.ur(node));
                zero.push(dm.uz(node));
            } else if dm.node_has(node, BoundaryTag::Axis) {
                zero.push(dm.ur(node));
            }
        }
        let pinned_pressure = match regime {
            Regime::Linear => None,
            Regime::Closed => {
                let k = (0..dm.n_vertices)
                    .max_by(|&a, &b| {
                        let (pa, pb) = (dm.node_coords[a], dm.node_coords[b]);
                        (pa[0] + pa[1]).total_cmp(&(pb[0] + pb[1])).then(b.cmp(&a))
                    })
                    .expect("mesh has vertices");
                Some(dm.p(k))
            }
        };
        if let Some(p) = pinned_pressure {
            zero.push(p);
        }
        zero.sort_unstable();
        for &d in body_uz.iter().chain(&zero) {
            fixed[d] = true;
        }
        let mut free_index = vec![usize::MAX; n];
        let mut n_free = 0;
        for (i, f) in fixed.iter().enumerate() {
            if !f {
                free_index[i] = n_free;
                n_free += 1;
            }
        }
        Ok(Self {
            regime,
            fixed,
            body_uz,
            zero,
            pinned_pressure,
            free_index,
            n_free,
        })
    }

    /// Writes the boundary values (body `u_z = γ`, everything else 0).
    pub fn impose(&self, x: &mut [f64], gamma: f64) {
        for &d in &self.zero {
            x[d] = 0.0;
        }
        for &d in &self.body_uz {
            x[d] = gamma;
        }
    }

    /// Vector that is γ on the body `u_z` dofs and 0 elsewhere.
    pub fn body_indicator(&self, n: usize, gamma: f64) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for &d in &self.body_uz {
            v[d] = gamma;
        }
        v
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for (i, &k) in self.free_index.iter().enumerate() {
            if k != usize::MAX {
                out[k] = full[i];
            }
        }
        out
    }

    /// `full[free] += alpha · reduced`.
    pub fn add_reduced(&self, full: &mut [f64], reduced: &[f64], alpha: f64) {
        for (i, &k) in self.free_index.iter().enumerate() {
            if k != usize::MAX {
                full[i] += alpha * reduced[k];
            }
        }
    }

    pub fn reducer(&self, pattern: &Arc<Pattern>) -> Reducer {
        let (m, map) = CsrMatrix::zeros(pattern.clone()).restrict(&self.free_index, self.n_free);
        Reducer {
            full_pattern: pattern.clone(),
            pattern: m.pattern,
            map,
        }
    }
}

/// Cached restriction of matrices on one pattern to the free dofs.
#[derive(Debug, Clone)]
pub struct Reducer {
    pub full_pattern: Arc<Pattern>,
    pub pattern: Arc<Pattern>,
    map: Vec<usize>,
}

impl Reducer {
    pub fn reduce(&self, m: &CsrMatrix) -> CsrMatrix {
        let mut out = CsrMatrix::zeros(self.pattern.clone());
        for (k, &t) in self.map.iter().enumerate() {
            if t != usize::MAX {
                out.vals[t] = m.vals[k];
            }
        }
        out
    }
}

/// LU factorization of a matrix restricted to the free dofs.
#[derive(Debug)]
pub struct ReducedFactor {
    pub lu: LuFactor,
}

impl ReducedFactor {
    pub fn new(matrix: &CsrMatrix, constraints: &Constraints) -> Result<Self, SolveError> {
        let reduced = constraints.reducer(&matrix.pattern).reduce(matrix);
        Ok(Self {
            lu: LuFactor::new(&reduced)?,
        })
    }

    /// Newton-type correction: solves `K_ff δ = −R_f` and adds `δ` to the free
    /// entries of `x`.
    pub fn correct(&self, constraints: &Constraints, x: &mut [f64], residual: &[f64]) -> Result<(), SolveError> {
        let mut rhs = constraints.restrict(residual);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let delta = self.lu.solve(&rhs)?;
        constraints.add_reduced(x, &delta, 1.0);
        Ok(())
    }
}

/// Symmetric elimination: returns the free-dof system and the full vector of
/// boundary values.
pub fn apply_dirichlet(
    matrix: &CsrMatrix,
    rhs: &[f64],
    constraints: &Constraints,
    gamma: f64,
) -> (SparseSystem, Vec<f64>) {
    let mut boundary = vec![0.0; rhs.len()];
    constraints.impose(&mut boundary, gamma);
    let lifted = matrix.matvec(&boundary);
    let full_rhs: Vec<f64> = rhs.iter().zip(&lifted).map(|(b, l)| b - l).collect();
    let reduced = constraints.reducer(&matrix.pattern).reduce(matrix);
    (
        SparseSystem {
            matrix: reduced,
            rhs: constraints.restrict(&full_rhs),
        },
        boundary,
    )
}

/// Combines a free-dof solution with the boundary values.
pub fn expand_solution(constraints: &Constraints, reduced: &[f64], boundary: &[f64]) -> Vec<f64> {
    let mut x = boundary.to_vec();
    constraints.add_reduced(&mut x, reduced, 1.0);
    x
}
