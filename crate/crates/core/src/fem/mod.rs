//! Axisymmetric mixed finite elements on the meridian mesh.
//!
//! Velocity is continuous piecewise quadratic in both components `(u_r, u_z)`;
//! pressure is piecewise linear (Taylor–Hood) or quadratic with local
//! projection stabilization. Every integral carries the measure `2πr dr dz`.

mod assembly;
mod constraints;
mod convection;
mod lift;
pub mod quadrature;
mod space;

pub use assembly::{
    assemble_body_force, assemble_operators, evaluate_velocity, velocity_at, velocity_l2_error,
    velocity_l2_norm, CellData, OperatorSet, QuadCache, QuadPoint, LPS_ALPHA,
};
pub use constraints::{apply_dirichlet, expand_solution, Constraints, ReducedFactor, Reducer, Regime};
pub use convection::{
    convection_jacobian, convection_matrix, convection_vector, nonlinear_form_against,
    nonlinear_form_values,
};
pub use lift::{build_lift, LiftField};
pub use space::{build_spaces, DofMap, ElementMode, FieldVP};

use crate::linsolve::SolveError;
use crate::meshgen::AxiMesh;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("conflicting constraints: {0}")]
    ConflictingConstraints(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Mesh together with everything assembled once per mesh.
#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: AxiMesh,
    pub cache: QuadCache,
    pub dofs: DofMap,
    pub ops: OperatorSet,
    pub lift: LiftField,
}

impl Discretization {
    pub fn new(mesh: AxiMesh, mode: ElementMode) -> Result<Self, FemError> {
        let cache = QuadCache::new(&mesh);
        let dofs = build_spaces(&mesh, mode);
        let ops = assemble_operators(&cache, &dofs);
        let lift = build_lift(&mesh, &cache, &dofs)?;
        Ok(Self {
            mesh,
            cache,
            dofs,
            ops,
            lift,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.n_dofs()
    }

    /// Matrix of [`Self::stokes_action`].
    pub fn stokes_matrix(&self) -> crate::linsolve::CsrMatrix {
        self.ops.combine(&[
            (1.0, &self.ops.viscous),
            (1.0, &self.ops.divergence),
            (-1.0, &self.ops.stabilization),
        ])
    }

    /// `T(v, p):∇φ` tested against every basis function: `A v + Bᵀp` in the
    /// velocity rows and `B v − S p` in the pressure rows.
    pub fn stokes_action(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.ops.viscous.matvec(x);
        self.ops.divergence.matvec_add(1.0, x, &mut y);
        self.ops.stabilization.matvec_add(-1.0, x, &mut y);
        y
    }

    /// `∫ T(v, p):∇z̄` for a steady state.
    pub fn steady_force(&self, x: &[f64]) -> f64 {
        let y = self.stokes_action(x);
        crate::linsolve::dot(&y[..self.dofs.n_velocity()], &self.lift.values()[..self.dofs.n_velocity()])
    }
}
