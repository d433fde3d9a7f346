//! Stationary auxiliary Stokes problem (body translating with `e_z`, walls at
//! rest) and the scalar resistance `K`.

use crate::fem::{Constraints, Discretization, FemError, FieldVP, ReducedFactor, Regime};
use crate::linsolve::dot;
use crate::meshgen::BoundaryTag;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Resistance of the body to steady translation along the axis.
#[derive(Debug, Clone)]
pub struct ResistanceResult {
    /// Force functional `∫ T(h³, p³):∇z̄`.
    pub k: f64,
    /// Energy form `2∫ D(h³):D(h³)` (plus the pressure stabilization energy in LPS mode).
    pub k_energy: f64,
    pub h3: FieldVP,
}

impl ResistanceResult {
    pub fn energy_mismatch(&self) -> f64 {
        (self.k - self.k_energy).abs() / self.k.abs()
    }
}

/// JSON summary record of a resistance run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResistanceSummary {
    pub shape: String,
    #[serde(rename = "R")]
    pub outer_radius: f64,
    pub size_body: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "K_energy")]
    pub k_energy: f64,
    /// Wall-corrected estimate of the unbounded-domain resistance.
    #[serde(rename = "K_exterior", skip_serializing_if = "Option::is_none", default)]
    pub k_exterior: Option<f64>,
    pub dofs: usize,
}

/// Solves the auxiliary problem with the body velocity `e_z` and every outer
/// boundary at rest.
pub fn solve_auxiliary(disc: &Discretization) -> Result<FieldVP, FemError> {
    let cons = Constraints::new(&disc.dofs, Regime::Closed)?;
    let mut x = vec![0.0; disc.n_dofs()];
    cons.impose(&mut x, 1.0);
    let factor = ReducedFactor::new(&disc.stokes_matrix(), &cons)?;
    let r = disc.stokes_action(&x);
    factor.correct(&cons, &mut x, &r)?;
    Ok(FieldVP::from_values(&disc.dofs, x, 0.0))
}

/// Evaluates `K` through the lift functional and through the energy form.
pub fn compute_resistance(disc: &Discretization, h3: &FieldVP) -> Result<ResistanceResult, FemError> {
    if !h3.conforms_to(&disc.dofs) {
        return Err(FemError::Dimension("auxiliary field does not match the mesh".into()));
    }
    let x = &h3.values;
    let k = disc.steady_force(x);
    let k_energy = disc.ops.viscous.bilinear(x, x) + disc.ops.stabilization.bilinear(x, x);
    Ok(ResistanceResult {
        k,
        k_energy,
        h3: h3.clone(),
    })
}

/// Convenience wrapper around [`solve_auxiliary`] and [`compute_resistance`].
pub fn resistance(disc: &Discretization) -> Result<ResistanceResult, FemError> {
    let h3 = solve_auxiliary(disc)?;
    compute_resistance(disc, &h3)
}

/// Unit-force Stokeslet along `e_z` at the origin (unit viscosity).
pub fn stokeslet(r: f64, z: f64) -> [f64; 2] {
    let rho2 = r * r + z * z;
    let rho = rho2.sqrt();
    let c = 1.0 / (8.0 * PI);
    [c * z * r / (rho2 * rho), c * (1.0 / rho + z * z / (rho2 * rho))]
}

/// Wall-corrected resistance `K_a / (1 − K_b)`.
///
/// `K_a` is the truncated resistance. `K_b` is the force on the resting body
/// when the outer walls carry the velocity of a unit Stokeslet, so that the
/// far field of the unbounded problem is matched to leading order.
pub fn exterior_resistance(disc: &Discretization, k_truncated: f64) -> Result<f64, FemError> {
    let (_, k_b) = stokeslet_wall_response(disc)?;
    Ok(k_truncated / (1.0 - k_b))
}

/// Wall-corrected auxiliary field `h³ + K_ext·w` and `K_ext`, where `w` is the
/// response to Stokeslet wall data with the body at rest.
pub fn exterior_auxiliary(disc: &Discretization, aux: &ResistanceResult) -> Result<(FieldVP, f64), FemError> {
    let (w, k_b) = stokeslet_wall_response(disc)?;
    let k_ext = aux.k / (1.0 - k_b);
    let values = aux.h3.values.iter().zip(&w).map(|(h, w)| h + k_ext * w).collect();
    Ok((FieldVP::from_values(&disc.dofs, values, 0.0), k_ext))
}

fn stokeslet_wall_response(disc: &Discretization) -> Result<(Vec<f64>, f64), FemError> {
    let cons = Constraints::new(&disc.dofs, Regime::Closed)?;
    let dm = &disc.dofs;
    let mut x = vec![0.0; disc.n_dofs()];
    let outer = [BoundaryTag::Lateral, BoundaryTag::OutflowTop, BoundaryTag::OutflowBottom];
    for n in 0..dm.n_nodes {
        if outer.iter().any(|&t| dm.node_has(n, t)) {
            let [r, z] = dm.node_coords[n];
            let u = stokeslet(r, z);
            x[dm.ur(n)] = if dm.node_has(n, BoundaryTag::Axis) { 0.0 } else { u[0] };
            x[dm.uz(n)] = u[1];
        }
    }
    let factor = ReducedFactor::new(&disc.stokes_matrix(), &cons)?;
    let r = disc.stokes_action(&x);
    factor.correct(&cons, &mut x, &r)?;
    let nv = dm.n_velocity();
    let k_b = dot(&disc.stokes_action(&x)[..nv], &disc.lift.values()[..nv]);
    Ok((x, k_b))
}
