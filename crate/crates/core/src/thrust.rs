//! Second-order thrust `G_z` of the linear periodic flow and the predicted
//! mean velocity `γ̄₀ = G_z / K`.

use crate::auxstokes::{resistance, ResistanceResult};
use crate::config::SimConfig;
use crate::fem::{nonlinear_form_values, Discretization, FemError, FieldVP, Regime};
use crate::forcing::ForcingProfile;
use crate::timeloop::{seek_periodic, PeriodicSolution, TimeloopError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ThrustError {
    #[error("periodic solution and auxiliary field live on different meshes")]
    MeshMismatch,
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Timeloop(#[from] TimeloopError),
    #[error("linear periodic iteration did not converge: residual {residual:e} after {cycles} cycles")]
    NotPeriodic { residual: f64, cycles: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThrustResult {
    pub h: f64,
    #[serde(rename = "G_z")]
    pub g_z: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma0_bar: f64,
}

impl ThrustResult {
    pub fn new(h: f64, g_z: f64, k: f64) -> Self {
        Self {
            h,
            g_z,
            k,
            gamma0_bar: g_z / k,
        }
    }
}

/// `G_z = −2h² · (1/N) Σₙ ∫ ((V̂ₙ − ξ̂ₙ e_z)·∇V̂ₙ)·h³` over the midpoint states.
pub fn thrust_functional(disc: &Discretization, sol: &PeriodicSolution, h3: &FieldVP, h: f64) -> Result<f64, ThrustError> {
    if !h3.conforms_to(&disc.dofs) || sol.states.iter().any(|s| !s.conforms_to(&disc.dofs)) {
        return Err(ThrustError::MeshMismatch);
    }
    let n = sol.n_steps();
    let mut sum = 0.0;
    let mut mid = vec![0.0; disc.n_dofs()];
    for i in 1..=n {
        let (a, b) = (&sol.states[i - 1].values, &sol.states[i].values);
        for (m, (x, y)) in mid.iter_mut().zip(a.iter().zip(b)) {
            *m = 0.5 * (x + y);
        }
        let xi = 0.5 * (sol.body_velocity[i - 1] + sol.body_velocity[i]);
        sum += nonlinear_form_values(&disc.cache, &disc.dofs, &mid, xi, &h3.values);
    }
    Ok(-2.0 * h * h * sum / n as f64)
}

/// Thrust from a converged linear solution and the auxiliary field.
pub fn compute_thrust(disc: &Discretization, sol: &PeriodicSolution, aux: &ResistanceResult, h: f64) -> Result<ThrustResult, ThrustError> {
    let g = thrust_functional(disc, sol, &aux.h3, h)?;
    Ok(ThrustResult::new(h, g, aux.k))
}

/// Full linear pipeline on a fixed mesh: auxiliary problem, periodic solve, thrust.
pub fn linear_thrust(disc: &Discretization, cfg: &SimConfig) -> Result<(ThrustResult, PeriodicSolution, ResistanceResult), ThrustError> {
    let aux = resistance(disc)?;
    let force = ForcingProfile::new(cfg.problem.force, cfg.time.n_steps);
    let sol = seek_periodic(disc, cfg, &force, Regime::Linear)?;
    if !sol.converged {
        return Err(ThrustError::NotPeriodic {
            residual: sol.periodic_residual,
            cycles: sol.cycle_count,
        });
    }
    let t = compute_thrust(disc, &sol, &aux, cfg.problem.h)?;
    Ok((t, sol, aux))
}

/// One linear pipeline per Stokes number on a shared mesh; failures stay per item.
pub fn sweep_h(disc: &Discretization, template: &SimConfig, hs: &[f64]) -> Vec<Result<ThrustResult, ThrustError>> {
    let aux = match resistance(disc) {
        Ok(a) => a,
        Err(e) => {
            let msg = e.to_string();
            return hs.iter().map(|_| Err(ThrustError::Fem(FemError::Dimension(msg.clone())))).collect();
        }
    };
    hs.iter()
        .map(|&h| {
            let mut cfg = template.clone();
            cfg.problem.h = h;
            let force = ForcingProfile::new(cfg.problem.force, cfg.time.n_steps);
            let sol = seek_periodic(disc, &cfg, &force, Regime::Linear)?;
            if !sol.converged {
                return Err(ThrustError::NotPeriodic {
                    residual: sol.periodic_residual,
                    cycles: sol.cycle_count,
                });
            }
            compute_thrust(disc, &sol, &aux, h)
        })
        .collect()
}
