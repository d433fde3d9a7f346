//! End-to-end runs driven by a [`SimConfig`]: mesh, discretization, solver
//! and a serializable summary of the result.

use crate::auxstokes::{exterior_resistance, resistance, ResistanceResult, ResistanceSummary};
use crate::config::{ConfigError, SimConfig};
use crate::fem::{Discretization, FemError};
use crate::forcing::{ForceKind, ForcingProfile};
use crate::geometry::{BodyShape, DomainSpec};
use crate::meshgen::{generate_mesh, AxiMesh, MeshError};
use crate::nonlinear::{run_to_periodic, NonlinearError, NonlinearResult};
use crate::output::display4;
use crate::thrust::{linear_thrust, ThrustError};
use crate::timeloop::PeriodicSolution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Thrust(#[from] ThrustError),
    #[error(transparent)]
    Nonlinear(#[from] NonlinearError),
}

/// Failure classes reported through the process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureClass {
    BadConfig,
    Solver,
    NotConverged,
}

impl FailureClass {
    pub fn exit_code(self) -> i32 {
        match self {
            FailureClass::BadConfig => 2,
            FailureClass::Solver => 3,
            FailureClass::NotConverged => 4,
        }
    }
}

impl PipelineError {
    pub fn class(&self) -> FailureClass {
        match self {
            PipelineError::Config(_) => FailureClass::BadConfig,
            PipelineError::Mesh(MeshError::InvalidSizes(_)) | PipelineError::Mesh(MeshError::Geometry(_)) => {
                FailureClass::BadConfig
            }
            PipelineError::Thrust(ThrustError::NotPeriodic { .. }) => FailureClass::NotConverged,
            PipelineError::Nonlinear(NonlinearError::StartUp(_)) => FailureClass::NotConverged,
            _ => FailureClass::Solver,
        }
    }
}

/// Mesh and discretization of a configuration.
pub struct Setup {
    pub shape: BodyShape,
    pub mesh: AxiMesh,
    pub disc: Discretization,
}

pub fn setup(cfg: &SimConfig) -> Result<Setup, PipelineError> {
    cfg.validate()?;
    let shape = cfg.shape()?;
    let d = &cfg.domain;
    let mesh = generate_mesh(&shape, &DomainSpec::new(d.radius), d.size_far, d.size_body)?;
    let disc = Discretization::new(mesh.clone(), cfg.problem.element)?;
    Ok(Setup { shape, mesh, disc })
}

/// Mesh and numerical parameters shared by every summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub shape: String,
    pub force: ForceKind,
    pub h: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub size_body: f64,
    pub size_far: f64,
    pub n_steps: usize,
    pub dofs: usize,
}

impl RunParams {
    fn new(cfg: &SimConfig, disc: &Discretization) -> Self {
        Self {
            shape: cfg.problem.shape.clone(),
            force: cfg.problem.force,
            h: cfg.problem.h,
            radius: cfg.domain.radius,
            size_body: cfg.domain.size_body,
            size_far: cfg.domain.size_far,
            n_steps: cfg.time.n_steps,
            dofs: disc.n_dofs(),
        }
    }
}

/// Values rounded to four significant digits for reading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Display {
    #[serde(rename = "G_z", skip_serializing_if = "Option::is_none", default)]
    pub g_z: Option<f64>,
    #[serde(rename = "K", skip_serializing_if = "Option::is_none", default)]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma0_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_gamma: Option<f64>,
}

/// Summary of a linear run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSummary {
    pub kind: String,
    #[serde(flatten)]
    pub params: RunParams,
    #[serde(rename = "G_z")]
    pub g_z: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub gamma0_bar: f64,
    pub cycles: usize,
    pub periodic_residual: f64,
    pub display: Display,
}

/// Summary of a nonlinear run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearSummary {
    pub kind: String,
    #[serde(flatten)]
    pub params: RunParams,
    pub mean_gamma: f64,
    pub cycles_run: usize,
    pub cycle_residual: f64,
    pub final_state_change: f64,
    pub converged: bool,
    pub display: Display,
}

/// Any run summary, tagged by its `kind` field.
#[derive(Debug, Clone, PartialEq)]
pub enum RunSummary {
    Linear(LinearSummary),
    Nonlinear(NonlinearSummary),
}

impl RunSummary {
    pub fn from_json(text: &str) -> Option<Self> {
        let v: serde_json::Value = serde_json::from_str(text).ok()?;
        match v.get("kind")?.as_str()? {
            "linear" => serde_json::from_value(v).ok().map(RunSummary::Linear),
            "nonlinear" => serde_json::from_value(v).ok().map(RunSummary::Nonlinear),
            _ => None,
        }
    }

    pub fn params(&self) -> &RunParams {
        match self {
            RunSummary::Linear(s) => &s.params,
            RunSummary::Nonlinear(s) => &s.params,
        }
    }
}

/// Resistance run with the wall-corrected estimate alongside.
pub fn run_resistance(cfg: &SimConfig, setup: &Setup) -> Result<(ResistanceSummary, ResistanceResult), PipelineError> {
    let aux = resistance(&setup.disc)?;
    let k_ext = exterior_resistance(&setup.disc, aux.k)?;
    let summary = ResistanceSummary {
        shape: cfg.problem.shape.clone(),
        outer_radius: cfg.domain.radius,
        size_body: cfg.domain.size_body,
        k: aux.k,
        k_energy: aux.k_energy,
        k_exterior: Some(k_ext),
        dofs: setup.disc.n_dofs(),
    };
    Ok((summary, aux))
}

/// Linear periodic run and thrust.
pub fn run_linear(cfg: &SimConfig, setup: &Setup) -> Result<(LinearSummary, PeriodicSolution), PipelineError> {
    let (t, sol, _) = linear_thrust(&setup.disc, cfg)?;
    let summary = LinearSummary {
        kind: "linear".into(),
        params: RunParams::new(cfg, &setup.disc),
        g_z: t.g_z,
        k: t.k,
        gamma0_bar: t.gamma0_bar,
        cycles: sol.cycle_count,
        periodic_residual: sol.periodic_residual,
        display: Display {
            g_z: Some(display4(t.g_z)),
            k: Some(display4(t.k)),
            gamma0_bar: Some(display4(t.gamma0_bar)),
            mean_gamma: None,
        },
    };
    Ok((summary, sol))
}

/// Nonlinear run to the periodic regime. Non-convergence is reported in the
/// summary, not as an error.
pub fn run_nonlinear(cfg: &SimConfig, setup: &Setup) -> Result<(NonlinearSummary, NonlinearResult), PipelineError> {
    let force = ForcingProfile::new(cfg.problem.force, cfg.time.n_steps);
    let res = run_to_periodic(&setup.disc, cfg, &force)?;
    let summary = NonlinearSummary {
        kind: "nonlinear".into(),
        params: RunParams::new(cfg, &setup.disc),
        mean_gamma: res.mean_gamma,
        cycles_run: res.cycles_run,
        cycle_residual: res.cycle_residual,
        final_state_change: res.periods.last().map(|p| p.state_change).unwrap_or(f64::NAN),
        converged: res.converged,
        display: Display {
            mean_gamma: Some(display4(res.mean_gamma)),
            ..Display::default()
        },
    };
    Ok((summary, res))
}
