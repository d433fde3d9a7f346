//! Time-periodic solution of the linearized coupled fluid–body system.
//!
//! One step of size `Δt` solves the trapezoidal stage problem
//!
//! ```text
//! (2h²/Δt) M (vₙ − vₙ₋₁) + A v̂ + Bᵀ pₙ = 0,   B vₙ − S pₙ = 0,   v̂ = ½(vₙ₋₁ + vₙ)
//! ```
//!
//! with the body value `γ` on the body, coupled to the rigid-body update
//! `2h²(γₙ − γₙ₋₁)/Δt = 2h² ÿ(tₙ₋½) − F_z` by a relaxed subiteration. The
//! periodic regime is found by the mean-projection cycle.

use crate::config::{RelaxationMode, SimConfig};
use crate::fem::{velocity_l2_norm, Constraints, Discretization, FemError, FieldVP, ReducedFactor, Regime};
use crate::forcing::ForcingProfile;
use crate::linsolve::{dot, CsrMatrix, SolveError};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TimeloopError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("fluid–body subiteration did not converge at step {step}: last change {change:e} after {iterations} iterations")]
    Subiteration {
        step: usize,
        iterations: usize,
        change: f64,
    },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Uniform grid of one period `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeGrid {
    pub n: usize,
}

impl TimeGrid {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "at least one step");
        Self { n }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// `tᵢ = i/N`.
    pub fn t(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Midpoint of step `i` (1-based), `(i − ½)/N`.
    pub fn midpoint(&self, i: usize) -> f64 {
        (i as f64 - 0.5) / self.n as f64
    }
}

/// Relaxation of the body subiteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relaxation {
    Fixed(f64),
    Aitken { initial: f64 },
}

impl Relaxation {
    pub fn from_config(cfg: &SimConfig) -> Self {
        match cfg.coupling.relaxation {
            RelaxationMode::Fixed => Relaxation::Fixed(cfg.coupling.omega),
            RelaxationMode::Aitken => Relaxation::Aitken {
                initial: cfg.coupling.omega,
            },
        }
    }
}

/// Settings of the body subiteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub relaxation: Relaxation,
    pub tol: f64,
    pub max_iter: usize,
}

impl Coupling {
    pub fn from_config(cfg: &SimConfig) -> Self {
        Self {
            relaxation: Relaxation::from_config(cfg),
            tol: cfg.coupling.subiter_tol,
            max_iter: cfg.coupling.subiter_max,
        }
    }
}

/// Result of a converged body subiteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingOutcome {
    pub gamma: f64,
    pub iterations: usize,
    pub change: f64,
}

/// Relaxed fixed-point iteration for the body velocity of one step.
///
/// `force(γ)` returns `F_z` of the fluid state whose body value is `γ`.
/// Returns the outcome, or `Err((iterations, last change))`.
pub fn body_subiteration<F>(
    coupling: &Coupling,
    gamma_prev: f64,
    dt: f64,
    h: f64,
    accel: f64,
    mut force: F,
) -> Result<Result<CouplingOutcome, (usize, f64)>, TimeloopError>
where
    F: FnMut(f64) -> Result<f64, TimeloopError>,
{
    let inertia = 2.0 * h * h;
    let mut gamma = gamma_prev;
    let mut omega = match coupling.relaxation {
        Relaxation::Fixed(w) => w,
        Relaxation::Aitken { initial } => initial,
    };
    let mut last_residual: Option<f64> = None;
    let mut change = f64::INFINITY;
    for l in 1..=coupling.max_iter {
        let f = force(gamma)?;
        let tilde = gamma_prev + dt * accel - dt * f / inertia;
        let residual = tilde - gamma;
        if let (Relaxation::Aitken { .. }, Some(prev)) = (coupling.relaxation, last_residual) {
            let denom = residual - prev;
            if denom != 0.0 {
                omega = -omega * prev / denom;
            }
        }
        let next = gamma + omega * residual;
        change = (next - gamma).abs();
        gamma = next;
        last_residual = Some(residual);
        if change <= coupling.tol || residual == 0.0 {
            return Ok(Ok(CouplingOutcome {
                gamma,
                iterations: l,
                change,
            }));
        }
        if !gamma.is_finite() {
            break;
        }
    }
    Ok(Err((coupling.max_iter, change)))
}

/// Stage operator of the trapezoidal step on one mesh.
pub struct Stage<'a> {
    pub disc: &'a Discretization,
    pub constraints: Constraints,
    pub h: f64,
    pub dt: f64,
    /// `(2h²/Δt)M + ½A + B − S`.
    pub matrix: CsrMatrix,
    pub factor: ReducedFactor,
    /// Stage response to a unit body velocity with zero history.
    pub unit: Vec<f64>,
    /// `F_z` of [`Self::unit`].
    pub unit_force: f64,
}

impl<'a> Stage<'a> {
    pub fn new(disc: &'a Discretization, regime: Regime, h: f64, dt: f64) -> Result<Self, TimeloopError> {
        let constraints = Constraints::new(&disc.dofs, regime)?;
        let ops = &disc.ops;
        let matrix = ops.combine(&[
            (2.0 * h * h / dt, &ops.mass),
            (0.5, &ops.viscous),
            (1.0, &ops.divergence),
            (-1.0, &ops.stabilization),
        ]);
        let factor = ReducedFactor::new(&matrix, &constraints)?;
        let mut unit = vec![0.0; disc.n_dofs()];
        constraints.impose(&mut unit, 1.0);
        let r = matrix.matvec(&unit);
        factor.correct(&constraints, &mut unit, &r)?;
        let unit_force = dot(&matrix.matvec(&unit), disc.lift.values());
        Ok(Self {
            disc,
            constraints,
            h,
            dt,
            matrix,
            factor,
            unit,
            unit_force,
        })
    }

    pub fn n_dofs(&self) -> usize {
        self.disc.n_dofs()
    }

    /// Linear stage residual `K y − (2h²/Δt)M v_prev + ½A v_prev` (all rows).
    pub fn linear_residual(&self, y: &[f64], prev: &[f64]) -> Vec<f64> {
        let ops = &self.disc.ops;
        let mut r = self.matrix.matvec(y);
        ops.mass.matvec_add(-2.0 * self.h * self.h / self.dt, prev, &mut r);
        ops.viscous.matvec_add(0.5, prev, &mut r);
        r
    }

    /// `z̄ · residual`.
    pub fn lift_force(&self, residual: &[f64]) -> f64 {
        dot(residual, self.disc.lift.values())
    }

    /// Slope of the body fixed-point map, `−Δt F₁ / 2h²`.
    pub fn coupling_slope(&self) -> f64 {
        -self.dt * self.unit_force / (2.0 * self.h * self.h)
    }
}

/// One accepted time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub gamma: f64,
    /// `F_z` of the accepted state.
    pub drag: f64,
    pub subiters: usize,
}

/// Linear stepper: the stage problem is affine in the body value, so every
/// fluid solve of the subiteration is `y₀ + γ·y₁`.
pub struct LinearStepper<'a> {
    pub stage: Stage<'a>,
    pub coupling: Coupling,
}

impl<'a> LinearStepper<'a> {
    pub fn new(disc: &'a Discretization, regime: Regime, h: f64, dt: f64, coupling: Coupling) -> Result<Self, TimeloopError> {
        Ok(Self {
            stage: Stage::new(disc, regime, h, dt)?,
            coupling,
        })
    }

    /// Advances `(prev, γ_prev)` by one step with forcing sample `accel`.
    pub fn step(&self, step: usize, prev: &[f64], gamma_prev: f64, accel: f64) -> Result<(Vec<f64>, StepReport), TimeloopError> {
        let st = &self.stage;
        if prev.len() != st.n_dofs() {
            return Err(TimeloopError::Dimension(format!("state of length {} for {} dofs", prev.len(), st.n_dofs())));
        }
        let mut y0 = prev.to_vec();
        st.constraints.impose(&mut y0, 0.0);
        let r = st.linear_residual(&y0, prev);
        st.factor.correct(&st.constraints, &mut y0, &r)?;
        let f0 = st.lift_force(&st.linear_residual(&y0, prev));
        let f1 = st.unit_force;
        let outcome = body_subiteration(&self.coupling, gamma_prev, st.dt, st.h, accel, |g| Ok(f0 + g * f1))?;
        let outcome = outcome.map_err(|(iterations, change)| TimeloopError::Subiteration { step, iterations, change })?;
        let g = outcome.gamma;
        let y: Vec<f64> = y0.iter().zip(&st.unit).map(|(a, b)| a + g * b).collect();
        Ok((
            y,
            StepReport {
                gamma: g,
                drag: f0 + g * f1,
                subiters: outcome.iterations,
            },
        ))
    }
}

/// `∫ [2h² (v̇ + conv)]·z̄ + T(v̂, p):∇z̄` for the step `prev → state`.
///
/// `convection` carries the relative body velocity `γ̂` of the nonlinear
/// stage; `None` drops the convective term. A steady evaluation uses
/// `prev = state`.
pub fn surface_force_z(disc: &Discretization, state: &[f64], prev: &[f64], h: f64, dt: f64, convection: Option<f64>) -> Result<f64, TimeloopError> {
    let ops = &disc.ops;
    let n = disc.n_dofs();
    if state.len() != n || prev.len() != n {
        return Err(TimeloopError::Dimension("state does not match the mesh".into()));
    }
    let diff: Vec<f64> = state.iter().zip(prev).map(|(a, b)| a - b).collect();
    let mid: Vec<f64> = state.iter().zip(prev).map(|(a, b)| 0.5 * (a + b)).collect();
    let mut r = ops.divergence.matvec(state);
    ops.viscous.matvec_add(1.0, &mid, &mut r);
    if diff.iter().any(|&d| d != 0.0) {
        ops.mass.matvec_add(2.0 * h * h / dt, &diff, &mut r);
    }
    if let Some(gamma_hat) = convection {
        let c = crate::fem::convection_vector(&disc.cache, &disc.dofs, &mid, &mid, gamma_hat)?;
        for (ri, ci) in r.iter_mut().zip(&c) {
            *ri += 2.0 * h * h * ci;
        }
    }
    let nv = disc.dofs.n_velocity();
    Ok(dot(&r[..nv], &disc.lift.values()[..nv]))
}

/// One row of the per-step trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub cycle: usize,
    pub step: usize,
    pub t: f64,
    pub gamma: f64,
    pub drag: f64,
    pub subiters: usize,
}

/// One period of the converged linear solution.
#[derive(Debug, Clone)]
pub struct PeriodicSolution {
    /// `N + 1` states at `tₙ = n/N`.
    pub states: Vec<FieldVP>,
    /// Body velocity at `tₙ`.
    pub body_velocity: Vec<f64>,
    /// Per-step reports of the accepted cycle.
    pub steps: Vec<StepReport>,
    pub cycle_count: usize,
    pub periodic_residual: f64,
    pub residual_history: Vec<f64>,
    /// Largest discrete kinetic energy `2h²(½‖v‖² + ½γ²)` of every cycle.
    pub energy_history: Vec<f64>,
    pub mean_body_velocity: f64,
    pub mean_field_norm: f64,
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

impl PeriodicSolution {
    pub fn n_steps(&self) -> usize {
        self.states.len() - 1
    }
}

/// Midpoint-rule time average of a sampled trajectory `x₀ … x_N`.
pub fn midpoint_average(samples: &[&[f64]]) -> Vec<f64> {
    let n = samples.len() - 1;
    let mut out = vec![0.0; samples[0].len()];
    for w in samples.windows(2) {
        for (o, (a, b)) in out.iter_mut().zip(w[0].iter().zip(w[1])) {
            *o += 0.5 * (a + b);
        }
    }
    out.iter_mut().for_each(|v| *v /= n as f64);
    out
}

fn midpoint_scalar_average(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / n as f64
}

/// Period average of the fields.
pub fn time_average_field(sol: &PeriodicSolution) -> FieldVP {
    let refs: Vec<&[f64]> = sol.states.iter().map(|s| s.values.as_slice()).collect();
    let mut f = sol.states[0].clone();
    f.values = midpoint_average(&refs);
    f.time_tag = 0.5;
    f
}

/// Period average of the body velocity.
pub fn time_average_velocity(sol: &PeriodicSolution) -> f64 {
    midpoint_scalar_average(&sol.body_velocity)
}

fn kinetic_energy(disc: &Discretization, h: f64, x: &[f64], gamma: f64) -> f64 {
    let v = velocity_l2_norm(&disc.ops, x);
    2.0 * h * h * 0.5 * (v * v + gamma * gamma)
}

/// Integrates whole periods of the linear problem from `(x0, γ0)` with the
/// mean-projection correction between cycles.
pub fn seek_periodic_from(
    disc: &Discretization,
    cfg: &SimConfig,
    force: &ForcingProfile,
    regime: Regime,
    x0: Vec<f64>,
    gamma0: f64,
) -> Result<PeriodicSolution, TimeloopError> {
    let n = force.n;
    let grid = TimeGrid::new(n);
    let h = cfg.problem.h;
    let stepper = LinearStepper::new(disc, regime, h, grid.dt(), Coupling::from_config(cfg))?;
    let tol = cfg.time.periodic_tol;
    let mut start = x0;
    let mut gamma_start = gamma0;
    stepper.stage.constraints.impose(&mut start, gamma_start);
    let mut history = Vec::new();
    let mut energy_history = Vec::new();
    let mut trace = Vec::new();
    let mut best: Option<PeriodicSolution> = None;
    for cycle in 1..=cfg.time.max_cycles {
        let mut states = Vec::with_capacity(n + 1);
        let mut gammas = Vec::with_capacity(n + 1);
        let mut steps = Vec::with_capacity(n);
        states.push(start.clone());
        gammas.push(gamma_start);
        let mut emax = kinetic_energy(disc, h, &start, gamma_start);
        for i in 1..=n {
            let (x, rep) = stepper.step(i, &states[i - 1], gammas[i - 1], force.sample(i - 1))?;
            emax = emax.max(kinetic_energy(disc, h, &x, rep.gamma));
            trace.push(TraceRow {
                cycle,
                step: i,
                t: grid.t(i),
                gamma: rep.gamma,
                drag: rep.drag,
                subiters: rep.subiters,
            });
            states.push(x);
            gammas.push(rep.gamma);
            steps.push(rep);
        }
        energy_history.push(emax);
        let diff: Vec<f64> = states[n].iter().zip(&states[0]).map(|(a, b)| a - b).collect();
        let residual = velocity_l2_norm(&disc.ops, &diff) + (gammas[n] - gammas[0]).abs();
        history.push(residual);
        let refs: Vec<&[f64]> = states.iter().map(|s| s.as_slice()).collect();
        let mean = midpoint_average(&refs);
        let mean_gamma = midpoint_scalar_average(&gammas);
        let converged = residual < tol;
        let candidate = PeriodicSolution {
            states: states
                .iter()
                .enumerate()
                .map(|(i, s)| FieldVP::from_values(&disc.dofs, s.clone(), grid.t(i)))
                .collect(),
            body_velocity: gammas.clone(),
            steps,
            cycle_count: cycle,
            periodic_residual: residual,
            residual_history: history.clone(),
            energy_history: energy_history.clone(),
            mean_body_velocity: mean_gamma,
            mean_field_norm: velocity_l2_norm(&disc.ops, &mean),
            converged,
            trace: Vec::new(),
        };
        log::debug!("cycle {cycle}: periodic residual {residual:e}, mean gamma {mean_gamma:e}");
        if converged {
            let mut sol = candidate;
            sol.trace = trace;
            return Ok(sol);
        }
        if best.as_ref().map_or(true, |b| residual <= b.periodic_residual) {
            best = Some(candidate);
        }
        start = states[n].iter().zip(&mean).map(|(a, m)| a - m).collect();
        gamma_start = gammas[n] - mean_gamma;
    }
    let mut sol = best.expect("at least one cycle");
    sol.residual_history = history;
    sol.energy_history = energy_history;
    sol.trace = trace;
    Ok(sol)
}

/// [`seek_periodic_from`] started at rest.
pub fn seek_periodic(disc: &Discretization, cfg: &SimConfig, force: &ForcingProfile, regime: Regime) -> Result<PeriodicSolution, TimeloopError> {
    seek_periodic_from(disc, cfg, force, regime, vec![0.0; disc.n_dofs()], 0.0)
}

/// Writes the trace as CSV with columns `cycle,step,t,gamma,drag,subiters`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "cycle,step,t,gamma,drag,subiters")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.cycle,
            r.step,
            crate::output::fmt17(r.t),
            crate::output::fmt17(r.gamma),
            crate::output::fmt17(r.drag),
            r.subiters
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupling(relaxation: Relaxation) -> Coupling {
        Coupling {
            relaxation,
            tol: 1e-12,
            max_iter: 100,
        }
    }

    #[test]
    fn grid_is_exact() {
        let g = TimeGrid::new(200);
        assert_eq!(g.t(200), 1.0);
        assert_eq!(g.midpoint(1), 0.0025);
        assert_eq!(g.dt() * 200.0, 1.0);
    }

    #[test]
    fn aitken_solves_affine_map_in_few_steps() {
        // F = 3 + 40 γ, Δt = 0.1, h = 1: slope −2, so fixed ω = 0.8 diverges
        let force = |g: f64| Ok(3.0 + 40.0 * g);
        let fixed = body_subiteration(&coupling(Relaxation::Fixed(0.8)), 0.0, 0.1, 1.0, 1.0, force).unwrap();
        assert!(fixed.is_err());
        let ait = body_subiteration(&coupling(Relaxation::Aitken { initial: 0.8 }), 0.0, 0.1, 1.0, 1.0, force)
            .unwrap()
            .unwrap();
        let exact = (0.1 - 0.05 * 3.0) / (1.0 + 0.05 * 40.0);
        assert!((ait.gamma - exact).abs() < 1e-12);
        assert!(ait.iterations <= 4);
    }

    #[test]
    fn relaxation_factors_share_the_fixed_point() {
        let force = |g: f64| Ok(1.0 + 5.0 * g);
        let a = body_subiteration(&coupling(Relaxation::Fixed(1.0)), 0.2, 0.1, 1.0, 0.5, force).unwrap().unwrap();
        let b = body_subiteration(&coupling(Relaxation::Fixed(0.8)), 0.2, 0.1, 1.0, 0.5, force).unwrap().unwrap();
        assert!((a.gamma - b.gamma).abs() < 1e-11);
    }

    #[test]
    fn averages_of_simple_trajectories() {
        let c = [2.5; 11];
        assert_eq!(midpoint_scalar_average(&c), 2.5);
        let cosine: Vec<f64> = (0..=40).map(|i| (2.0 * std::f64::consts::PI * i as f64 / 40.0).cos()).collect();
        assert!(midpoint_scalar_average(&cosine).abs() < 1e-14);
    }
}
