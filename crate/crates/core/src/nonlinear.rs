//! Direct integration of the nonlinear coupled Navier–Stokes / rigid-body
//! system in the body frame until the motion is periodic.
//!
//! The stage equation of one step is
//!
//! ```text
//! (2h²/Δt) M (vₙ − vₙ₋₁) + A v̂ + Bᵀ pₙ + 2h² c(v̂ − γ̂ e_z; v̂) = 0,   B vₙ − S pₙ = 0
//! ```
//!
//! with `v̂ = ½(vₙ₋₁ + vₙ)`, `γ̂ = ½(γₙ₋₁ + γₙ)`, every outer boundary at rest
//! and one pressure value pinned. Newton's method solves it for a given body
//! velocity; the body velocity itself follows from the relaxed subiteration.

use crate::auxstokes::{resistance, ResistanceResult};
use crate::config::SimConfig;
use crate::fem::{
    convection_jacobian, convection_vector, velocity_l2_norm, Constraints, Discretization, FemError, ReducedFactor, Regime,
};
use crate::forcing::ForcingProfile;
use crate::linsolve::{dot, gmres, norm2, CsrMatrix, GmresOptions, SolveError};
use crate::timeloop::{body_subiteration, seek_periodic, Coupling, Stage, StepReport, TimeGrid, TimeloopError};
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NonlinearError {
    #[error(transparent)]
    Timeloop(#[from] TimeloopError),
    #[error("Newton iteration failed at step {step}: residual {residual:e} after {iterations} iterations")]
    Newton {
        step: usize,
        iterations: usize,
        residual: f64,
    },
    #[error("linear start-up iteration did not become periodic: residual {0:e}")]
    StartUp(f64),
}

impl From<FemError> for NonlinearError {
    fn from(e: FemError) -> Self {
        NonlinearError::Timeloop(e.into())
    }
}

impl From<SolveError> for NonlinearError {
    fn from(e: SolveError) -> Self {
        NonlinearError::Timeloop(e.into())
    }
}

/// Newton statistics of one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NewtonStats {
    pub solves: usize,
    pub iterations: usize,
    pub gmres_iterations: usize,
}

/// Stepper for the nonlinear stage problem.
pub struct NonlinearStepper<'a> {
    pub stage: Stage<'a>,
    pub coupling: Coupling,
    pub newton_tol: f64,
    pub newton_max: usize,
}

struct NewtonState {
    gamma: f64,
    y: Vec<f64>,
    iterations: usize,
    gmres_iterations: usize,
    solves: usize,
}

impl<'a> NonlinearStepper<'a> {
    pub fn new(disc: &'a Discretization, cfg: &SimConfig) -> Result<Self, NonlinearError> {
        let dt = 1.0 / cfg.time.n_steps as f64;
        Ok(Self {
            stage: Stage::new(disc, Regime::Closed, cfg.problem.h, dt)?,
            coupling: Coupling::from_config(cfg),
            newton_tol: cfg.coupling.newton_tol,
            newton_max: cfg.coupling.newton_max,
        })
    }

    fn inertia(&self) -> f64 {
        2.0 * self.stage.h * self.stage.h
    }

    /// Full stage residual including the convective term.
    pub fn residual(&self, y: &[f64], prev: &[f64], gamma_hat: f64) -> Result<Vec<f64>, NonlinearError> {
        let st = &self.stage;
        let mut r = st.linear_residual(y, prev);
        let mid: Vec<f64> = y.iter().zip(prev).map(|(a, b)| 0.5 * (a + b)).collect();
        let c = convection_vector(&st.disc.cache, &st.disc.dofs, &mid, &mid, gamma_hat)?;
        let k = self.inertia();
        for (ri, ci) in r.iter_mut().zip(&c) {
            *ri += k * ci;
        }
        Ok(r)
    }

    /// Derivative of [`Self::residual`] with respect to `y`.
    pub fn jacobian(&self, y: &[f64], prev: &[f64], gamma_hat: f64) -> Result<CsrMatrix, NonlinearError> {
        let st = &self.stage;
        let mid: Vec<f64> = y.iter().zip(prev).map(|(a, b)| 0.5 * (a + b)).collect();
        let jc = convection_jacobian(&st.disc.cache, &st.disc.dofs, &st.disc.ops, &mid, gamma_hat)?;
        Ok(st.disc.ops.combine(&[(1.0, &st.matrix), (0.5 * self.inertia(), &jc)]))
    }

    /// Newton solve of the stage problem for body velocity `gamma`, started at `y`.
    fn newton(&self, step: usize, y: &mut Vec<f64>, prev: &[f64], gamma_prev: f64, gamma: f64) -> Result<(usize, usize), NonlinearError> {
        let st = &self.stage;
        let cons = &st.constraints;
        let gamma_hat = 0.5 * (gamma_prev + gamma);
        cons.impose(y, gamma);
        let scale = {
            let a = norm2(&st.matrix.matvec(y));
            let b = norm2(&st.disc.ops.mass.matvec(prev)) * self.inertia() / st.dt;
            (a + b).max(1e-300)
        };
        let reducer = cons.reducer(&st.matrix.pattern);
        let mut gmres_total = 0;
        let mut res_norm = f64::INFINITY;
        for it in 0..=self.newton_max {
            let r = self.residual(y, prev, gamma_hat)?;
            let rf = cons.restrict(&r);
            res_norm = norm2(&rf);
            if res_norm <= self.newton_tol * scale {
                return Ok((it, gmres_total));
            }
            if it == self.newton_max {
                break;
            }
            let jff = reducer.reduce(&self.jacobian(y, prev, gamma_hat)?);
            let b: Vec<f64> = rf.iter().map(|v| -v).collect();
            let out = gmres(
                |x, out| jff.matvec_into(x, out),
                &st.factor.lu,
                &b,
                vec![0.0; b.len()],
                GmresOptions {
                    restart: 100,
                    tol: 1e-8,
                    max_iter: 400,
                },
            );
            gmres_total += out.iterations;
            cons.add_reduced(y, &out.x, 1.0);
        }
        Err(NonlinearError::Newton {
            step,
            iterations: self.newton_max,
            residual: res_norm / scale,
        })
    }

    /// Advances `(prev, γ_prev)` by one step with forcing sample `accel`.
    pub fn step(&self, step: usize, prev: &[f64], gamma_prev: f64, accel: f64) -> Result<(Vec<f64>, StepReport, NewtonStats), NonlinearError> {
        let st = &self.stage;
        let state = RefCell::new(NewtonState {
            gamma: gamma_prev,
            y: prev.to_vec(),
            iterations: 0,
            gmres_iterations: 0,
            solves: 0,
        });
        let mut newton_error: Option<NonlinearError> = None;
        let outcome = body_subiteration(&self.coupling, gamma_prev, st.dt, st.h, accel, |g| {
            let mut s = state.borrow_mut();
            // predictor: the linear unit response carries the change of body value
            let dg = g - s.gamma;
            let mut y = std::mem::take(&mut s.y);
            for (yi, ui) in y.iter_mut().zip(&st.unit) {
                *yi += dg * ui;
            }
            match self.newton(step, &mut y, prev, gamma_prev, g) {
                Ok((its, gm)) => {
                    s.iterations += its;
                    s.gmres_iterations += gm;
                    s.solves += 1;
                }
                Err(e) => {
                    let residual = match &e {
                        NonlinearError::Newton { residual, .. } => *residual,
                        _ => f64::NAN,
                    };
                    newton_error = Some(e);
                    return Err(TimeloopError::Solve(SolveError::Inaccurate { residual }));
                }
            }
            let r = self.residual(&y, prev, 0.5 * (gamma_prev + g)).map_err(|e| match e {
                NonlinearError::Timeloop(t) => t,
                other => TimeloopError::Dimension(other.to_string()),
            })?;
            s.y = y;
            s.gamma = g;
            Ok(dot(&r, st.disc.lift.values()))
        });
        let outcome = match outcome {
            Ok(o) => o,
            Err(e) => return Err(newton_error.unwrap_or(NonlinearError::Timeloop(e))),
        };
        let outcome = outcome.map_err(|(iterations, change)| TimeloopError::Subiteration { step, iterations, change })?;
        // final state carries the accepted body value exactly
        let s = state.into_inner();
        let mut y = s.y;
        let mut stats = NewtonStats {
            solves: s.solves,
            iterations: s.iterations,
            gmres_iterations: s.gmres_iterations,
        };
        let g = outcome.gamma;
        let dg = g - s.gamma;
        if dg != 0.0 {
            for (yi, ui) in y.iter_mut().zip(&st.unit) {
                *yi += dg * ui;
            }
            let (its, gm) = self.newton(step, &mut y, prev, gamma_prev, g)?;
            stats.iterations += its;
            stats.gmres_iterations += gm;
            stats.solves += 1;
        }
        let drag = dot(&self.residual(&y, prev, 0.5 * (gamma_prev + g))?, st.disc.lift.values());
        Ok((
            y,
            StepReport {
                gamma: g,
                drag,
                subiters: outcome.iterations,
            },
            stats,
        ))
    }
}

/// Summary of one simulated period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub period: usize,
    pub mean_gamma: f64,
    /// `‖x(end) − x(start)‖ + |γ(end) − γ(start)|`.
    pub state_change: f64,
    pub newton_iterations: usize,
    pub subiterations: usize,
}

#[derive(Debug, Clone)]
pub struct NonlinearResult {
    /// Mean body velocity of the last period.
    pub mean_gamma: f64,
    pub periods: Vec<PeriodRecord>,
    /// Body velocity at every time level of every simulated period (`periods·N + 1` values).
    pub gamma_history: Vec<f64>,
    pub n_steps: usize,
    pub cycles_run: usize,
    /// `|mean_k − mean_{k−1}|` of the last period.
    pub cycle_residual: f64,
    pub converged: bool,
    /// Linear prediction used for the start values.
    pub linear_start_residual: f64,
}

/// Integrates the nonlinear problem period by period from the periodic
/// solution of its linearization.
pub fn run_to_periodic(disc: &Discretization, cfg: &SimConfig, force: &ForcingProfile) -> Result<NonlinearResult, NonlinearError> {
    let n = force.n;
    let linear = seek_periodic(disc, cfg, force, Regime::Closed)?;
    if !linear.converged {
        return Err(NonlinearError::StartUp(linear.periodic_residual));
    }
    let stepper = NonlinearStepper::new(disc, cfg)?;
    let mean_flow = if cfg.time.mean_flow_correction {
        Some(MeanFlow::new(disc, cfg.problem.h)?)
    } else {
        None
    };
    let mut x = linear.states[0].values.clone();
    let mut gamma = linear.body_velocity[0];
    let mut gamma_history = vec![gamma];
    let mut periods: Vec<PeriodRecord> = Vec::new();
    let mut converged = false;
    let mut cycle_residual = f64::INFINITY;
    for k in 1..=cfg.time.max_periods {
        let start = x.clone();
        let gamma_start = gamma;
        let mut newton_iterations = 0;
        let mut subiterations = 0;
        let mut traj = Vec::with_capacity(n + 1);
        traj.push(gamma);
        let mut sums = mean_flow.as_ref().map(|_| PeriodSums::new(disc.n_dofs()));
        for i in 1..=n {
            let (y, rep, stats) = stepper.step(i, &x, gamma, force.sample(i - 1))?;
            if let Some(s) = sums.as_mut() {
                s.add(disc, &x, &y, 0.5 * (gamma + rep.gamma))?;
            }
            x = y;
            gamma = rep.gamma;
            newton_iterations += stats.iterations;
            subiterations += rep.subiters;
            traj.push(gamma);
        }
        let mean_gamma = traj.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / n as f64;
        let diff: Vec<f64> = x.iter().zip(&start).map(|(a, b)| a - b).collect();
        let state_change = velocity_l2_norm(&disc.ops, &diff) + (gamma - gamma_start).abs();
        gamma_history.extend_from_slice(&traj[1..]);
        if let Some(last) = periods.last() {
            cycle_residual = (mean_gamma - last.mean_gamma).abs();
        }
        log::info!("period {k}: mean gamma {mean_gamma:.10e}, state change {state_change:.3e}, newton {newton_iterations}");
        periods.push(PeriodRecord {
            period: k,
            mean_gamma,
            state_change,
            newton_iterations,
            subiterations,
        });
        if cycle_residual <= cfg.time.cycle_tol_mean && state_change <= cfg.time.cycle_tol_state {
            converged = true;
            break;
        }
        if let (Some(mf), Some(s)) = (mean_flow.as_ref(), sums) {
            let (w, w_gamma) = mf.solve(&s.convection(n))?;
            let mean = s.state(n);
            let theta = cfg.time.mean_flow_relaxation;
            for ((xi, mi), wi) in x.iter_mut().zip(&mean).zip(&w) {
                *xi += theta * (wi - mi);
            }
            gamma += theta * (w_gamma - mean_gamma);
            log::debug!("period {k}: mean flow body velocity {w_gamma:.10e}");
        }
    }
    Ok(NonlinearResult {
        mean_gamma: periods.last().map(|p| p.mean_gamma).unwrap_or(0.0),
        cycles_run: periods.len(),
        periods,
        gamma_history,
        n_steps: n,
        cycle_residual,
        converged,
        linear_start_residual: linear.periodic_residual,
    })
}

/// Running sums of one period for the mean-flow correction.
struct PeriodSums {
    state: Vec<f64>,
    convection: Vec<f64>,
}

impl PeriodSums {
    fn new(n: usize) -> Self {
        Self {
            state: vec![0.0; n],
            convection: vec![0.0; n],
        }
    }

    fn add(&mut self, disc: &Discretization, prev: &[f64], next: &[f64], gamma_hat: f64) -> Result<(), NonlinearError> {
        let mid: Vec<f64> = prev.iter().zip(next).map(|(a, b)| 0.5 * (a + b)).collect();
        let c = convection_vector(&disc.cache, &disc.dofs, &mid, &mid, gamma_hat)?;
        for ((s, cs), (m, ci)) in self.state.iter_mut().zip(self.convection.iter_mut()).zip(mid.iter().zip(&c)) {
            *s += m;
            *cs += ci;
        }
        Ok(())
    }

    fn state(&self, n: usize) -> Vec<f64> {
        self.state.iter().map(|v| v / n as f64).collect()
    }

    fn convection(&self, n: usize) -> Vec<f64> {
        self.convection.iter().map(|v| v / n as f64).collect()
    }
}

/// Steady Stokes problem for the period mean of a periodic nonlinear flow:
/// `A w̄ + Bᵀp̄ + 2h² c̄ = 0` with the body velocity chosen so that the mean
/// force on the body vanishes.
struct MeanFlow<'a> {
    disc: &'a Discretization,
    constraints: Constraints,
    factor: ReducedFactor,
    aux: ResistanceResult,
    inertia: f64,
}

impl<'a> MeanFlow<'a> {
    fn new(disc: &'a Discretization, h: f64) -> Result<Self, NonlinearError> {
        let constraints = Constraints::new(&disc.dofs, Regime::Closed)?;
        let factor = ReducedFactor::new(&disc.stokes_matrix(), &constraints)?;
        let aux = resistance(disc)?;
        Ok(Self {
            disc,
            constraints,
            factor,
            aux,
            inertia: 2.0 * h * h,
        })
    }

    /// Mean state and mean body velocity for the averaged convection `c̄`.
    fn solve(&self, convection: &[f64]) -> Result<(Vec<f64>, f64), NonlinearError> {
        let disc = self.disc;
        let residual = |x: &[f64]| {
            let mut r = disc.stokes_action(x);
            for (ri, ci) in r.iter_mut().zip(convection) {
                *ri += self.inertia * ci;
            }
            r
        };
        let mut w = vec![0.0; disc.n_dofs()];
        let r0 = residual(&w);
        self.factor.correct(&self.constraints, &mut w, &r0)?;
        let force = dot(&residual(&w), disc.lift.values());
        let gamma = -force / self.aux.k;
        for (wi, hi) in w.iter_mut().zip(&self.aux.h3.values) {
            *wi += gamma * hi;
        }
        Ok((w, gamma))
    }
}

/// `(t, η(t), γ̄·t)` with `η(t) = ∫₀ᵗ γ` by the midpoint rule over all recorded periods.
pub fn trajectory(result: &NonlinearResult) -> Vec<(f64, f64, f64)> {
    trajectory_of(&result.gamma_history, result.n_steps, result.mean_gamma)
}

/// [`trajectory`] for a raw body velocity history.
pub fn trajectory_of(gammas: &[f64], n_steps: usize, mean_gamma: f64) -> Vec<(f64, f64, f64)> {
    let grid = TimeGrid::new(n_steps);
    let dt = grid.dt();
    let mut out = Vec::with_capacity(gammas.len());
    let mut eta = 0.0;
    out.push((0.0, 0.0, 0.0));
    for (i, w) in gammas.windows(2).enumerate() {
        eta += dt * 0.5 * (w[0] + w[1]);
        let t = (i + 1) as f64 * dt;
        out.push((t, eta, mean_gamma * t));
    }
    out
}

/// CSV with columns `period,mean_gamma,state_change`.
pub fn write_periods_csv<W: Write>(periods: &[PeriodRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "period,mean_gamma,state_change")?;
    for p in periods {
        writeln!(
            out,
            "{},{},{}",
            p.period,
            crate::output::fmt17(p.mean_gamma),
            crate::output::fmt17(p.state_change)
        )?;
    }
    Ok(())
}

/// CSV with columns `t,eta,mean_line`.
pub fn write_trajectory_csv<W: Write>(rows: &[(f64, f64, f64)], mut out: W) -> std::io::Result<()> {
    writeln!(out, "t,eta,mean_line")?;
    for (t, e, l) in rows {
        writeln!(
            out,
            "{},{},{}",
            crate::output::fmt17(*t),
            crate::output::fmt17(*e),
            crate::output::fmt17(*l)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_of_constant_velocity_is_linear() {
        let g = vec![0.3; 41];
        let tr = trajectory_of(&g, 20, 0.3);
        for (t, eta, line) in tr {
            assert!((eta - 0.3 * t).abs() < 1e-15);
            assert!((line - 0.3 * t).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mean_sinusoid_returns_to_start() {
        let n = 64;
        let g: Vec<f64> = (0..=n).map(|i| (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin()).collect();
        let tr = trajectory_of(&g, n, 0.0);
        assert!(tr.last().unwrap().1.abs() < 1e-13);
    }
}
