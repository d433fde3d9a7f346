//! Newton iteration with a backtracking guard.

use super::csr::{norm2, CsrMatrix};
use super::direct::LuFactor;
use super::SolveError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Absolute tolerance on `‖F(x)‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    /// Halvings allowed when a full step increases the residual.
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20,
            max_halvings: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    /// Residual norms, starting with the initial guess.
    pub trace: Vec<f64>,
}

impl NewtonOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// A nonlinear system `F(x) = 0` whose Newton correction can be computed.
pub trait NewtonProblem {
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>, SolveError>;
    /// Solves `J(x) δ = r`.
    fn solve_jacobian(&mut self, x: &[f64], r: &[f64]) -> Result<Vec<f64>, SolveError>;
}

/// Runs Newton from `x0` until `‖F(x)‖ ≤ tol`.
pub fn newton_solve<P: NewtonProblem + ?Sized>(
    problem: &mut P,
    x0: Vec<f64>,
    opts: NewtonOptions,
) -> Result<NewtonOutcome, SolveError> {
    let mut x = x0;
    let mut r = problem.residual(&x)?;
    let mut rn = norm2(&r);
    let mut trace = vec![rn];
    let mut growth = 0;
    for _ in 0..opts.max_iter {
        if rn <= opts.tol {
            return Ok(NewtonOutcome { x, trace });
        }
        if !rn.is_finite() {
            return Err(SolveError::Diverged { trace });
        }
        let delta = problem.solve_jacobian(&x, &r)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(xi, di)| xi - step * di).collect();
            let rt = problem.residual(&trial)?;
            let rtn = norm2(&rt);
            if rtn.is_finite() && rtn < rn {
                accepted = Some((trial, rt, rtn));
                break;
            }
            if accepted.is_none() && step == 1.0 && rtn.is_finite() {
                // keep the full step if no halving helps
                accepted = Some((trial, rt, rtn));
            }
            step *= 0.5;
            if let Some((_, _, n)) = &accepted {
                if *n < rn {
                    break;
                }
            }
        }
        let Some((xn, rt, rtn)) = accepted else {
            return Err(SolveError::Diverged { trace });
        };
        growth = if rtn > rn { growth + 1 } else { 0 };
        x = xn;
        r = rt;
        rn = rtn;
        trace.push(rn);
        if growth >= 3 {
            return Err(SolveError::Diverged { trace });
        }
    }
    if rn <= opts.tol {
        return Ok(NewtonOutcome { x, trace });
    }
    Err(SolveError::NewtonMaxIterations { trace })
}

struct Closures<F, J> {
    residual: F,
    jacobian: J,
}

impl<F, J> NewtonProblem for Closures<F, J>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> CsrMatrix,
{
    fn residual(&mut self, x: &[f64]) -> Result<Vec<f64>, SolveError> {
        Ok((self.residual)(x))
    }

    fn solve_jacobian(&mut self, x: &[f64], r: &[f64]) -> Result<Vec<f64>, SolveError> {
        LuFactor::new(&(self.jacobian)(x))?.solve(r)
    }
}

/// Newton with an assembled Jacobian and direct solves.
pub fn newton<F, J>(
    residual: F,
    jacobian: J,
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome, SolveError>
where
    F: FnMut(&[f64]) -> Vec<f64>,
    J: FnMut(&[f64]) -> CsrMatrix,
{
    let mut p = Closures { residual, jacobian };
    newton_solve(
        &mut p,
        x0,
        NewtonOptions {
            tol,
            max_iter,
            ..Default::default()
        },
    )
}

/// Compares `J·v` against a central finite difference of `F`; returns the
/// relative discrepancy.
pub fn finite_difference_probe<F>(mut residual: F, jv: &[f64], x: &[f64], v: &[f64], eps: f64) -> f64
where
    F: FnMut(&[f64]) -> Vec<f64>,
{
    let xp: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + eps * b).collect();
    let xm: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - eps * b).collect();
    let (rp, rm) = (residual(&xp), residual(&xm));
    let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * eps)).collect();
    let diff: Vec<f64> = fd.iter().zip(jv).map(|(a, b)| a - b).collect();
    norm2(&diff) / norm2(jv).max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_residual_in_one_step() {
        let a = CsrMatrix::from_triplets(2, &[(0, 0, 3.0), (0, 1, 1.0), (1, 1, 2.0)]);
        let b = [5.0, 4.0];
        let out = newton(
            |x| {
                let mut r = a.matvec(x);
                r[0] -= b[0];
                r[1] -= b[1];
                r
            },
            |_| a.clone(),
            vec![0.0, 0.0],
            1e-12,
            10,
        )
        .unwrap();
        assert_eq!(out.iterations(), 1);
        assert!((out.x[0] - 1.0).abs() < 1e-14 && (out.x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_square_root() {
        let out = newton(
            |x| vec![x[0] * x[0] - 4.0],
            |x| CsrMatrix::from_triplets(1, &[(0, 0, 2.0 * x[0])]),
            vec![3.0],
            1e-12,
            6,
        )
        .unwrap();
        assert!((out.x[0] - 2.0).abs() < 1e-12);
        assert!(out.iterations() <= 6);
        // quadratic convergence
        let t = &out.trace;
        assert!(t[3] < 10.0 * t[2] * t[2]);
    }

    #[test]
    fn no_root_reports_failure() {
        let res = newton(
            |x| vec![x[0] * x[0] + 1.0],
            |x| CsrMatrix::from_triplets(1, &[(0, 0, 2.0 * x[0])]),
            vec![0.5],
            1e-12,
            10,
        );
        assert!(res.is_err());
    }

    #[test]
    fn probe_matches_analytic_derivative() {
        let x = [0.3f64, -1.2];
        let v = [1.0, 0.5];
        let jv = [2.0 * x[0] * v[0] + v[1], x[1].cos() * v[1]];
        let rel = finite_difference_probe(|y| vec![y[0] * y[0] + y[1], y[1].sin()], &jv, &x, &v, 1e-6);
        assert!(rel < 1e-8);
    }
}
