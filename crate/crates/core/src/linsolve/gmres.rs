//! Restarted GMRES with right preconditioning.

use super::csr::{dot, norm2, CsrMatrix, SparseSystem};
use super::direct::LuFactor;
use super::SolveError;

pub trait Preconditioner {
    /// `z ← P⁻¹ r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl Preconditioner for LuFactor {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
        self.apply_in_place(z);
    }
}

/// Zero-fill incomplete LU on the matrix pattern.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, SolveError> {
        let p = a.pattern.clone();
        let n = p.n;
        let mut diag = vec![usize::MAX; n];
        for (i, d) in diag.iter_mut().enumerate() {
            *d = p.find(i, i).ok_or(SolveError::Singular { pivot: i })?;
        }
        let mut v = a.vals.clone();
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in p.row(i) {
                pos[p.col_idx[k]] = k;
            }
            for k in p.row(i) {
                let j = p.col_idx[k];
                if j >= i {
                    break;
                }
                let pivot = v[diag[j]];
                if pivot == 0.0 {
                    return Err(SolveError::Singular { pivot: j });
                }
                v[k] /= pivot;
                let lij = v[k];
                for kk in (diag[j] + 1)..p.row_ptr[j + 1] {
                    let c = p.col_idx[kk];
                    let t = pos[c];
                    if t != usize::MAX && t >= p.row_ptr[i] && t < p.row_ptr[i + 1] {
                        v[t] -= lij * v[kk];
                    }
                }
            }
            for k in p.row(i) {
                pos[p.col_idx[k]] = usize::MAX;
            }
            if v[diag[i]] == 0.0 {
                return Err(SolveError::Singular { pivot: i });
            }
        }
        Ok(Self {
            lu: CsrMatrix { pattern: p, vals: v },
            diag,
        })
    }
}

impl Preconditioner for Ilu0 {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let p = &*self.lu.pattern;
        let v = &self.lu.vals;
        for i in 0..p.n {
            let mut s = r[i];
            for k in p.row_ptr[i]..self.diag[i] {
                s -= v[k] * z[p.col_idx[k]];
            }
            z[i] = s;
        }
        for i in (0..p.n).rev() {
            let mut s = z[i];
            for k in (self.diag[i] + 1)..p.row_ptr[i + 1] {
                s -= v[k] * z[p.col_idx[k]];
            }
            z[i] = s / v[self.diag[i]];
        }
    }
}

/// Preconditioner choice for [`solve_gmres`].
pub enum PreconditionerKind<'a> {
    None,
    Ilu0,
    Factorized(&'a LuFactor),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self {
            restart: 100,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final relative residual `‖b − Ax‖/‖b‖`.
    pub residual: f64,
    pub converged: bool,
}

impl GmresOutcome {
    pub fn into_result(self) -> Result<Vec<f64>, SolveError> {
        if self.converged {
            Ok(self.x)
        } else {
            Err(SolveError::MaxIterations {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

/// GMRES on a system with the chosen preconditioner.
pub fn solve_gmres(
    system: &SparseSystem,
    preconditioner: PreconditionerKind<'_>,
    opts: GmresOptions,
) -> Result<GmresOutcome, SolveError> {
    let x0 = vec![0.0; system.rhs.len()];
    match preconditioner {
        PreconditionerKind::None => Ok(gmres(
            |x, y| system.matrix.matvec_into(x, y),
            &IdentityPreconditioner,
            &system.rhs,
            x0,
            opts,
        )),
        PreconditionerKind::Ilu0 => {
            let ilu = Ilu0::new(&system.matrix)?;
            Ok(gmres(|x, y| system.matrix.matvec_into(x, y), &ilu, &system.rhs, x0, opts))
        }
        PreconditionerKind::Factorized(lu) => Ok(gmres(
            |x, y| system.matrix.matvec_into(x, y),
            lu,
            &system.rhs,
            x0,
            opts,
        )),
    }
}

/// Right-preconditioned restarted GMRES for an operator given as a closure.
pub fn gmres<A, P>(mut apply: A, precond: &P, b: &[f64], mut x: Vec<f64>, opts: GmresOptions) -> GmresOutcome
where
    A: FnMut(&[f64], &mut [f64]),
    P: Preconditioner + ?Sized,
{
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return GmresOutcome {
            x: vec![0.0; n],
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let m = opts.restart.max(1);
    let mut iterations = 0;
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    loop {
        apply(&x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if rel <= opts.tol || iterations >= opts.max_iter {
            return GmresOutcome {
                x,
                iterations,
                residual: rel,
                converged: rel <= opts.tol,
            };
        }
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            precond.apply(&basis[k], &mut z);
            apply(&z, &mut w);
            for j in 0..=k {
                let hjk = dot(&w, &basis[j]);
                h[j][k] = hjk;
                for (wi, vi) in w.iter_mut().zip(&basis[j]) {
                    *wi -= hjk * vi;
                }
            }
            let hn = norm2(&w);
            h[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = (h[k][k] * h[k][k] + h[k + 1][k] * h[k + 1][k]).sqrt();
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= opts.tol || hn == 0.0 || iterations >= opts.max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in (i + 1)..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (ui, vi) in u.iter_mut().zip(&basis[j]) {
                *ui += yj * vi;
            }
        }
        precond.apply(&u, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        if k_used == 0 {
            apply(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let rel = norm2(&r) / bnorm;
            return GmresOutcome {
                x,
                iterations,
                residual: rel,
                converged: rel <= opts.tol,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.5));
            }
        }
        CsrMatrix::from_triplets(n, &t)
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let sys = SparseSystem {
            matrix: CsrMatrix::identity(5),
            rhs: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        };
        let out = solve_gmres(&sys, PreconditionerKind::None, GmresOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn diagonal_with_ilu0_in_one_iteration() {
        let sys = SparseSystem {
            matrix: CsrMatrix::from_triplets(3, &[(0, 0, 2.0), (1, 1, 5.0), (2, 2, -3.0)]),
            rhs: vec![1.0, 1.0, 1.0],
        };
        let out = solve_gmres(&sys, PreconditionerKind::Ilu0, GmresOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
    }

    #[test]
    fn nonsymmetric_system_agrees_with_direct() {
        let m = tridiag(60);
        let b: Vec<f64> = (0..60).map(|i| (i as f64 * 0.3).sin()).collect();
        let sys = SparseSystem { matrix: m, rhs: b };
        let direct = super::super::solve_direct(&sys).unwrap();
        for pc in [PreconditionerKind::None, PreconditionerKind::Ilu0] {
            let out = solve_gmres(&sys, pc, GmresOptions { restart: 10, ..Default::default() }).unwrap();
            assert!(out.converged);
            let err = norm2(&out.x.iter().zip(&direct).map(|(a, b)| a - b).collect::<Vec<_>>());
            assert!(err <= 1e-8 * norm2(&direct));
        }
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let sys = SparseSystem {
            matrix: tridiag(50),
            rhs: vec![1.0; 50],
        };
        let out = solve_gmres(
            &sys,
            PreconditionerKind::None,
            GmresOptions { restart: 2, tol: 1e-14, max_iter: 3 },
        )
        .unwrap();
        assert!(!out.converged);
        assert!(matches!(out.into_result(), Err(SolveError::MaxIterations { .. })));
    }
}
