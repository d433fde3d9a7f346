//! Sparse LU backed by faer.

use super::csr::{norm2, CsrMatrix, Pattern, SparseSystem};
use super::SolveError;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::MatMut;
use std::sync::Arc;

const RESIDUAL_TOL: f64 = 1e-10;
const REFINEMENT_STEPS: usize = 3;

/// Symbolic analysis that can be reused for every matrix on one pattern.
#[derive(Clone)]
pub struct LuSymbolic {
    pattern: Arc<Pattern>,
    inner: faer::sparse::linalg::solvers::SymbolicLu<usize>,
}

impl std::fmt::Debug for LuSymbolic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuSymbolic").field("n", &self.pattern.n).finish()
    }
}

// The CSR arrays of A are the CSC arrays of Aᵀ; we factor Aᵀ and use
// transposed solves.
fn transposed_view<'a>(p: &'a Pattern) -> SymbolicSparseColMatRef<'a, usize> {
    SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.row_ptr, None, &p.col_idx)
}

fn map_lu_error(e: LuError) -> SolveError {
    match e {
        LuError::SymbolicSingular { index } => SolveError::Singular { pivot: index },
        LuError::Generic(g) => SolveError::Backend(format!("{g:?}")),
    }
}

impl LuSymbolic {
    pub fn new(pattern: Arc<Pattern>) -> Result<Self, SolveError> {
        let inner = faer::sparse::linalg::solvers::SymbolicLu::try_new(transposed_view(&pattern))
            .map_err(|e| SolveError::Backend(format!("{e:?}")))?;
        Ok(Self { pattern, inner })
    }

    pub fn factor(&self, matrix: &CsrMatrix) -> Result<LuFactor, SolveError> {
        if *matrix.pattern != *self.pattern {
            return Err(SolveError::Dimension("pattern differs from symbolic analysis".into()));
        }
        let view = SparseColMatRef::new(transposed_view(&self.pattern), &matrix.vals);
        let lu = faer::sparse::linalg::solvers::Lu::try_new_with_symbolic(self.inner.clone(), view)
            .map_err(map_lu_error)?;
        Ok(LuFactor {
            matrix: matrix.clone(),
            lu,
        })
    }
}

/// Numeric LU factorization together with its matrix (kept for residual checks).
pub struct LuFactor {
    matrix: CsrMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor").field("n", &self.matrix.n()).finish()
    }
}

impl LuFactor {
    pub fn new(matrix: &CsrMatrix) -> Result<Self, SolveError> {
        LuSymbolic::new(matrix.pattern.clone())?.factor(matrix)
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One application of the factors, without residual checks.
    pub fn apply_in_place(&self, x: &mut [f64]) {
        let n = x.len();
        let m = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu.solve_transpose_in_place(m);
    }

    /// Solves `A x = b`, refining until `‖Ax − b‖ ≤ 1e−10·‖b‖`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, SolveError> {
        if b.len() != self.n() {
            return Err(SolveError::Dimension(format!(
                "rhs has length {}, matrix has {}",
                b.len(),
                self.n()
            )));
        }
        let bnorm = norm2(b);
        let mut x = b.to_vec();
        self.apply_in_place(&mut x);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut r = vec![0.0; b.len()];
        for step in 0..=REFINEMENT_STEPS {
            if x.iter().any(|v| !v.is_finite()) {
                let pivot = x.iter().position(|v| !v.is_finite()).unwrap_or(0);
                return Err(SolveError::Singular { pivot });
            }
            self.matrix.matvec_into(&x, &mut r);
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let rel = norm2(&r) / bnorm;
            if rel <= RESIDUAL_TOL {
                return Ok(x);
            }
            if step == REFINEMENT_STEPS {
                return Err(SolveError::Inaccurate { residual: rel });
            }
            self.apply_in_place(&mut r);
            for (xi, di) in x.iter_mut().zip(&r) {
                *xi += di;
            }
        }
        unreachable!()
    }
}

/// Factorizes and solves in one go.
pub fn solve_direct(system: &SparseSystem) -> Result<Vec<f64>, SolveError> {
    LuFactor::new(&system.matrix)?.solve(&system.rhs)
}
