use std::sync::Arc;

/// Sparsity structure of a square matrix in compressed-row form with sorted
/// column indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
}

impl Pattern {
    /// Builds a pattern from per-row column lists (duplicates removed).
    pub fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for row in rows.iter_mut() {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Position of entry `(i, j)` in the value array.
    pub fn find(&self, i: usize, j: usize) -> Option<usize> {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[a..b].binary_search(&j).ok().map(|k| a + k)
    }

    pub fn row(&self, i: usize) -> std::ops::Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn is_valid(&self) -> bool {
        self.row_ptr.len() == self.n + 1
            && self.row_ptr.windows(2).all(|w| w[0] <= w[1])
            && *self.row_ptr.last().unwrap() == self.col_idx.len()
            && (0..self.n).all(|i| {
                let r = &self.col_idx[self.row(i)];
                r.windows(2).all(|w| w[0] < w[1]) && r.iter().all(|&j| j < self.n)
            })
    }
}

/// Square sparse matrix; explicit zeros are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub pattern: Arc<Pattern>,
    pub vals: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<Pattern>) -> Self {
        let vals = vec![0.0; pattern.nnz()];
        Self { pattern, vals }
    }

    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut rows = vec![Vec::new(); n];
        for &(i, j, _) in triplets {
            rows[i].push(j);
        }
        let pattern = Arc::new(Pattern::from_rows(rows));
        let mut m = Self::zeros(pattern);
        for &(i, j, v) in triplets {
            let k = m.pattern.find(i, j).unwrap();
            m.vals[k] += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t)
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.find(i, j).map_or(0.0, |k| self.vals[k])
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for i in 0..p.n {
            let mut s = 0.0;
            for k in p.row(i) {
                s += self.vals[k] * x[p.col_idx[k]];
            }
            y[i] = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n()];
        self.matvec_into(x, &mut y);
        y
    }

    /// `y += alpha · A x`.
    pub fn matvec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        let p = &*self.pattern;
        for i in 0..p.n {
            let mut s = 0.0;
            for k in p.row(i) {
                s += self.vals[k] * x[p.col_idx[k]];
            }
            y[i] += alpha * s;
        }
    }

    /// `yᵀ A x`.
    pub fn bilinear(&self, y: &[f64], x: &[f64]) -> f64 {
        let p = &*self.pattern;
        let mut total = 0.0;
        for i in 0..p.n {
            if y[i] == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for k in p.row(i) {
                s += self.vals[k] * x[p.col_idx[k]];
            }
            total += y[i] * s;
        }
        total
    }

    /// Linear combination of matrices sharing this pattern.
    pub fn combine(pattern: &Arc<Pattern>, terms: &[(f64, &CsrMatrix)]) -> CsrMatrix {
        let mut out = CsrMatrix::zeros(pattern.clone());
        for (c, m) in terms {
            assert!(Arc::ptr_eq(&m.pattern, pattern) || *m.pattern == **pattern);
            for (o, v) in out.vals.iter_mut().zip(&m.vals) {
                *o += c * v;
            }
        }
        out
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let p = &*self.pattern;
        let mut worst = 0.0f64;
        for i in 0..p.n {
            for k in p.row(i) {
                let j = p.col_idx[k];
                worst = worst.max((self.vals[k] - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Submatrix on the index set `keep` (given as old→new map, `usize::MAX` = dropped).
    pub fn restrict(&self, new_index: &[usize], n_new: usize) -> (CsrMatrix, Vec<usize>) {
        let p = &*self.pattern;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut map = vec![usize::MAX; p.nnz()];
        let mut old_rows = vec![usize::MAX; n_new];
        for (i, &ni) in new_index.iter().enumerate() {
            if ni != usize::MAX {
                old_rows[ni] = i;
            }
        }
        for &i in &old_rows {
            for k in p.row(i) {
                let nj = new_index[p.col_idx[k]];
                if nj != usize::MAX {
                    map[k] = col_idx.len();
                    col_idx.push(nj);
                }
            }
            row_ptr.push(col_idx.len());
        }
        // columns keep their order because the renumbering is monotone
        let pattern = Arc::new(Pattern {
            n: n_new,
            row_ptr,
            col_idx,
        });
        let mut m = CsrMatrix::zeros(pattern);
        for (k, &t) in map.iter().enumerate() {
            if t != usize::MAX {
                m.vals[t] = self.vals[k];
            }
        }
        (m, map)
    }
}

/// Matrix with right-hand side.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate() {
        let m = CsrMatrix::from_triplets(2, &[(0, 0, 1.0), (0, 0, 2.0), (1, 0, 4.0)]);
        assert_eq!(m.get(0, 0), 3.0);
        assert_eq!(m.get(1, 0), 4.0);
        assert_eq!(m.get(0, 1), 0.0);
        assert!(m.pattern.is_valid());
        assert_eq!(m.matvec(&[1.0, 1.0]), vec![3.0, 4.0]);
    }

    #[test]
    fn restriction_keeps_entries() {
        let m = CsrMatrix::from_triplets(
            3,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 2, 5.0)],
        );
        let (r, _) = m.restrict(&[0, usize::MAX, 1], 2);
        assert_eq!(r.get(0, 1), 2.0);
        assert_eq!(r.get(1, 0), 4.0);
        assert_eq!(r.get(1, 1), 5.0);
        assert!(r.pattern.is_valid());
    }
}
