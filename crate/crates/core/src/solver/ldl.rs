//! Sparse LDLᵀ factorization of symmetric (possibly indefinite) matrices
//! with 1×1 pivots, after a fill-reducing approximate minimum degree
//! ordering. Pivot signs give the inertia.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LdlError {
    #[error("entry ({0}, {1}) lies outside the matrix")]
    OutOfRange(usize, usize),
    #[error("ordering failed")]
    Ordering,
    #[error("zero pivot in column {0}")]
    ZeroPivot(usize),
    #[error("values do not match the symbolic pattern")]
    PatternMismatch,
}

/// Numbers of positive, negative and zero pivots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}

const NONE: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct SparseLdl {
    n: usize,
    /// `perm[k]` is the original index of pivot `k`.
    perm: Vec<usize>,
    /// Upper triangle of the permuted matrix, compressed by column.
    ap: Vec<usize>,
    ai: Vec<usize>,
    ax: Vec<f64>,
    /// Position in `ax` of every input entry (duplicates accumulate).
    entry_pos: Vec<usize>,
    etree: Vec<usize>,
    lnz: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    // factorization workspaces
    y_vals: Vec<f64>,
    y_idx: Vec<usize>,
    y_mark: Vec<bool>,
    elim: Vec<usize>,
    next_in_col: Vec<usize>,
}

impl SparseLdl {
    /// Symbolic analysis of the `n × n` symmetric pattern given by
    /// coordinate `entries`; each (i, j) stands for both (i, j) and (j, i).
    /// Diagonal entries are added automatically.
    pub fn new(n: usize, entries: &[(usize, usize)]) -> Result<SparseLdl, LdlError> {
        for &(i, j) in entries {
            if i >= n || j >= n {
                return Err(LdlError::OutOfRange(i, j));
            }
        }
        // Full symmetric pattern for the ordering.
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(k);
        }
        for &(i, j) in entries {
            if i != j {
                cols[j].push(i);
                cols[i].push(j);
            }
        }
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
        }
        let mut a_p = Vec::with_capacity(n + 1);
        let mut a_i = Vec::new();
        a_p.push(0usize);
        for col in &cols {
            a_i.extend_from_slice(col);
            a_p.push(a_i.len());
        }
        let (perm, perm_inv) = if n == 0 {
            (Vec::new(), Vec::new())
        } else {
            let (p, pinv, _) = amd::order(n, &a_p, &a_i, &amd::Control::default()).map_err(|_| LdlError::Ordering)?;
            (p, pinv)
        };

        // Upper triangle of P A Pᵀ by column.
        let mut ucols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (j, col) in cols.iter().enumerate() {
            for &i in col {
                let (pi, pj) = (perm_inv[i], perm_inv[j]);
                if pi <= pj {
                    ucols[pj].push(pi);
                }
            }
        }
        for col in &mut ucols {
            col.sort_unstable();
            col.dedup();
        }
        let mut ap = Vec::with_capacity(n + 1);
        let mut ai = Vec::new();
        ap.push(0);
        for col in &ucols {
            ai.extend_from_slice(col);
            ap.push(ai.len());
        }
        let locate = |r: usize, c: usize| -> usize {
            let (r, c) = (r.min(c), r.max(c));
            ap[c] + ai[ap[c]..ap[c + 1]].binary_search(&r).expect("entry in pattern")
        };
        let entry_pos = entries.iter().map(|&(i, j)| locate(perm_inv[i], perm_inv[j])).collect();

        // Elimination tree and column counts.
        let mut etree = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut work = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for &row in &ai[ap[j]..ap[j + 1]] {
                let mut i = row;
                while work[i] != j {
                    if etree[i] == NONE {
                        etree[i] = j;
                    }
                    lnz[i] += 1;
                    work[i] = j;
                    i = etree[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for i in 0..n {
            lp[i + 1] = lp[i] + lnz[i];
        }
        let total = lp[n];
        let nnz = ai.len();
        Ok(SparseLdl {
            n,
            perm,
            ap,
            ai,
            ax: vec![0.0; nnz],
            entry_pos,
            etree,
            lnz,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            y_vals: vec![0.0; n],
            y_idx: vec![0; n],
            y_mark: vec![false; n],
            elim: vec![0; n],
            next_in_col: vec![0; n],
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Nonzeros in the factor L.
    pub fn factor_nnz(&self) -> usize {
        self.lnz.iter().sum()
    }

    /// Numeric factorization. `values[k]` belongs to `entries[k]` of the
    /// symbolic pattern; `diagonal_shift[i]` is added to the diagonal of
    /// original row `i`.
    pub fn factor(&mut self, values: &[f64], diagonal_shift: &[f64]) -> Result<Inertia, LdlError> {
        if values.len() != self.entry_pos.len() || diagonal_shift.len() != self.n {
            return Err(LdlError::PatternMismatch);
        }
        self.ax.fill(0.0);
        for (&pos, &v) in self.entry_pos.iter().zip(values) {
            self.ax[pos] += v;
        }
        for (k, &orig) in self.perm.iter().enumerate() {
            // diagonal is the last entry of its upper-triangular column
            self.ax[self.ap[k + 1] - 1] += diagonal_shift[orig];
        }

        let n = self.n;
        self.next_in_col.copy_from_slice(&self.lp[..n]);
        self.y_mark.fill(false);
        self.y_vals.fill(0.0);
        let mut inertia = Inertia {
            positive: 0,
            negative: 0,
            zero: 0,
        };
        for k in 0..n {
            let mut nnz_y = 0;
            self.d[k] = 0.0;
            for p in self.ap[k]..self.ap[k + 1] {
                let b = self.ai[p];
                if b == k {
                    self.d[k] = self.ax[p];
                    continue;
                }
                self.y_vals[b] = self.ax[p];
                if self.y_mark[b] {
                    continue;
                }
                self.y_mark[b] = true;
                self.elim[0] = b;
                let mut n_elim = 1;
                let mut next = self.etree[b];
                while next != NONE && next < k {
                    if self.y_mark[next] {
                        break;
                    }
                    self.y_mark[next] = true;
                    self.elim[n_elim] = next;
                    n_elim += 1;
                    next = self.etree[next];
                }
                while n_elim > 0 {
                    n_elim -= 1;
                    self.y_idx[nnz_y] = self.elim[n_elim];
                    nnz_y += 1;
                }
            }
            for i in (0..nnz_y).rev() {
                let c = self.y_idx[i];
                let slot = self.next_in_col[c];
                let yc = self.y_vals[c];
                for j in self.lp[c]..slot {
                    self.y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[slot] = k;
                let l = yc * self.dinv[c];
                self.lx[slot] = l;
                self.d[k] -= yc * l;
                self.next_in_col[c] += 1;
                self.y_vals[c] = 0.0;
                self.y_mark[c] = false;
            }
            let dk = self.d[k];
            if dk == 0.0 || !dk.is_finite() {
                return Err(LdlError::ZeroPivot(self.perm[k]));
            }
            if dk > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
            self.dinv[k] = 1.0 / dk;
        }
        Ok(inertia)
    }

    /// Solves `A x = b` in place using the last factorization.
    pub fn solve(&self, b: &mut [f64]) {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                x[self.li[j]] -= self.lx[j] * xi;
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut xi = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                xi -= self.lx[j] * x[self.li[j]];
            }
            x[i] = xi;
        }
        for (k, &p) in self.perm.iter().enumerate() {
            b[p] = x[k];
        }
    }
}

/// `y = A x` for a symmetric matrix given by coordinate entries (each
/// off-diagonal entry standing for both triangles) plus a diagonal shift.
pub fn symmetric_matvec(entries: &[(usize, usize)], values: &[f64], diagonal_shift: &[f64], x: &[f64], y: &mut [f64]) {
    for (yi, (&d, &xi)) in y.iter_mut().zip(diagonal_shift.iter().zip(x)) {
        *yi = d * xi;
    }
    for (&(i, j), &v) in entries.iter().zip(values) {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn dense(n: usize, entries: &[(usize, usize)], values: &[f64], shift: &[f64]) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(n, n);
        for (&(i, j), &v) in entries.iter().zip(values) {
            a[(i, j)] += v;
            if i != j {
                a[(j, i)] += v;
            }
        }
        for i in 0..n {
            a[(i, i)] += shift[i];
        }
        a
    }

    #[test]
    fn solves_quasidefinite_kkt() {
        // [[4, 1, 1], [1, 3, 2], [1, 2, -1e-3]] style with a constraint row
        let entries = [(0, 0), (1, 1), (1, 0), (2, 0), (2, 1), (3, 2), (3, 3)];
        let values = [4.0, 3.0, 1.0, 1.0, 2.0, 1.0, -0.5];
        let shift = [0.0, 0.0, 2.0, 0.0];
        let mut ldl = SparseLdl::new(4, &entries).unwrap();
        let inertia = ldl.factor(&values, &shift).unwrap();
        let a = dense(4, &entries, &values, &shift);
        let eig = a.clone().symmetric_eigen().eigenvalues;
        let pos = eig.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(inertia.positive, pos);
        assert_eq!(inertia.negative, 4 - pos);
        let b = [1.0, -2.0, 0.5, 3.0];
        let mut x = b;
        ldl.solve(&mut x);
        let mut ax = [0.0; 4];
        symmetric_matvec(&entries, &values, &shift, &x, &mut ax);
        for i in 0..4 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_reported() {
        let entries = [(1, 0)];
        let mut ldl = SparseLdl::new(2, &entries).unwrap();
        assert!(matches!(ldl.factor(&[1.0], &[0.0, 0.0]), Err(LdlError::ZeroPivot(_))));
    }

    proptest! {
        #[test]
        fn random_saddle_point_systems(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (8, 3);
            let mut entries = Vec::new();
            let mut values = Vec::new();
            let mut shift = vec![0.0; n + m];
            for i in 0..n {
                shift[i] = rng.gen_range(1.0..5.0);
                for j in 0..i {
                    if rng.gen_bool(0.3) {
                        entries.push((i, j));
                        values.push(rng.gen_range(-0.5..0.5));
                    }
                }
            }
            for r in 0..m {
                shift[n + r] = -1e-8;
                for j in 0..n {
                    if rng.gen_bool(0.5) || j == r {
                        entries.push((n + r, j));
                        values.push(rng.gen_range(-2.0..2.0));
                    }
                }
            }
            let mut ldl = SparseLdl::new(n + m, &entries).unwrap();
            let inertia = ldl.factor(&values, &shift).unwrap();
            prop_assert_eq!(inertia.positive, n);
            prop_assert_eq!(inertia.negative, m);
            let b: Vec<f64> = (0..n + m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut x = b.clone();
            ldl.solve(&mut x);
            let mut ax = vec![0.0; n + m];
            symmetric_matvec(&entries, &values, &shift, &x, &mut ax);
            for i in 0..n + m {
                prop_assert!((ax[i] - b[i]).abs() < 1e-6);
            }
        }
    }
}
