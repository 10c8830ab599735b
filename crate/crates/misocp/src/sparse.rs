//! Compressed sparse column storage and a quasi-definite LDLᵀ factorization.
//!
//! The factorization follows the up-looking scheme of QDLDL: an elimination
//! tree is computed once per sparsity pattern, after which numeric
//! refactorizations reuse all symbolic data. A fill-reducing AMD ordering is
//! applied on construction.

use crate::error::SolverError;

/// Column-compressed sparse matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub vals: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            colptr: vec![0; ncols + 1],
            rowidx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds a matrix from `(row, col, value)` triplets; duplicates are summed
    /// and explicit zeros are kept out.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; ncols + 1];
        for &(r, c, _) in triplets {
            debug_assert!(r < nrows && c < ncols);
            counts[c + 1] += 1;
        }
        for c in 0..ncols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[c];
            rows[k] = r;
            vals[k] = v;
            next[c] += 1;
        }
        // sort within columns and merge duplicates
        let mut colptr = vec![0usize; ncols + 1];
        let mut out_rows = Vec::with_capacity(triplets.len());
        let mut out_vals = Vec::with_capacity(triplets.len());
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for c in 0..ncols {
            scratch.clear();
            scratch.extend((counts[c]..counts[c + 1]).map(|k| (rows[k], vals[k])));
            scratch.sort_by_key(|e| e.0);
            let mut i = 0;
            while i < scratch.len() {
                let r = scratch[i].0;
                let mut v = 0.0;
                while i < scratch.len() && scratch[i].0 == r {
                    v += scratch[i].1;
                    i += 1;
                }
                if v != 0.0 {
                    out_rows.push(r);
                    out_vals.push(v);
                }
            }
            colptr[c + 1] = out_rows.len();
        }
        Self {
            nrows,
            ncols,
            colptr,
            rowidx: out_rows,
            vals: out_vals,
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.nrows + 1];
        for &r in &self.rowidx {
            counts[r + 1] += 1;
        }
        for r in 0..self.nrows {
            counts[r + 1] += counts[r];
        }
        let mut next = counts.clone();
        let mut rowidx = vec![0usize; self.nnz()];
        let mut vals = vec![0.0; self.nnz()];
        for c in 0..self.ncols {
            for k in self.colptr[c]..self.colptr[c + 1] {
                let r = self.rowidx[k];
                let dst = next[r];
                rowidx[dst] = c;
                vals[dst] = self.vals[k];
                next[r] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            colptr: counts,
            rowidx,
            vals,
        }
    }

    /// `y += alpha * A x`
    pub fn gemv(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = alpha * x[c];
            if xc == 0.0 {
                continue;
            }
            for k in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowidx[k]] += self.vals[k] * xc;
            }
        }
    }

    /// `y += alpha * Aᵀ x`
    pub fn gemv_t(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for k in self.colptr[c]..self.colptr[c + 1] {
                acc += self.vals[k] * x[self.rowidx[k]];
            }
            y[c] += alpha * acc;
        }
    }

    /// Scales rows by `r` and columns by `c` in place.
    pub fn scale(&mut self, r: &[f64], c: &[f64]) {
        for col in 0..self.ncols {
            for k in self.colptr[col]..self.colptr[col + 1] {
                self.vals[k] *= r[self.rowidx[k]] * c[col];
            }
        }
    }
}

const NONE: usize = usize::MAX;

/// Symbolic and numeric LDLᵀ factor of a symmetric quasi-definite matrix.
///
/// The input is given as the upper triangle (including every diagonal entry)
/// of a symmetric matrix in the original ordering. `signs[i]` is `+1` for
/// rows expected to produce a positive pivot and `-1` otherwise; pivots with
/// the wrong sign or tiny magnitude are replaced by `signs[i] * reg_delta`.
#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    // permuted upper triangle
    kp: Vec<usize>,
    ki: Vec<usize>,
    kx: Vec<f64>,
    /// position in `kx` of each input entry
    map: Vec<usize>,
    etree: Vec<usize>,
    lnz: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
    dinv: Vec<f64>,
    signs: Vec<f64>,
    pub reg_eps: f64,
    pub reg_delta: f64,
    pub regularized_pivots: usize,
    work: Vec<f64>,
}

impl LdlFactor {
    /// `upper` holds `(i, j)` with `i <= j`; every diagonal index must occur.
    pub fn new(
        n: usize,
        upper: &[(usize, usize)],
        signs: Vec<f64>,
    ) -> Result<Self, SolverError> {
        // full symmetric pattern for AMD
        let mut sym: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * upper.len());
        for &(i, j) in upper {
            sym.push((i, j, 1.0));
            if i != j {
                sym.push((j, i, 1.0));
            }
        }
        let pattern = CscMatrix::from_triplets(n, n, &sym);
        let (perm, pinv) = if n > 0 {
            let ap: Vec<i64> = pattern.colptr.iter().map(|&v| v as i64).collect();
            let ai: Vec<i64> = pattern.rowidx.iter().map(|&v| v as i64).collect();
            let (p, pinv, _) = amd::order(n as i64, &ap, &ai, &amd::Control::default())
                .map_err(|e| SolverError::Factorization(format!("ordering failed: {e:?}")))?;
            (
                p.into_iter().map(|v| v as usize).collect::<Vec<_>>(),
                pinv.into_iter().map(|v| v as usize).collect::<Vec<_>>(),
            )
        } else {
            (Vec::new(), Vec::new())
        };

        // permuted upper triangle, with a map from input entries
        let mut trip: Vec<(usize, usize, usize)> = upper
            .iter()
            .enumerate()
            .map(|(k, &(i, j))| {
                let (a, b) = (pinv[i], pinv[j]);
                (a.min(b), a.max(b), k)
            })
            .collect();
        trip.sort_by_key(|&(r, c, _)| (c, r));
        let mut kp = vec![0usize; n + 1];
        let mut ki = Vec::with_capacity(trip.len());
        let mut map = vec![0usize; upper.len()];
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, k) in &trip {
            if last != Some((r, c)) {
                ki.push(r);
                kp[c + 1] = ki.len();
                last = Some((r, c));
            }
            map[k] = ki.len() - 1;
        }
        for c in 0..n {
            if kp[c + 1] < kp[c] {
                kp[c + 1] = kp[c];
            }
        }
        let kx = vec![0.0; ki.len()];

        // elimination tree and column counts
        let mut work = vec![0usize; n];
        let mut lnz = vec![0usize; n];
        let mut etree = vec![NONE; n];
        for j in 0..n {
            work[j] = j;
            for p in kp[j]..kp[j + 1] {
                let mut i = ki[p];
                if i > j {
                    return Err(SolverError::Factorization("pattern not upper triangular".into()));
                }
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
        let psigns = perm.iter().map(|&o| signs[o]).collect();
        Ok(Self {
            n,
            perm,
            kp,
            ki,
            kx,
            map,
            etree,
            lnz,
            lp,
            li: vec![0; total],
            lx: vec![0.0; total],
            d: vec![0.0; n],
            dinv: vec![0.0; n],
            signs: psigns,
            reg_eps: 1e-13,
            reg_delta: 1e-7,
            regularized_pivots: 0,
            work: vec![0.0; n],
        })
    }

    pub fn factor_nnz(&self) -> usize {
        self.lp[self.n]
    }

    /// Numeric factorization; `values[k]` belongs to the k-th input entry.
    pub fn factor(&mut self, values: &[f64]) -> Result<(), SolverError> {
        let n = self.n;
        self.kx.iter_mut().for_each(|v| *v = 0.0);
        for (k, &v) in values.iter().enumerate() {
            self.kx[self.map[k]] += v;
        }
        let mut y_markers = vec![false; n];
        let mut y_vals = vec![0.0; n];
        let mut y_idx = vec![0usize; n];
        let mut elim = vec![0usize; n];
        let mut next_space: Vec<usize> = self.lp[..n].to_vec();
        self.regularized_pivots = 0;

        for k in 0..n {
            let mut nnz_y = 0usize;
            self.d[k] = 0.0;
            for p in self.kp[k]..self.kp[k + 1] {
                let bidx = self.ki[p];
                if bidx == k {
                    self.d[k] = self.kx[p];
                    continue;
                }
                y_vals[bidx] = self.kx[p];
                let mut next = bidx;
                if !y_markers[next] {
                    y_markers[next] = true;
                    elim[0] = next;
                    let mut nnz_e = 1usize;
                    next = self.etree[bidx];
                    while next != NONE && next < k {
                        if y_markers[next] {
                            break;
                        }
                        y_markers[next] = true;
                        elim[nnz_e] = next;
                        nnz_e += 1;
                        next = self.etree[next];
                    }
                    while nnz_e > 0 {
                        nnz_e -= 1;
                        y_idx[nnz_y] = elim[nnz_e];
                        nnz_y += 1;
                    }
                }
            }
            for i in (0..nnz_y).rev() {
                let c = y_idx[i];
                let tmp = next_space[c];
                let yc = y_vals[c];
                for j in self.lp[c]..tmp {
                    y_vals[self.li[j]] -= self.lx[j] * yc;
                }
                self.li[tmp] = k;
                let l = yc * self.dinv[c];
                self.lx[tmp] = l;
                self.d[k] -= yc * l;
                next_space[c] += 1;
                y_vals[c] = 0.0;
                y_markers[c] = false;
            }
            let s = self.signs[k];
            if !(self.d[k] * s > self.reg_eps) {
                self.d[k] = s * self.reg_delta;
                self.regularized_pivots += 1;
            }
            if !self.d[k].is_finite() {
                return Err(SolverError::Factorization(format!("non-finite pivot at {k}")));
            }
            self.dinv[k] = 1.0 / self.d[k];
        }
        debug_assert!(next_space.iter().zip(self.lp[1..].iter()).all(|(a, b)| a == b));
        let _ = &self.lnz;
        Ok(())
    }

    /// Solves `K x = b` in place (original ordering).
    pub fn solve(&mut self, b: &mut [f64]) {
        let n = self.n;
        let x = &mut self.work;
        for k in 0..n {
            x[k] = b[self.perm[k]];
        }
        for i in 0..n {
            let xi = x[i];
            if xi != 0.0 {
                for j in self.lp[i]..self.lp[i + 1] {
                    x[self.li[j]] -= self.lx[j] * xi;
                }
            }
        }
        for i in 0..n {
            x[i] *= self.dinv[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in self.lp[i]..self.lp[i + 1] {
                acc -= self.lx[j] * x[self.li[j]];
            }
            x[i] = acc;
        }
        for k in 0..n {
            b[self.perm[k]] = x[k];
        }
    }
}
