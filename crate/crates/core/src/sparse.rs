//! Sparse complex least squares via normal equations and a direct
//! factorization.
//!
//! The assembly side of the crate produces row-major stacks of weighted
//! residual rows. This module forms AᴴA with a Gustavson-style sparse
//! product (deterministic accumulation order) and factors it with faer's
//! sparse Cholesky. The forward solver's non-Hermitian system goes through
//! faer's sparse LU instead. faer is built without its rayon feature, so
//! factorizations are sequential and bit-reproducible.

use crate::error::{Error, Result};
use faer::linalg::solvers::Solve as _;
use faer::prelude::*;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef, Triplet};
use faer::Side;
use num_complex::Complex64;

/// Row-major stack of sparse rows (a linear operator built row by row).
#[derive(Clone, Debug, Default)]
pub struct SparseRows {
    pub n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl SparseRows {
    pub fn new(n_cols: usize) -> SparseRows {
        SparseRows {
            n_cols,
            row_ptr: vec![0],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn with_capacity(n_cols: usize, rows: usize, nnz: usize) -> SparseRows {
        let mut out = SparseRows::new(n_cols);
        out.row_ptr.reserve(rows);
        out.cols.reserve(nnz);
        out.vals.reserve(nnz);
        out
    }

    /// Append a row given as (column, value) pairs. Duplicate columns are
    /// allowed and accumulate.
    pub fn push_row(&mut self, entries: &[(usize, Complex64)]) {
        for &(c, v) in entries {
            debug_assert!(c < self.n_cols);
            self.cols.push(c);
            self.vals.push(v);
        }
        self.row_ptr.push(self.cols.len());
    }

    pub fn n_rows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    fn row(&self, r: usize) -> (&[usize], &[Complex64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    /// y = A x
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_rows()];
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
        y
    }

    /// y = Aᴴ x
    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.n_cols];
        for r in 0..self.n_rows() {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v.conj() * x[r];
            }
        }
        y
    }
}

/// Lower triangle of a Hermitian matrix in CSC layout.
struct HermitianCsc {
    dim: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<Complex64>,
}

/// Lower triangle of Σ_stacks AᴴA, column by column.
///
/// (AᴴA)[i,j] = Σ_r conj(A[r,i]) A[r,j]: for each column j, walk the rows
/// containing j through a CSC index of the stacked operator and scatter the
/// i ≥ j partners into a dense accumulator. Work is Σ_rows nnz(row)²/2 and
/// the accumulation order is fixed, so the result is deterministic.
fn normal_matrix(stacks: &[&SparseRows]) -> HermitianCsc {
    let n_cols = stacks[0].n_cols;
    // global row ids across stacks; CSC index: for each column, the rows
    // holding it together with the stored value
    let total_nnz: usize = stacks.iter().map(|s| s.nnz()).sum();
    let mut counts = vec![0usize; n_cols + 1];
    for stack in stacks {
        for &c in &stack.cols {
            counts[c + 1] += 1;
        }
    }
    for j in 0..n_cols {
        counts[j + 1] += counts[j];
    }
    let col_start = counts.clone();
    // entries: (stack id, row id, value of A[r, j])
    let mut entry_stack = vec![0u32; total_nnz];
    let mut entry_row = vec![0u32; total_nnz];
    let mut entry_val = vec![Complex64::new(0.0, 0.0); total_nnz];
    {
        let mut cursor = counts;
        for (sid, stack) in stacks.iter().enumerate() {
            for r in 0..stack.n_rows() {
                let (cols, vals) = stack.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    let slot = cursor[*c];
                    entry_stack[slot] = sid as u32;
                    entry_row[slot] = r as u32;
                    entry_val[slot] = *v;
                    cursor[*c] += 1;
                }
            }
        }
    }

    let mut acc = vec![Complex64::new(0.0, 0.0); n_cols];
    let mut marked = vec![false; n_cols];
    let mut touched: Vec<usize> = Vec::new();
    let mut col_ptr = vec![0usize; n_cols + 1];
    let mut row_idx: Vec<usize> = Vec::new();
    let mut out_vals: Vec<Complex64> = Vec::new();
    for j in 0..n_cols {
        touched.clear();
        for slot in col_start[j]..col_start[j + 1] {
            let stack = stacks[entry_stack[slot] as usize];
            let r = entry_row[slot] as usize;
            let vj = entry_val[slot];
            let (cols, vals) = stack.row(r);
            for (&ci, &vi) in cols.iter().zip(vals) {
                if ci >= j {
                    if !marked[ci] {
                        marked[ci] = true;
                        touched.push(ci);
                    }
                    acc[ci] += vi.conj() * vj;
                }
            }
        }
        touched.sort_unstable();
        for &i in &touched {
            row_idx.push(i);
            out_vals.push(acc[i]);
            acc[i] = Complex64::new(0.0, 0.0);
            marked[i] = false;
        }
        col_ptr[j + 1] = row_idx.len();
    }
    HermitianCsc {
        dim: n_cols,
        col_ptr,
        row_idx,
        vals: out_vals,
    }
}

/// Sparse Hermitian positive-definite factorization (LLᴴ).
pub struct NormalFactor {
    llt: Llt<usize, Complex64>,
    dim: usize,
}

impl NormalFactor {
    fn new(mat: HermitianCsc) -> Result<NormalFactor> {
        let symbolic = SymbolicSparseColMatRef::new_checked(
            mat.dim,
            mat.dim,
            &mat.col_ptr,
            None,
            &mat.row_idx,
        );
        let mref = SparseColMatRef::new(symbolic, &mat.vals);
        let sym = SymbolicLlt::try_new(mref.symbolic(), Side::Lower).map_err(|_| {
            Error::SingularSystem {
                context: "normal equations (symbolic)",
                cond: f64::NAN,
            }
        })?;
        let llt = Llt::try_new_with_symbolic(sym, mref, Side::Lower).map_err(|_| {
            let mut dmin = f64::INFINITY;
            let mut dmax = 0.0f64;
            for j in 0..mat.dim {
                // diagonal is the first stored entry of a lower-triangle
                // column when present at all
                let lo = mat.col_ptr[j];
                let hi = mat.col_ptr[j + 1];
                let d = if lo < hi && mat.row_idx[lo] == j {
                    mat.vals[lo].norm()
                } else {
                    0.0
                };
                dmin = dmin.min(d);
                dmax = dmax.max(d);
            }
            Error::SingularSystem {
                context: "normal equations",
                cond: dmax / dmin.max(f64::MIN_POSITIVE),
            }
        })?;
        Ok(NormalFactor { llt, dim: mat.dim })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut m = Mat::<c64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.llt.solve_in_place(m.as_mut());
        (0..self.dim).map(|i| m[(i, 0)]).collect()
    }
}

/// Factor Σ AᴴA over the row stacks once; reusable across right-hand sides.
pub fn factor_normal_equations(stacks: &[&SparseRows]) -> Result<NormalFactor> {
    NormalFactor::new(normal_matrix(stacks))
}

/// Minimizer of ‖A x - b‖² + ‖R x‖² for row stacks A (with rhs b) and R.
///
/// Returns the solution and the residual norm ‖A x - b‖. The normal matrix
/// AᴴA + RᴴR is factored with sparse Cholesky; a factorization failure is
/// reported as a singular system with a diagonal-ratio condition estimate.
pub fn solve_weighted_least_squares(
    rows: &SparseRows,
    rhs: &[Complex64],
    regularizer: &SparseRows,
) -> Result<(Vec<Complex64>, f64)> {
    assert_eq!(rows.n_rows(), rhs.len());
    assert_eq!(rows.n_cols, regularizer.n_cols);
    let factor = factor_normal_equations(&[rows, regularizer])?;
    let atb = rows.apply_adjoint(rhs);
    let x = factor.solve(&atb);
    let ax = rows.apply(&x);
    let residual = ax
        .iter()
        .zip(rhs)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok((x, residual))
}

/// Sparse LU of a general complex square matrix given in triplet form.
pub struct SparseLu {
    lu: Lu<usize, Complex64>,
    dim: usize,
}

impl SparseLu {
    pub fn from_triplets(
        dim: usize,
        triplets: &[(usize, usize, Complex64)],
        context: &'static str,
    ) -> Result<SparseLu> {
        let trips: Vec<Triplet<usize, usize, c64>> = triplets
            .iter()
            .map(|&(r, c, v)| Triplet::new(r, c, v))
            .collect();
        let mat = faer::sparse::SparseColMat::<usize, c64>::try_new_from_triplets(dim, dim, &trips)
            .map_err(|_| Error::SingularSystem {
                context,
                cond: f64::NAN,
            })?;
        let sym = SymbolicLu::try_new(mat.symbolic()).map_err(|_| Error::SingularSystem {
            context,
            cond: f64::NAN,
        })?;
        let lu =
            Lu::try_new_with_symbolic(sym, mat.rb()).map_err(|_| Error::SingularSystem {
                context,
                cond: f64::NAN,
            })?;
        Ok(SparseLu { lu, dim })
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        let mut m = Mat::<c64>::from_fn(self.dim, 1, |i, _| rhs[i]);
        self.lu.solve_in_place(m.as_mut());
        (0..self.dim).map(|i| m[(i, 0)]).collect()
    }
}
