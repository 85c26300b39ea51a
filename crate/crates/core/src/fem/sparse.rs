//! Compressed sparse row matrices and cached direct factorizations.

use std::sync::{Arc, Mutex, OnceLock};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::{LdltParams, LdltRegularization};
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, MatMut, Par, Side, Spec};

use crate::{Error, Result};

/// Square sparsity structure, shared by every matrix assembled on the same
/// topology. Symbolic factorizations are computed once and cached here.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    llt: OnceLock<SymbolicLlt<usize>>,
    lu: OnceLock<SymbolicLu<usize>>,
    ldlt: OnceLock<Arc<SymbolicCholesky<usize>>>,
    bordered: Mutex<Option<(Vec<usize>, Arc<SparsityPattern>)>>,
}

impl SparsityPattern {
    /// Pattern coupling every pair of dofs that share a cell, plus the diagonal.
    pub fn from_cells<'a>(n: usize, cells: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for dofs in cells {
            for &i in dofs {
                rows[i].extend_from_slice(dofs);
            }
        }
        Self::from_rows(rows)
    }

    fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        Self {
            n,
            row_ptr,
            col_idx,
            llt: OnceLock::new(),
            lu: OnceLock::new(),
            ldlt: OnceLock::new(),
            bordered: Mutex::new(None),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e].binary_search(&j).ok().map(|k| s + k)
    }

    fn symbolic(&self) -> SymbolicSparseColMatRef<'_, usize> {
        // the pattern is structurally symmetric, so the CSR arrays double as CSC
        SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.row_ptr, None, &self.col_idx)
    }

    /// Pattern extended by one dense row and column on `support`.
    fn bordered(&self, support: &[usize]) -> Arc<SparsityPattern> {
        let mut cache = self.bordered.lock().unwrap();
        if let Some((s, p)) = cache.as_ref() {
            if s == support {
                return Arc::clone(p);
            }
        }
        let mut rows: Vec<Vec<usize>> =
            (0..self.n).map(|i| self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]].to_vec()).collect();
        for &i in support {
            rows[i].push(self.n);
        }
        let mut last = support.to_vec();
        last.push(self.n);
        rows.push(last);
        let p = Arc::new(Self::from_rows(rows));
        *cache = Some((support.to_vec(), Arc::clone(&p)));
        p
    }
}

/// Square CSR matrix over a shared [`SparsityPattern`].
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsityPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    /// Dense matrix stored sparsely (tests and tiny systems).
    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let all: Vec<Vec<usize>> = (0..n).map(|_| (0..n).collect()).collect();
        let pattern = Arc::new(SparsityPattern::from_rows(all));
        let values = rows.iter().flatten().copied().collect();
        Self { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Adds `v` at `(i, j)`; panics if the entry is outside the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.pattern.position(i, j).unwrap_or_else(|| panic!("entry ({i}, {j}) outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Iterates over the stored `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        self.pattern.col_idx[s..e].iter().copied().zip(self.values[s..e].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        (0..self.n()).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n());
        (0..self.n()).map(|i| x[i] * self.row(i).map(|(j, v)| v * y[j]).sum::<f64>()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |A_ij - A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n() {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += factor * other`; both must share a pattern.
    pub fn add_scaled(&mut self, factor: f64, other: &SparseMatrix) {
        assert!(Arc::ptr_eq(&self.pattern, &other.pattern), "patterns differ");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    /// Symmetric elimination of the dofs in `mask`: their rows and columns
    /// are zeroed and the diagonal set to one.
    pub fn eliminate(&mut self, mask: &[bool]) {
        assert_eq!(mask.len(), self.n());
        for i in 0..self.n() {
            let (s, e) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
            for k in s..e {
                let j = self.pattern.col_idx[k];
                if mask[i] || mask[j] {
                    self.values[k] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    /// Matrix bordered by the row and column `c` (zero in the corner).
    pub fn bordered(&self, c: &[f64]) -> SparseMatrix {
        let n = self.n();
        let support: Vec<usize> = (0..n).filter(|&i| c[i] != 0.0).collect();
        let pattern = self.pattern.bordered(&support);
        let mut out = SparseMatrix::zeros(pattern);
        for i in 0..n {
            for (j, v) in self.row(i) {
                out.add(i, j, v);
            }
        }
        for &i in &support {
            out.add(i, n, c[i]);
            out.add(n, i, c[i]);
        }
        out
    }

    fn as_faer(&self) -> SparseColMatRef<'_, usize, f64> {
        SparseColMatRef::new(self.pattern.symbolic(), &self.values)
    }
}

/// Which direct factorization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Sparse Cholesky, for symmetric positive definite matrices.
    Cholesky,
    /// Sparse LU with partial pivoting, for indefinite (saddle point) systems.
    Lu,
    /// Symmetric LDLᵀ without pivoting for symmetric saddle point systems.
    /// Pivots are expected positive where the diagonal is positive and
    /// negative elsewhere; tiny or wrongly signed pivots are regularized and
    /// the perturbation is removed by iterative refinement.
    Ldlt,
}

enum Numeric {
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
    Ldlt { symbolic: Arc<SymbolicCholesky<usize>>, values: Vec<f64> },
}

/// A numeric factorization that can be applied to many right-hand sides.
pub struct Factorization {
    matrix: SparseMatrix,
    norm: f64,
    numeric: Numeric,
}

const RESIDUAL_TOL: f64 = 1e-10;
const LDLT_DELTA: f64 = 1e-9;
const LDLT_EPSILON: f64 = 1e-13;
/// `|A| |x| / |b|` beyond this bound (a lower bound on the condition number)
/// is reported as singular.
const SINGULAR_RATIO: f64 = 1e13;

impl Factorization {
    pub fn new(matrix: &SparseMatrix, kind: FactorKind) -> Result<Self> {
        if matrix.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("matrix has non-finite entries".into()));
        }
        let pattern = &matrix.pattern;
        let numeric = match kind {
            FactorKind::Cholesky => {
                let sym = match pattern.llt.get() {
                    Some(s) => s.clone(),
                    None => {
                        let s = SymbolicLlt::try_new(pattern.symbolic(), Side::Lower)
                            .map_err(|e| Error::Solver(format!("symbolic Cholesky: {e:?}")))?;
                        pattern.llt.get_or_init(|| s).clone()
                    }
                };
                let llt = Llt::try_new_with_symbolic(sym, matrix.as_faer(), Side::Lower).map_err(|e| {
                    Error::Singular(format!("Cholesky breakdown on {}x{} system: {e:?}", matrix.n(), matrix.n()))
                })?;
                Numeric::Llt(llt)
            }
            FactorKind::Lu => {
                let sym = match pattern.lu.get() {
                    Some(s) => s.clone(),
                    None => {
                        let s = SymbolicLu::try_new(pattern.symbolic())
                            .map_err(|e| Error::Solver(format!("symbolic LU: {e:?}")))?;
                        pattern.lu.get_or_init(|| s).clone()
                    }
                };
                let lu = Lu::try_new_with_symbolic(sym, matrix.as_faer()).map_err(|e| {
                    Error::Singular(format!("LU breakdown on {}x{} system: {e:?}", matrix.n(), matrix.n()))
                })?;
                Numeric::Lu(lu)
            }
            FactorKind::Ldlt => {
                let symbolic = match pattern.ldlt.get() {
                    Some(s) => Arc::clone(s),
                    None => {
                        let s = factorize_symbolic_cholesky(
                            pattern.symbolic(),
                            Side::Lower,
                            SymmetricOrdering::Amd,
                            Default::default(),
                        )
                        .map_err(|e| Error::Solver(format!("symbolic LDLT: {e:?}")))?;
                        Arc::clone(pattern.ldlt.get_or_init(|| Arc::new(s)))
                    }
                };
                let signs: Vec<i8> = (0..matrix.n()).map(|i| if matrix.get(i, i) > 0.0 { 1 } else { -1 }).collect();
                let scale = matrix.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let reg = LdltRegularization {
                    dynamic_regularization_signs: Some(&signs),
                    dynamic_regularization_delta: LDLT_DELTA * scale,
                    dynamic_regularization_epsilon: LDLT_EPSILON * scale,
                };
                let mut values = vec![0.0; symbolic.len_val()];
                let params: Spec<LdltParams, f64> = Default::default();
                let mut mem = MemBuffer::try_new(symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, params))
                    .map_err(|e| Error::Solver(format!("LDLT workspace: {e:?}")))?;
                symbolic
                    .factorize_numeric_ldlt(
                        &mut values,
                        matrix.as_faer(),
                        Side::Lower,
                        reg,
                        Par::Seq,
                        MemStack::new(&mut mem),
                        params,
                    )
                    .map_err(|e| {
                        Error::Singular(format!("LDLT breakdown on {}x{} system: {e:?}", matrix.n(), matrix.n()))
                    })?;
                Numeric::Ldlt { symbolic, values }
            }
        };
        Ok(Self { matrix: matrix.clone(), norm: matrix.frobenius_norm(), numeric })
    }

    fn apply_inverse(&self, x: &mut [f64]) {
        let n = x.len();
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        // the CSR arrays were handed over as CSC, i.e. as the transpose
        match &self.numeric {
            Numeric::Llt(f) => f.solve_transpose_in_place(rhs),
            Numeric::Lu(f) => f.solve_transpose_in_place(rhs),
            Numeric::Ldlt { symbolic, values } => {
                let mut mem = MemBuffer::new(symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
                LdltRef::new(symbolic, values).solve_in_place_with_conj(
                    Conj::No,
                    rhs,
                    Par::Seq,
                    MemStack::new(&mut mem),
                );
            }
        }
    }

    /// Solves `A x = b`, refining iteratively until
    /// `|b - A x| <= 1e-10 (|b| + |A| |x|)`. A regularized LDLᵀ factor is
    /// refined further, until the residual stops halving.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.matrix.n();
        if b.len() != n {
            return Err(Error::InvalidInput(format!("rhs length {} for {n}x{n} system", b.len())));
        }
        let regularized = matches!(self.numeric, Numeric::Ldlt { .. });
        let max_steps = if regularized { 10 } else { 4 };
        let b_norm = norm(b);
        let mut x = b.to_vec();
        self.apply_inverse(&mut x);
        let mut previous = f64::INFINITY;
        for _ in 0..max_steps {
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular(format!("non-finite solution of {n}x{n} system")));
            }
            let ax = self.matrix.matvec(&x);
            let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            let r_norm = norm(&r);
            let x_norm = norm(&x);
            if self.norm * x_norm > SINGULAR_RATIO * b_norm {
                return Err(Error::Singular(format!(
                    "{n}x{n} system is numerically singular (|A| |x| / |b| = {:.1e})",
                    self.norm * x_norm / b_norm
                )));
            }
            let converged = r_norm <= RESIDUAL_TOL * (b_norm + self.norm * x_norm);
            if converged && (!regularized || r_norm > 0.5 * previous || r_norm == 0.0) {
                return Ok(x);
            }
            previous = r_norm;
            self.apply_inverse(&mut r);
            x.iter_mut().zip(&r).for_each(|(xi, ri)| *xi += ri);
        }
        let ax = self.matrix.matvec(&x);
        let r_norm = norm(&b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect::<Vec<_>>());
        if regularized && r_norm <= RESIDUAL_TOL * (b_norm + self.norm * norm(&x)) {
            return Ok(x);
        }
        Err(Error::Singular(format!(
            "{n}x{n} system: residual {r_norm:.3e} exceeds tolerance (|b| = {b_norm:.3e}, |A| = {:.3e}, |x| = {:.3e})",
            self.norm,
            norm(&x)
        )))
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
