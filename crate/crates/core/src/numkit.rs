//! Dense complex linear algebra for the small matrices used throughout the
//! crate (never larger than 8×8).
//!
//! [`CMatrix`] is a row-major matrix of [`C64`] entries. The decompositions
//! here are written for clarity at tiny sizes: a one-sided Jacobi SVD and a
//! Cholesky-based Hermitian solver.

use std::fmt;
use std::ops::{Index, IndexMut, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Row-major dense complex matrix.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl CMatrix {
    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid_argument(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid_argument(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|z| !z.is_finite()) {
            return Err(Error::invalid_argument(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::invalid_argument("ragged rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn column_vector(entries: &[C64]) -> Result<Self> {
        Self::new(entries.len(), 1, entries.to_vec())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Places `values` on the main diagonal of a `rows`×`cols` zero matrix.
    pub fn diag_embed(values: &[f64], rows: usize, cols: usize) -> Result<Self> {
        if values.len() > rows.min(cols) {
            return Err(Error::invalid_argument(format!(
                "{} diagonal values do not fit a {rows}x{cols} matrix",
                values.len()
            )));
        }
        let mut m = Self::zeros(rows, cols);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn column_matrix(&self, j: usize) -> CMatrix {
        CMatrix::from_fn(self.rows, 1, |i, _| self[(i, j)])
    }

    pub fn set_column(&mut self, j: usize, values: &[C64]) {
        assert_eq!(values.len(), self.rows, "column length mismatch");
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn block(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_fn(rows, cols, |i, j| self[(row0 + i, col0 + j)])
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn matmul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.cols != other.rows {
            return Err(Error::invalid_argument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.data[k * other.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn try_sub(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::invalid_argument(format!(
                "cannot subtract {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a - b)
            .collect();
        Ok(CMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, factor: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * factor).collect(),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.is_finite())
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Panics on a dimension mismatch; use [`CMatrix::matmul`] for a checked product.
impl Mul for &CMatrix {
    type Output = CMatrix;

    fn mul(self, rhs: &CMatrix) -> CMatrix {
        self.matmul(rhs).expect("matrix product dimension mismatch")
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;

    fn sub(self, rhs: &CMatrix) -> CMatrix {
        self.try_sub(rhs)
            .expect("matrix difference dimension mismatch")
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.6}{:+.6}j  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

pub fn matmul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    a.matmul(b)
}

pub fn adjoint(a: &CMatrix) -> CMatrix {
    a.adjoint()
}

pub fn frobenius_norm(a: &CMatrix) -> f64 {
    a.frobenius_norm()
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n)
}

pub fn diag_embed(values: &[f64], rows: usize, cols: usize) -> Result<CMatrix> {
    CMatrix::diag_embed(values, rows, cols)
}

/// `‖AᴴA − I‖_F`, zero for a matrix with orthonormal columns.
pub fn unitarity_error(a: &CMatrix) -> f64 {
    let gram = &a.adjoint() * a;
    (&gram - &CMatrix::identity(a.cols())).frobenius_norm()
}

pub(crate) fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `A = U · diag_embed(singular_values) · Vᴴ`.
#[derive(Clone, Debug)]
pub struct SvdResult {
    pub u: CMatrix,
    pub singular_values: Vec<f64>,
    pub v: CMatrix,
}

impl SvdResult {
    pub fn sigma(&self) -> CMatrix {
        CMatrix::diag_embed(&self.singular_values, self.u.rows(), self.v.rows())
            .expect("singular values fit their own factorization")
    }

    pub fn reconstruct(&self) -> CMatrix {
        &(&self.u * &self.sigma()) * &self.v.adjoint()
    }

    pub fn largest(&self) -> f64 {
        self.singular_values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self
            .singular_values
            .last()
            .expect("at least one singular value")
    }
}

const JACOBI_MAX_SWEEPS: usize = 80;

/// Singular value decomposition by one-sided (Hestenes) Jacobi rotations.
///
/// Columns are swept in cyclic `(i, j)` order with `i < j`. Singular values
/// are sorted descending with a stable sort, so repeated values keep the
/// column order the sweep left them in. The phase of each right singular
/// vector is fixed by making its first nonzero entry real and non-negative;
/// the matching left vector absorbs the same phase.
pub fn svd(a: &CMatrix) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::invalid_argument("svd input has non-finite entries"));
    }
    if a.rows() >= a.cols() {
        jacobi_tall(a)
    } else {
        // A = U S Vᴴ  <=>  Aᴴ = V Sᵀ Uᴴ
        let t = jacobi_tall(&a.adjoint())?;
        let mut out = SvdResult {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        };
        fix_phases(&mut out);
        Ok(out)
    }
}

fn jacobi_tall(a: &CMatrix) -> Result<SvdResult> {
    let (m, n) = a.shape();
    let mut work = a.clone();
    let mut v = CMatrix::identity(n);

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in (i + 1)..n {
                let ci = work.column(i);
                let cj = work.column(j);
                let alpha = ci.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let beta = cj.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let gamma = inner(&ci, &cj);
                let g = gamma.norm();
                if g == 0.0 || g <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // Rotating column j by conj(phase) makes the pair's inner product real.
                let phase = (gamma / g).conj();
                rotate_columns(&mut work, i, j, c, s, phase);
                rotate_columns(&mut v, i, j, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n).map(|j| norm(&work.column(j))).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let singular_values: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let sigma_max = singular_values[0];
    let rank_tol = sigma_max * f64::EPSILON * (m.max(n) as f64);

    let mut u = CMatrix::zeros(m, m);
    let mut v_sorted = CMatrix::zeros(n, n);
    let mut filled = vec![false; m];
    for (k, &j) in order.iter().enumerate() {
        v_sorted.set_column(k, &v.column(j));
        if norms[j] > rank_tol && norms[j] > 0.0 {
            let col: Vec<C64> = work.column(j).iter().map(|z| z / norms[j]).collect();
            u.set_column(k, &col);
            filled[k] = true;
        }
    }
    complete_basis(&mut u, &mut filled);

    let mut out = SvdResult {
        u,
        singular_values,
        v: v_sorted,
    };
    fix_phases(&mut out);
    Ok(out)
}

fn rotate_columns(m: &mut CMatrix, i: usize, j: usize, c: f64, s: f64, phase: C64) {
    for r in 0..m.rows() {
        let a = m[(r, i)];
        let b = m[(r, j)] * phase;
        m[(r, i)] = a * c - b * s;
        m[(r, j)] = a * s + b * c;
    }
}

/// Fills the unset columns of `u` with an orthonormal completion, drawing
/// each new column from the standard basis vector with the largest residual.
fn complete_basis(u: &mut CMatrix, filled: &mut [bool]) {
    let m = u.rows();
    for k in 0..m {
        if filled[k] {
            continue;
        }
        let mut best: Option<(f64, Vec<C64>)> = None;
        for e in 0..m {
            let mut cand = vec![C64::new(0.0, 0.0); m];
            cand[e] = C64::new(1.0, 0.0);
            // Two Gram-Schmidt passes.
            for _ in 0..2 {
                for (col, _) in filled.iter().enumerate().filter(|(_, f)| **f) {
                    let q = u.column(col);
                    let proj = inner(&q, &cand);
                    for (c, qv) in cand.iter_mut().zip(&q) {
                        *c -= proj * qv;
                    }
                }
            }
            let nrm = norm(&cand);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, cand) = best.expect("non-empty basis");
        let col: Vec<C64> = cand.iter().map(|z| z / nrm).collect();
        u.set_column(k, &col);
        filled[k] = true;
    }
}

const PHASE_ZERO_TOL: f64 = 1e-12;

fn fix_phases(svd: &mut SvdResult) {
    let n = svd.v.cols();
    for k in 0..n {
        let col = svd.v.column(k);
        let Some(lead) = col.iter().find(|z| z.norm() > PHASE_ZERO_TOL) else {
            continue;
        };
        let rot = (lead / lead.norm()).conj();
        let fixed: Vec<C64> = col.iter().map(|z| z * rot).collect();
        svd.v.set_column(k, &fixed);
        if k < svd.u.cols() {
            let ucol: Vec<C64> = svd.u.column(k).iter().map(|z| z * rot).collect();
            svd.u.set_column(k, &ucol);
        }
    }
}

/// Solves `A x = b` for Hermitian positive-definite `A` by Cholesky
/// factorization. `b` may hold several right-hand sides as columns.
pub fn hermitian_solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::invalid_argument(format!(
            "hermitian_solve needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if b.rows() != n {
        return Err(Error::invalid_argument(format!(
            "right-hand side has {} rows, expected {n}",
            b.rows()
        )));
    }

    let scale = (0..n).map(|i| a[(i, i)].re.abs()).fold(0.0, f64::max);
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > scale * 1e-14) || !d.is_finite() {
            return Err(Error::degenerate(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }

    let mut x = b.clone();
    for c in 0..b.cols() {
        // L y = b
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        // Lᴴ x = y
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in (i + 1)..n {
                s -= l[(k, i)].conj() * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Ratio of extreme singular values. Numerically rank-deficient input
/// (smallest value below `max(m, n) · ε · σ_max`) reports `+∞`.
pub fn condition_number(a: &CMatrix) -> Result<f64> {
    if a.frobenius_norm() == 0.0 {
        return Err(Error::invalid_argument("condition number of a zero matrix"));
    }
    let s = svd(a)?;
    let (hi, lo) = (s.largest(), s.smallest());
    if lo <= hi * f64::EPSILON * (a.rows().max(a.cols()) as f64) {
        Ok(f64::INFINITY)
    } else {
        Ok(hi / lo)
    }
}
