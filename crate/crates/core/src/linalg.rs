//! Small dense complex linear algebra: a row-major matrix type, Cholesky
//! factorisation and a cyclic Jacobi eigensolver for Hermitian matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::error::{bail, Result};

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            bail!(
                Argument,
                "matrix data length {} does not match {}x{}",
                data.len(),
                rows,
                cols
            );
        }
        Ok(CMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn matmul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.rows {
            bail!(
                Argument,
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            );
        }
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^H * rhs` without materialising the adjoint.
    pub fn adjoint_mul(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.rows != rhs.rows {
            bail!(
                Argument,
                "cannot multiply ({}x{})^H by {}x{}",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            );
        }
        let mut out = CMatrix::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let lhs_row = &self.data[k * self.cols..(k + 1) * self.cols];
            let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
            for (i, a) in lhs_row.iter().enumerate() {
                if *a == ZERO {
                    continue;
                }
                let a = a.conj();
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhs^H` without materialising the adjoint.
    pub fn mul_adjoint(&self, rhs: &CMatrix) -> Result<CMatrix> {
        if self.cols != rhs.cols {
            bail!(
                Argument,
                "cannot multiply {}x{} by ({}x{})^H",
                self.rows,
                self.cols,
                rhs.rows,
                rhs.cols
            );
        }
        let mut out = CMatrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                let b = rhs.row(j);
                out.data[i * rhs.rows + j] = a.iter().zip(b).map(|(x, y)| x * y.conj()).sum();
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn add_assign(&mut self, rhs: &CMatrix) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            bail!(Argument, "shape mismatch in matrix addition");
        }
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        Ok(())
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        debug_assert_eq!(self.data.len(), other.data.len());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Real part of the Frobenius inner product `<self, other>`.
    pub fn inner_re(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Lower-triangular Cholesky factor `L` with `L L^H = a`.
///
/// Only the lower triangle of `a` is read; `a` is assumed Hermitian.
pub fn cholesky(a: &CMatrix) -> Result<CMatrix> {
    let n = a.rows();
    if a.cols() != n {
        bail!(Argument, "cholesky needs a square matrix");
    }
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)].re;
        for k in 0..j {
            diag -= l[(j, k)].norm_sqr();
        }
        if !(diag > 0.0) || !diag.is_finite() {
            bail!(
                Numerical,
                "matrix not positive definite at pivot {} (value {:e}); increase diagonal loading",
                j,
                diag
            );
        }
        let ljj = libm::sqrt(diag);
        l[(j, j)] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: CMatrix,
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigensolver for a Hermitian matrix.
///
/// Eigenpairs are sorted by descending eigenvalue (stable in the solver's
/// column order for ties) and each eigenvector is rotated so that its
/// largest-magnitude entry is real and positive.
pub fn hermitian_eigen(a: &CMatrix) -> Result<HermitianEigen> {
    let n = a.rows();
    if a.cols() != n {
        bail!(Argument, "eigendecomposition needs a square matrix");
    }
    if a.as_slice().iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        bail!(Numerical, "non-finite entry in matrix passed to eigensolver");
    }
    let mut m = a.clone();
    // Symmetrise so round-off in the caller's accumulation does not leak in.
    for i in 0..n {
        m[(i, i)] = Complex64::new(m[(i, i)].re, 0.0);
        for j in i + 1..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut v = CMatrix::identity(n);
    let scale = libm::sqrt(m.energy());

    let mut converged = n < 2 || scale == 0.0;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        if libm::sqrt(off) <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let b = apq.norm();
                if b == 0.0 || b <= 1e-300 {
                    continue;
                }
                let phase = apq / b;
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let theta = (aqq - app) / (2.0 * b);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(theta * theta + 1.0))
                } else {
                    -1.0 / (-theta + libm::sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]]
                let g_pp = Complex64::new(c, 0.0);
                let g_pq = Complex64::new(s, 0.0);
                let g_qp = -phase.conj() * s;
                let g_qq = phase.conj() * c;
                // m <- m G (columns p, q)
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * g_pp + mkq * g_qp;
                    m[(k, q)] = mkp * g_pq + mkq * g_qq;
                }
                // m <- G^H m (rows p, q)
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = g_pp.conj() * mpk + g_qp.conj() * mqk;
                    m[(q, k)] = g_pq.conj() * mpk + g_qq.conj() * mqk;
                }
                m[(p, q)] = crate::linalg::ZERO;
                m[(q, p)] = crate::linalg::ZERO;
                m[(p, p)] = Complex64::new(m[(p, p)].re, 0.0);
                m[(q, q)] = Complex64::new(m[(q, q)].re, 0.0);
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
            }
        }
    }
    if !converged {
        bail!(
            Numerical,
            "Jacobi eigensolver did not converge in {} sweeps",
            JACOBI_MAX_SWEEPS
        );
    }

    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps solver order for exact ties.
    order.sort_by(|&i, &j| {
        m[(j, j)]
            .re
            .partial_cmp(&m[(i, i)].re)
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<Complex64> = (0..n).map(|k| v[(k, src)]).collect();
        normalize_phase(&mut col);
        for (k, x) in col.into_iter().enumerate() {
            vectors[(k, dst)] = x;
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Rotates `v` so its largest-magnitude entry (first one on ties) is real positive.
pub fn normalize_phase(v: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_mag = -1.0;
    for (i, x) in v.iter().enumerate() {
        let mag = x.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let rot = v[best].conj() / best_mag;
    for x in v.iter_mut() {
        *x *= rot;
    }
    v[best] = Complex64::new(v[best].norm(), 0.0);
}
