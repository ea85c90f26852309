//! Dense complex linear algebra.
//!
//! Matrices are stored row-major. Composite spaces are always ordered
//! ancilla ⊗ system: a basis index on `C^{dim_a} ⊗ C^{dim_b}` is
//! `a * dim_b + b`. Every Choi matrix, partial trace and Schmidt reshaping in
//! the crate uses this ordering.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default tolerance on `‖h − h†‖_max` for Hermitian inputs.
pub const HERMITICITY_TOL: f64 = 1e-10;
/// Default tolerance on negative eigenvalues of a density operator.
pub const PSD_TOL: f64 = 1e-9;

const MAX_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
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

    /// Builds a matrix from row-major entries, rejecting non-finite values.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from real rows.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let cl = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, cl, |i, j| C64::new(rows[i][j], 0.0))
    }

    pub fn diag(values: &[C64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn diag_real(values: &[f64]) -> Self {
        let v: Vec<C64> = values.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&v)
    }

    /// Column vector from amplitudes.
    pub fn column(v: &[C64]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    /// `|v⟩⟨v|`.
    pub fn outer(v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[C64]) {
        for (i, z) in v.iter().enumerate() {
            self[(i, j)] = *z;
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max_ij |a_ij − b_ij|`; infinite on a shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// `(m + m†) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, a) in row.iter().enumerate() {
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let other_row = &other.data[k * other.cols..(k + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// `⟨v|m|v⟩`.
    pub fn quadratic_form(&self, v: &[C64]) -> C64 {
        let mv = self.mul_vec_unchecked(v);
        v.iter().zip(&mv).map(|(a, b)| a.conj() * b).sum()
    }

    fn mul_vec_unchecked(&self, v: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Row-major vectorization: `vec(x)[i * cols + j] = x[i, j]`.
    pub fn vectorize(&self) -> Vec<C64> {
        self.data.clone()
    }

    pub fn unvectorize(rows: usize, cols: usize, v: &[C64]) -> Result<Self> {
        Self::from_vec(rows, cols, v.to_vec())
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| a[(x, col)].norm().total_cmp(&a[(y, col)].norm()))
                .unwrap_or(col);
            if a[(pivot, col)].norm() <= 1e-300 * scale {
                return Err(Error::IllConditioned(f64::INFINITY));
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                    inv.data.swap(pivot * n + j, col * n + j);
                }
            }
            let p = C64::new(1.0, 0.0) / a[(col, col)];
            for j in 0..n {
                a[(col, j)] *= p;
                inv[(col, j)] *= p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f.re == 0.0 && f.im == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let av = a[(col, j)];
                    let iv = inv[(col, j)];
                    a[(i, j)] -= f * av;
                    inv[(i, j)] -= f * iv;
                }
            }
        }
        Ok(inv)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in add");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "shape mismatch in sub");
        ComplexMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, rhs.rows, "shape mismatch in mul");
        self.mul_unchecked(rhs)
    }
}

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.rows)
            .map(|i| (0..self.cols).map(|j| [self[(i, j)].re, self[(i, j)].im]).collect())
            .collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let r = rows.len();
        let cl = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != cl) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        let data = rows.into_iter().flatten().map(|[re, im]| C64::new(re, im)).collect();
        ComplexMatrix::from_vec(r, cl, data).map_err(serde::de::Error::custom)
    }
}

/// Kronecker product `a ⊗ b`: `(a⊗b)[i·p + r, j·q + s] = a[i,j]·b[r,s]` where
/// `b` is `p × q`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (p, q) = (b.rows, b.cols);
    let mut out = ComplexMatrix::zeros(a.rows * p, a.cols * q);
    for i in 0..a.rows {
        for j in 0..a.cols {
            let aij = a[(i, j)];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for r in 0..p {
                for s in 0..q {
                    out[(i * p + r, j * q + s)] = aij * b[(r, s)];
                }
            }
        }
    }
    out
}

/// Kronecker product of vectors.
pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().flat_map(|x| b.iter().map(move |y| x * y)).collect()
}

/// Which tensor factor a partial trace removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of an operator on `C^{dim_a} ⊗ C^{dim_b}`.
pub fn partial_trace(
    m: &ComplexMatrix,
    dim_a: usize,
    dim_b: usize,
    traced: Factor,
) -> Result<ComplexMatrix> {
    let n = dim_a * dim_b;
    if dim_a == 0 || dim_b == 0 || m.rows != n || m.cols != n {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of a {}x{} matrix over {dim_a}x{dim_b}",
            m.rows, m.cols
        )));
    }
    Ok(match traced {
        Factor::First => ComplexMatrix::from_fn(dim_b, dim_b, |r, s| {
            (0..dim_a).map(|a| m[(a * dim_b + r, a * dim_b + s)]).sum()
        }),
        Factor::Second => ComplexMatrix::from_fn(dim_a, dim_a, |i, j| {
            (0..dim_b).map(|b| m[(i * dim_b + b, j * dim_b + b)]).sum()
        }),
    })
}

/// A square matrix Hermitian within tolerance, stored symmetrized.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    /// Validates against [`HERMITICITY_TOL`] and symmetrizes.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(matrix, HERMITICITY_TOL)
    }

    pub fn with_tolerance(matrix: ComplexMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian operator must be square, got {}x{}",
                matrix.rows, matrix.cols
            )));
        }
        if matrix.data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = matrix.hermiticity_deviation();
        if dev > tol {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self {
            matrix: matrix.hermitian_part(),
        })
    }

    /// Tolerance relative to the largest entry; for products of maps whose
    /// entries are far from unit scale.
    pub fn new_relative(matrix: ComplexMatrix) -> Result<Self> {
        let tol = HERMITICITY_TOL * matrix.max_abs().max(1.0);
        Self::with_tolerance(matrix, tol)
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eig(&self) -> Result<Eigen> {
        eig_hermitian(self)
    }

    pub fn trace_norm(&self) -> Result<f64> {
        trace_norm(self)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// `⟨v|h|v⟩`, real for Hermitian `h`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        self.matrix.quadratic_form(v).re
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix + &other.matrix,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            matrix: &self.matrix - &other.matrix,
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale_real(s),
        }
    }
}

impl<'de> Deserialize<'de> for HermitianOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let m = ComplexMatrix::deserialize(d)?;
        HermitianOperator::new(m).map_err(serde::de::Error::custom)
    }
}

/// Eigendecomposition `h = V diag(λ) V†` with `λ` ascending.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl Eigen {
    pub fn vector(&self, j: usize) -> Vec<C64> {
        self.vectors.col(j)
    }

    /// Projector onto the span of eigenvectors whose eigenvalue satisfies `keep`.
    pub fn spectral_projector(&self, keep: impl Fn(f64) -> bool) -> ComplexMatrix {
        let n = self.vectors.rows;
        let mut p = ComplexMatrix::zeros(n, n);
        for (j, &l) in self.values.iter().enumerate() {
            if keep(l) {
                let v = self.vector(j);
                for a in 0..n {
                    for b in 0..n {
                        p[(a, b)] += v[a] * v[b].conj();
                    }
                }
            }
        }
        p
    }
}

/// Cyclic Jacobi eigensolver for Hermitian matrices.
///
/// Sweeps visit pairs `(p, q)` in row order, so the result is a
/// deterministic function of the input. Ties in the ascending sort keep the
/// solver's column order.
pub fn eig_hermitian(h: &HermitianOperator) -> Result<Eigen> {
    let n = h.dim();
    let mut a = h.matrix.hermitian_part();
    let mut v = ComplexMatrix::identity(n);
    let scale = a.frobenius_norm();
    if scale == 0.0 || n == 1 {
        return Ok(sorted_eigen(&a, v));
    }
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].norm_sqr())
            .sum();
        if off.sqrt() <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag <= 1e-300 || mag <= 1e-18 * scale {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / mag;
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // U = diag(1, e^{-iφ}) · [[c, s], [-s, c]] on the (p, q) plane.
                let u_pp = C64::new(cs, 0.0);
                let u_pq = C64::new(sn, 0.0);
                let u_qp = -phase.conj() * sn;
                let u_qq = phase.conj() * cs;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * u_pp + akq * u_qp;
                    a[(k, q)] = akp * u_pq + akq * u_qq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * u_pp + vkq * u_qp;
                    v[(k, q)] = vkp * u_pq + vkq * u_qq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = u_pp.conj() * apk + u_qp.conj() * aqk;
                    a[(q, k)] = u_pq.conj() * apk + u_qq.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)] = C64::new(a[(p, p)].re, 0.0);
                a[(q, q)] = C64::new(a[(q, q)].re, 0.0);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "Jacobi eigensolver",
            sweeps: MAX_SWEEPS,
        });
    }
    Ok(sorted_eigen(&a, v))
}

fn sorted_eigen(a: &ComplexMatrix, v: ComplexMatrix) -> Eigen {
    let n = a.rows;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].re.total_cmp(&a[(y, y)].re));
    let values = order.iter().map(|&j| a[(j, j)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Eigen { values, vectors }
}

/// `‖h‖_tr = Σ|λ_i|`.
pub fn trace_norm(h: &HermitianOperator) -> Result<f64> {
    Ok(eig_hermitian(h)?.values.iter().map(|l| l.abs()).sum())
}

/// Thin singular value decomposition `m = U diag(s) V†` with `s` nonincreasing.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

/// One-sided (Hestenes) Jacobi SVD. Small singular values are resolved to
/// working precision, which rank decisions rely on.
pub fn svd(m: &ComplexMatrix) -> Result<Svd> {
    if m.rows < m.cols {
        let t = svd(&m.adjoint())?;
        return Ok(Svd {
            u: t.v,
            singular_values: t.singular_values,
            v: t.u,
        });
    }
    let (rows, n) = (m.rows, m.cols);
    let mut a = m.clone();
    let mut v = ComplexMatrix::identity(n);
    let mut converged = n == 1;
    // Columns below this squared norm are rounding noise.
    let negligible = (1e-15 * m.frobenius_norm()).powi(2);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..rows {
                    alpha += a[(i, p)].norm_sqr();
                    beta += a[(i, q)].norm_sqr();
                    gamma += a[(i, p)].conj() * a[(i, q)];
                }
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || alpha <= negligible || beta <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let ap = a[(i, p)];
                    let aq = a[(i, q)] * phase.conj();
                    a[(i, p)] = ap * cs - aq * sn;
                    a[(i, q)] = ap * sn + aq * cs;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)] * phase.conj();
                    v[(i, p)] = vp * cs - vq * sn;
                    v[(i, q)] = vp * sn + vq * cs;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "Jacobi SVD",
            sweeps: MAX_SWEEPS,
        });
    }
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..rows).map(|i| a[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let top = norms[order[0]];
    let mut u_cols: Vec<Vec<C64>> = Vec::with_capacity(n);
    let mut singular_values = Vec::with_capacity(n);
    for &j in &order {
        let s = norms[j];
        singular_values.push(s);
        if s > 1e-300 && s > 1e-15 * top {
            u_cols.push(a.col(j).iter().map(|z| z / s).collect());
        } else {
            u_cols.push(Vec::new());
        }
    }
    let u_cols = complete_orthonormal(rows, u_cols);
    let u = ComplexMatrix::from_fn(rows, n, |i, j| u_cols[j][i]);
    let v = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(Svd { u, singular_values, v })
}

/// Replaces empty entries of `cols` with unit vectors orthogonal to every
/// other column, drawn from the standard basis in index order.
fn complete_orthonormal(dim: usize, mut cols: Vec<Vec<C64>>) -> Vec<Vec<C64>> {
    for j in 0..cols.len() {
        if !cols[j].is_empty() {
            continue;
        }
        let mut best: Option<(f64, Vec<C64>)> = None;
        for e in 0..dim {
            let mut w = vec![C64::new(0.0, 0.0); dim];
            w[e] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for other in cols.iter().filter(|c| !c.is_empty()) {
                    let proj: C64 = other.iter().zip(&w).map(|(o, x)| o.conj() * x).sum();
                    for (x, o) in w.iter_mut().zip(other) {
                        *x -= proj * o;
                    }
                }
            }
            let nrm = vec_norm(&w);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b + 1e-12) {
                best = Some((nrm, w));
            }
        }
        let (nrm, w) = best.expect("dimension is positive");
        cols[j] = w.iter().map(|z| z / nrm).collect();
    }
    cols
}

/// Thin QR `m = Q T` with `Q` an isometry (`m.rows ≥ m.cols`).
///
/// Rank-deficient columns get an orthonormal completion in `Q` and a zero
/// diagonal entry in `T`, so `Q T` still reproduces `m`.
pub fn thin_qr(m: &ComplexMatrix) -> (ComplexMatrix, ComplexMatrix) {
    let (rows, k) = (m.rows, m.cols);
    assert!(rows >= k, "thin QR needs rows >= cols");
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut q_cols: Vec<Vec<C64>> = Vec::with_capacity(k);
    let mut t = ComplexMatrix::zeros(k, k);
    let mut deficient = Vec::new();
    for j in 0..k {
        let mut w = m.col(j);
        for _ in 0..2 {
            for (i, qi) in q_cols.iter().enumerate() {
                if qi.is_empty() {
                    continue;
                }
                let proj: C64 = qi.iter().zip(&w).map(|(a, b)| a.conj() * b).sum();
                t[(i, j)] += proj;
                for (x, qv) in w.iter_mut().zip(qi) {
                    *x -= proj * qv;
                }
            }
        }
        let nrm = vec_norm(&w);
        if nrm > 1e-13 * scale && nrm > 1e-300 {
            t[(j, j)] = C64::new(nrm, 0.0);
            q_cols.push(w.iter().map(|z| z / nrm).collect());
        } else {
            deficient.push(j);
            q_cols.push(Vec::new());
        }
    }
    let q_cols = complete_orthonormal(rows, q_cols);
    let q = ComplexMatrix::from_fn(rows, k, |i, j| q_cols[j][i]);
    (q, t)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn normalize(v: &[C64]) -> Option<Vec<C64>> {
    let n = vec_norm(v);
    (n > 1e-300 && n.is_finite()).then(|| v.iter().map(|z| z / n).collect())
}

/// Positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct DensityOperator {
    matrix: HermitianOperator,
}

impl DensityOperator {
    pub fn new(matrix: HermitianOperator) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::NotDensity(format!("trace {tr}")));
        }
        let min = matrix.eig()?.values[0];
        if min < -PSD_TOL {
            return Err(Error::NotDensity(format!("eigenvalue {min:e}")));
        }
        Ok(Self { matrix })
    }

    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            matrix: HermitianOperator {
                matrix: ComplexMatrix::outer(&psi.amplitudes).hermitian_part(),
            },
        }
    }

    /// Maximally mixed state `I/d`.
    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: HermitianOperator {
                matrix: ComplexMatrix::identity(d).scale_real(1.0 / d as f64),
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.matrix
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        self.matrix.matrix()
    }
}

impl<'de> Deserialize<'de> for DensityOperator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let h = HermitianOperator::deserialize(d)?;
        DensityOperator::new(h).map_err(serde::de::Error::custom)
    }
}

/// Unit vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    /// Accepts vectors within `1e-12` of unit norm.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let n = vec_norm(&amplitudes);
        if amplitudes.is_empty() || (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("state norm {n}")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes any nonzero vector.
    pub fn normalized(amplitudes: &[C64]) -> Result<Self> {
        normalize(amplitudes)
            .map(|amplitudes| Self { amplitudes })
            .ok_or_else(|| Error::InvalidArgument("zero vector".into()))
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// `Σ_i |i⟩|i⟩ / √d`.
    pub fn maximally_entangled(d: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); d * d];
        let s = 1.0 / (d as f64).sqrt();
        for i in 0..d {
            amplitudes[i * d + i] = C64::new(s, 0.0);
        }
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }
}

/// Deterministic generator for `(seed, stream)`.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-random pure state.
pub fn random_pure_state(dim: usize, seed: u64) -> PureState {
    let mut rng = seeded_rng(seed, 0);
    random_pure_state_with(dim, &mut rng)
}

pub fn random_pure_state_with<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| complex_gaussian(rng)).collect();
        if let Ok(s) = PureState::normalized(&v) {
            return s;
        }
    }
}

/// Random density operator of the given rank: `G G† / tr(G G†)` for a
/// `dim × rank` complex Gaussian `G`.
pub fn random_density(dim: usize, rank: usize, seed: u64) -> Result<DensityOperator> {
    let mut rng = seeded_rng(seed, 0);
    random_density_with(dim, rank, &mut rng)
}

pub fn random_density_with<R: rand::Rng + ?Sized>(
    dim: usize,
    rank: usize,
    rng: &mut R,
) -> Result<DensityOperator> {
    if rank == 0 || rank > dim {
        return Err(Error::InvalidArgument(format!("rank {rank} for dimension {dim}")));
    }
    let g = gaussian_matrix(dim, rank, rng);
    let gg = &g * &g.adjoint();
    let tr = gg.trace().re;
    DensityOperator::from_matrix(gg.scale_real(1.0 / tr))
}

/// Random Hermitian matrix with Gaussian entries.
pub fn random_hermitian<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianOperator {
    let g = gaussian_matrix(dim, dim, rng);
    HermitianOperator {
        matrix: g.hermitian_part(),
    }
}

/// Haar-random unitary via QR of a complex Gaussian matrix.
pub fn random_unitary<R: rand::Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = gaussian_matrix(dim, dim, rng);
    let (q, t) = thin_qr(&g);
    // Fix the phases of R's diagonal so the distribution is Haar.
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        let d = t[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        q[(i, j)] * ph
    })
}

pub mod pauli {
    use super::{c, ComplexMatrix};

    pub fn i2() -> ComplexMatrix {
        ComplexMatrix::identity(2)
    }

    pub fn x() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]).unwrap()
    }

    pub fn y() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]).unwrap()
    }

    pub fn z() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]).unwrap()
    }

    /// `σ₋ = |0⟩⟨1|`.
    pub fn lowering() -> ComplexMatrix {
        ComplexMatrix::from_vec(2, 2, vec![c(0., 0.), c(1., 0.), c(0., 0.), c(0., 0.)]).unwrap()
    }

    /// `[I, σx, σy, σz]`.
    pub fn all() -> [ComplexMatrix; 4] {
        [i2(), x(), y(), z()]
    }
}
