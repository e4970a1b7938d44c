//! Dense linear algebra for the small-`k`, tall-`n` problems the estimators
//! solve, plus the symmetric-matrix routines the covariance generators need.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major data.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "row {i} has {} columns, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn column_vector(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
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
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(alloc::format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (l, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(l)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vector of length {} against {} columns",
                v.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `self' v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::DimensionMismatch(alloc::format!(
                "vector of length {} against {} rows",
                v.len(),
                self.rows
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(i)) {
                *o += x * vi;
            }
        }
        Ok(out)
    }

    /// `self' self`.
    pub fn gram(&self) -> Matrix {
        let k = self.cols;
        let mut g = Matrix::zeros(k, k);
        for i in 0..self.rows {
            let r = self.row(i);
            for a in 0..k {
                for b in a..k {
                    g.data[a * k + b] += r[a] * r[b];
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                g.data[a * k + b] = g.data[b * k + a];
            }
        }
        g
    }

    /// `self self'`, exploiting symmetry.
    pub fn outer_gram(&self) -> Matrix {
        let n = self.rows;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = dot(self.row(i), self.row(j));
                g.data[i * n + j] = v;
                g.data[j * n + i] = v;
            }
        }
        g
    }

    /// Quadratic form `a' self b`.
    pub fn bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        a.iter()
            .enumerate()
            .map(|(i, &ai)| ai * dot(self.row(i), b))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{}x{} vs {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Adds `w * v v'` in place.
    pub fn add_outer(&mut self, v: &[f64], w: f64) {
        debug_assert!(self.rows == v.len() && self.cols == v.len());
        let n = v.len();
        for a in 0..n {
            let va = v[a] * w;
            for b in 0..n {
                self.data[a * n + b] += va * v[b];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        (0..self.rows).all(|i| {
            (0..i).all(|j| libm::fabs(self[(i, j)] - self[(j, i)]) <= rel_tol * scale)
        })
    }

    /// Replaces the matrix with `(A + A') / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
    }

    /// `a b a'` for square symmetric `b`; the result is symmetrised.
    pub fn sandwich(bread: &Matrix, meat: &Matrix) -> Result<Matrix> {
        let mut out = bread.matmul(meat)?.matmul(&bread.transpose())?;
        out.symmetrize();
        Ok(out)
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(dot(v, v))
}

/// Relative threshold on the R-factor diagonal below which a column is
/// treated as linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Thin Householder QR factorisation of an `n x k` matrix with `n >= k`.
#[derive(Debug, Clone)]
pub struct Qr {
    rows: usize,
    cols: usize,
    /// Householder vectors; reflector `j` acts on rows `j..n`.
    reflectors: Vec<Vec<f64>>,
    r: Matrix,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (n, k) = (a.rows(), a.cols());
        if n < k {
            return Err(Error::RankDeficient {
                rank: n,
                expected: k,
            });
        }
        // Work column-major so each reflector touches contiguous memory.
        let mut cols: Vec<Vec<f64>> = (0..k).map(|j| a.column(j)).collect();
        let mut reflectors = Vec::with_capacity(k);
        let mut r = Matrix::zeros(k, k);

        for j in 0..k {
            let x = &cols[j][j..];
            let norm = norm2(x);
            let mut v = x.to_vec();
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            v[0] -= alpha;
            let vnorm2 = dot(&v, &v);
            if norm == 0.0 || vnorm2 == 0.0 {
                // Zero column: identity reflector, zero diagonal.
                v.iter_mut().for_each(|e| *e = 0.0);
            }
            for col in cols.iter_mut().skip(j) {
                apply_reflector(&v, vnorm2, &mut col[j..]);
            }
            for (i, col) in cols.iter().enumerate().skip(j) {
                r[(j, i)] = col[j];
            }
            reflectors.push(v);
        }

        Ok(Self {
            rows: n,
            cols: k,
            reflectors,
            r,
        })
    }

    pub fn r(&self) -> &Matrix {
        &self.r
    }

    /// Effective rank from the R diagonal with threshold `max |R_ii| * tol`.
    pub fn rank(&self, tol: f64) -> usize {
        let diag: Vec<f64> = self.r.diagonal().iter().map(|d| libm::fabs(*d)).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        diag.iter().filter(|&&d| d > max * tol).count()
    }

    pub fn ensure_full_rank(&self) -> Result<()> {
        let rank = self.rank(RANK_TOLERANCE);
        if rank < self.cols {
            return Err(Error::RankDeficient {
                rank,
                expected: self.cols,
            });
        }
        Ok(())
    }

    /// Overwrites `y` with `Q' y`.
    pub fn apply_qt(&self, y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        for (j, v) in self.reflectors.iter().enumerate() {
            let vnorm2 = dot(v, v);
            apply_reflector(v, vnorm2, &mut y[j..]);
        }
    }

    /// Least-squares solution of `A b = y`.
    pub fn solve_least_squares(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::DimensionMismatch(alloc::format!(
                "response of length {} for {} rows",
                y.len(),
                self.rows
            )));
        }
        self.ensure_full_rank()?;
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        Ok(solve_upper(&self.r, &qty[..self.cols]))
    }

    /// `(A'A)^{-1} = R^{-1} R^{-T}`.
    pub fn gram_inverse(&self) -> Result<Matrix> {
        self.ensure_full_rank()?;
        let rinv = upper_triangular_inverse(&self.r);
        let mut out = rinv.matmul(&rinv.transpose())?;
        out.symmetrize();
        Ok(out)
    }
}

fn apply_reflector(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    if vnorm2 == 0.0 {
        return;
    }
    let s = 2.0 * dot(v, x) / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= s * vi;
    }
}

fn solve_upper(r: &Matrix, b: &[f64]) -> Vec<f64> {
    let k = r.cols();
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|j| r[(i, j)] * x[j]).sum();
        x[i] = (b[i] - s) / r[(i, i)];
    }
    x
}

pub fn upper_triangular_inverse(r: &Matrix) -> Matrix {
    let k = r.rows();
    let mut inv = Matrix::zeros(k, k);
    for j in 0..k {
        inv[(j, j)] = 1.0 / r[(j, j)];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|l| r[(i, l)] * inv[(l, j)]).sum();
            inv[(i, j)] = -s / r[(i, i)];
        }
    }
    inv
}

/// Cholesky factor `L` with `L L' = A` for symmetric positive definite `A`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("cholesky of a non-square matrix".into()));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|m| l[(j, m)] * l[(j, m)]).sum::<f64>();
        if d <= 0.0 || !d.is_finite() {
            return Err(Error::SingularMatrix);
        }
        let ljj = libm::sqrt(d);
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|m| l[(i, m)] * l[(j, m)]).sum::<f64>();
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: &Matrix) -> Result<Matrix> {
    let l = cholesky(a)?;
    let n = a.rows();
    // L^{-1} is lower triangular; invert L' (upper) and reuse.
    let lt_inv = upper_triangular_inverse(&l.transpose());
    let mut inv = lt_inv.matmul(&lt_inv.transpose())?;
    debug_assert_eq!(inv.rows(), n);
    inv.symmetrize();
    Ok(inv)
}

/// Solves `A x = b` by LU factorisation with partial pivoting.
pub fn lu_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() || a.rows() != b.len() {
        return Err(Error::DimensionMismatch("lu_solve expects square A and matching b".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| libm::fabs(m[(i, col)]).total_cmp(&libm::fabs(m[(j, col)])))
            .unwrap_or(col);
        if libm::fabs(m[(pivot, col)]) <= scale * 1e-14 || scale == 0.0 {
            return Err(Error::SingularMatrix);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = m[(col, j)];
                m[(col, j)] = m[(pivot, j)];
                m[(pivot, j)] = tmp;
            }
            x.swap(col, pivot);
        }
        for i in col + 1..n {
            let f = m[(i, col)] / m[(col, col)];
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                m[(i, j)] -= f * m[(col, j)];
            }
            x[i] -= f * x[col];
        }
    }
    Ok(solve_upper(&m, &x))
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations,
/// sorted ascending.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch("eigenvalues of a non-square matrix".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let total = m.frobenius_norm();
        if off <= (f64::EPSILON * total) * (f64::EPSILON * total) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + libm::sqrt(1.0 + theta * theta))
                } else {
                    -1.0 / (-theta + libm::sqrt(1.0 + theta * theta))
                };
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = t * c;
                for r in 0..n {
                    let mrp = m[(r, p)];
                    let mrq = m[(r, q)];
                    m[(r, p)] = c * mrp - s * mrq;
                    m[(r, q)] = s * mrp + c * mrq;
                }
                for r in 0..n {
                    let mpr = m[(p, r)];
                    let mqr = m[(q, r)];
                    m[(p, r)] = c * mpr - s * mqr;
                    m[(q, r)] = s * mpr + c * mqr;
                }
            }
        }
    }
    let mut eig = m.diagonal();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Top eigenpair of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    /// Unit vector with non-negative entry sum.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// Deterministic pseudo-random start vector so that power iteration is a pure
/// function of its input.
fn start_vector(n: usize) -> Vec<f64> {
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    (0..n)
        .map(|_| {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            // Uniform on [0.5, 1.5): keeps a component along any eigenvector
            // with entries of one sign.
            0.5 + (z >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect()
}

fn power_iteration(a: &Matrix, tol: f64, max_iter: usize, value_only: bool) -> Result<EigenPair> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::DimensionMismatch("power iteration needs a non-empty square matrix".into()));
    }
    let n = a.rows();
    let mut v = start_vector(n);
    let nv = norm2(&v);
    v.iter_mut().for_each(|e| *e /= nv);
    let mut value = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    let mut w = vec![0.0; n];

    for it in 1..=max_iter {
        iterations = it;
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = dot(a.row(i), &v);
        }
        let rayleigh = dot(&v, &w);
        let wnorm = norm2(&w);
        if wnorm == 0.0 {
            // v lies in the null space; a zero matrix has top eigenvalue 0.
            value = 0.0;
            converged = a.max_abs() == 0.0;
            break;
        }
        let residual = libm::sqrt(
            w.iter()
                .zip(&v)
                .map(|(wi, vi)| (wi - rayleigh * vi) * (wi - rayleigh * vi))
                .sum::<f64>(),
        );
        let previous = value;
        value = rayleigh;
        if residual <= tol * libm::fabs(rayleigh) {
            converged = true;
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wnorm;
        }
        if value_only && it > 1 && libm::fabs(value - previous) <= tol * libm::fabs(value) {
            converged = true;
            break;
        }
    }

    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|e| *e = -*e);
    }
    Ok(EigenPair {
        value,
        vector: v,
        iterations,
        converged,
    })
}

/// Dominant eigenpair of a symmetric positive semi-definite matrix.
///
/// Stops once `||A v - lambda v|| <= 1e-10 * lambda` or after `10^4`
/// iterations.
pub fn top_eigenpair(a: &Matrix) -> Result<EigenPair> {
    power_iteration(a, POWER_TOLERANCE, POWER_MAX_ITER, false)
}

/// Largest eigenvalue of a symmetric PSD matrix. Also stops when the Rayleigh
/// quotient stagnates, which is much faster when the leading eigenvalues are
/// clustered.
pub fn top_eigenvalue(a: &Matrix) -> Result<f64> {
    power_iteration(a, POWER_TOLERANCE, POWER_MAX_ITER, true).map(|p| p.value)
}

/// Factor `F` (n x rank) with `F F' = A` for symmetric PSD `A`, computed by
/// diagonally pivoted Cholesky.
#[derive(Debug, Clone)]
pub struct PsdFactor {
    factor: Matrix,
}

/// Pivots more negative than this multiple of `max |A_ij|` mean the matrix is
/// not PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

impl PsdFactor {
    pub fn new(a: &Matrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch("PSD factor of a non-square matrix".into()));
        }
        if !a.all_finite() {
            return Err(Error::NonFiniteData("covariance matrix".into()));
        }
        let n = a.rows();
        let scale = a.max_abs();
        let stop = scale * n as f64 * f64::EPSILON;
        let mut diag = a.diagonal();
        let mut order: Vec<usize> = (0..n).collect();
        // Row `i` holds L[i, 0..j] for rows not yet pivoted, so the inner
        // products below run over contiguous memory.
        let mut lrows: Vec<Vec<f64>> = vec![Vec::new(); n];
        let mut rank = 0;

        for j in 0..n {
            let (p, &dmax) = order[j..]
                .iter()
                .enumerate()
                .map(|(i, &o)| (i + j, &diag[o]))
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty range");
            if dmax <= stop {
                for &o in &order[j..] {
                    if diag[o] < -PSD_TOLERANCE * scale {
                        return Err(Error::NotPsd { pivot: diag[o] });
                    }
                }
                break;
            }
            order.swap(j, p);
            let pj = order[j];
            let ljj = libm::sqrt(dmax);
            let pivot_row = core::mem::take(&mut lrows[pj]);
            for &pi in &order[j + 1..] {
                let s = a[(pi, pj)] - dot(&lrows[pi], &pivot_row);
                let l = s / ljj;
                lrows[pi].push(l);
                diag[pi] -= l * l;
            }
            let mut pivot_row = pivot_row;
            pivot_row.push(ljj);
            lrows[pj] = pivot_row;
            diag[pj] = 0.0;
            rank += 1;
        }

        let mut factor = Matrix::zeros(n, rank);
        for (i, row) in lrows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                factor[(i, j)] = v;
            }
        }
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    pub fn rank(&self) -> usize {
        self.factor.cols()
    }

    pub fn factor(&self) -> &Matrix {
        &self.factor
    }
}
