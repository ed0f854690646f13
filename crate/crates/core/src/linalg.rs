//! Dense row-major matrices, a symmetric eigensolver (Householder
//! tridiagonalization followed by implicit QL with Wilkinson-style shifts) and
//! Householder QR for least squares.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Maximum QL iterations spent on any single eigenvalue.
pub const QL_MAX_ITER: usize = 30;

#[derive(Debug, Clone, PartialEq)]
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

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "dimension mismatch in mul_vec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|x| x * x).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &x| m.max(libm::fabs(x)))
    }

    pub fn trace(&self) -> f64 {
        crate::stats::sum(self.diagonal())
    }

    /// Largest `|a_ij - a_ji|`. Zero for non-square input is not meaningful;
    /// returns infinity instead.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max(libm::fabs(self[(i, j)] - self[(j, i)]));
            }
        }
        worst
    }

    pub fn map(&self, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| f(i, j, self[(i, j)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues in ascending order with matching unit eigenvectors stored as
/// the columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Option<Matrix>,
}

impl SymmetricEigen {
    /// Full decomposition `A = Q diag(values) Q^T`.
    pub fn new(a: &Matrix) -> Result<Self> {
        Self::decompose(a, true)
    }

    /// Eigenvalues only; skips eigenvector accumulation.
    pub fn values_only(a: &Matrix) -> Result<Vec<f64>> {
        Self::decompose(a, false).map(|e| e.values)
    }

    fn decompose(a: &Matrix, want_vectors: bool) -> Result<Self> {
        let scale = a.max_abs().max(1.0);
        let asym = a.asymmetry();
        if !(asym <= 1e-12 * scale) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let n = a.rows();
        if n == 0 {
            return Ok(Self {
                values: Vec::new(),
                vectors: want_vectors.then(|| Matrix::zeros(0, 0)),
            });
        }
        // Work on the lower triangle, mirrored, so tiny asymmetries cannot leak in.
        let mut v = Matrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)] });
        let mut d = vec![0.0; n];
        let mut e = vec![0.0; n];
        tridiagonalize(&mut v, &mut d, &mut e, want_vectors);
        ql_implicit(&mut v, &mut d, &mut e, want_vectors)?;

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| d[i].total_cmp(&d[j]).then(i.cmp(&j)));
        let values = order.iter().map(|&k| d[k]).collect();
        let vectors = want_vectors.then(|| Matrix::from_fn(n, n, |i, j| v[(i, order[j])]));
        Ok(Self { values, vectors })
    }

    /// Max over pairs of `||A v - lambda v||`.
    pub fn max_residual(&self, a: &Matrix) -> Option<f64> {
        let q = self.vectors.as_ref()?;
        let n = a.rows();
        let mut worst = 0.0f64;
        for k in 0..n {
            let col = q.column(k);
            let av = a.mul_vec(&col);
            let r: f64 = av
                .iter()
                .zip(&col)
                .map(|(x, y)| {
                    let d = x - self.values[k] * y;
                    d * d
                })
                .sum();
            worst = worst.max(libm::sqrt(r));
        }
        Some(worst)
    }

    /// `Q diag(values) Q^T`.
    pub fn reconstruct(&self) -> Option<Matrix> {
        let q = self.vectors.as_ref()?;
        let n = q.rows();
        let mut out = Matrix::zeros(n, n);
        for k in 0..n {
            let lambda = self.values[k];
            for i in 0..n {
                let qi = q[(i, k)] * lambda;
                for j in 0..n {
                    out[(i, j)] += qi * q[(j, k)];
                }
            }
        }
        Some(out)
    }
}

/// Householder reduction of a symmetric matrix (stored in `v`) to tridiagonal
/// form. On return `d` holds the diagonal and `e[1..]` the sub-diagonal; when
/// `want_vectors` is set `v` holds the accumulated orthogonal transform.
fn tridiagonalize(v: &mut Matrix, d: &mut [f64], e: &mut [f64], want_vectors: bool) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += libm::fabs(*dk);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = libm::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    if !want_vectors {
        for j in 0..n {
            d[j] = v[(j, j)];
        }
        e[0] = 0.0;
        return;
    }

    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iterations on the tridiagonal `(d, e)`.
fn ql_implicit(v: &mut Matrix, d: &mut [f64], e: &mut [f64], want_vectors: bool) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1 = 0.0f64;
    for l in 0..n {
        tst1 = tst1.max(libm::fabs(d[l]) + libm::fabs(e[l]));
        let mut m = l;
        while m < n - 1 {
            if libm::fabs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: QL_MAX_ITER,
                        residual: libm::fabs(e[l]),
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = libm::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = libm::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[(k, i + 1)];
                            v[(k, i + 1)] = s * v[(k, i)] + c * h;
                            v[(k, i)] = c * v[(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if !(libm::fabs(e[l]) > eps * tst1) {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Householder QR of a tall matrix, kept in compact form.
#[derive(Debug, Clone)]
pub struct Qr {
    /// Householder vectors below the diagonal, `R` on and above it.
    qr: Matrix,
    r_diag: Vec<f64>,
}

impl Qr {
    /// Factors `x` (rows >= cols). A column whose new direction is below
    /// `rel_tol` of its norm is reported as collinear with the earlier ones.
    pub fn new(x: &Matrix, rel_tol: f64) -> Result<Self> {
        let (m, n) = (x.rows(), x.cols());
        if m < n {
            return Err(Error::InsufficientData {
                what: "rows in least-squares design",
                needed: n,
                got: m,
            });
        }
        let col_norms: Vec<f64> = (0..n)
            .map(|j| libm::sqrt((0..m).map(|i| x[(i, j)] * x[(i, j)]).sum()))
            .collect();
        let mut qr = x.clone();
        let mut r_diag = vec![0.0; n];
        for k in 0..n {
            let mut nrm = 0.0;
            for i in k..m {
                nrm = libm::hypot(nrm, qr[(i, k)]);
            }
            if !(nrm > rel_tol * col_norms[k]) || col_norms[k] == 0.0 {
                return Err(Error::RankDeficient {
                    column: k,
                    with: (0..k).collect(),
                });
            }
            if qr[(k, k)] < 0.0 {
                nrm = -nrm;
            }
            for i in k..m {
                qr[(i, k)] /= nrm;
            }
            qr[(k, k)] += 1.0;
            for j in (k + 1)..n {
                let mut s = 0.0;
                for i in k..m {
                    s += qr[(i, k)] * qr[(i, j)];
                }
                s = -s / qr[(k, k)];
                for i in k..m {
                    qr[(i, j)] += s * qr[(i, k)];
                }
            }
            r_diag[k] = -nrm;
        }
        Ok(Self { qr, r_diag })
    }

    pub fn ncols(&self) -> usize {
        self.qr.cols()
    }

    /// Least-squares solution of `x b = y`.
    pub fn solve(&self, y: &[f64]) -> Vec<f64> {
        let (m, n) = (self.qr.rows(), self.qr.cols());
        assert_eq!(y.len(), m, "right-hand side has wrong length");
        let mut b = y.to_vec();
        for k in 0..n {
            let mut s = 0.0;
            for (i, bi) in b.iter().enumerate().take(m).skip(k) {
                s += self.qr[(i, k)] * bi;
            }
            s = -s / self.qr[(k, k)];
            for (i, bi) in b.iter_mut().enumerate().take(m).skip(k) {
                *bi += s * self.qr[(i, k)];
            }
        }
        for k in (0..n).rev() {
            b[k] /= self.r_diag[k];
            for i in 0..k {
                b[i] -= b[k] * self.qr[(i, k)];
            }
        }
        b.truncate(n);
        b
    }

    /// Upper-triangular factor `R` (n x n).
    pub fn r(&self) -> Matrix {
        let n = self.qr.cols();
        Matrix::from_fn(n, n, |i, j| {
            if i < j {
                self.qr[(i, j)]
            } else if i == j {
                self.r_diag[i]
            } else {
                0.0
            }
        })
    }

    /// `(X^T X)^{-1} = R^{-1} R^{-T}`.
    pub fn xtx_inverse(&self) -> Matrix {
        let n = self.qr.cols();
        let r = self.r();
        // Invert R by back substitution, one column at a time.
        let mut rinv = Matrix::zeros(n, n);
        for j in 0..n {
            rinv[(j, j)] = 1.0 / r[(j, j)];
            for i in (0..j).rev() {
                let mut s = 0.0;
                for k in (i + 1)..=j {
                    s += r[(i, k)] * rinv[(k, j)];
                }
                rinv[(i, j)] = -s / r[(i, i)];
            }
        }
        Matrix::from_fn(n, n, |i, j| {
            (i.max(j)..n).map(|k| rinv[(i, k)] * rinv[(j, k)]).sum()
        })
    }
}
