//! Minimal dense real linear algebra.
//!
//! Just enough for the estimators and the simulator: row-major matrices,
//! vectors, products, an SPD solve, and 3x3 symmetric eigenvalues. Dimension
//! mismatches are contract violations and panic; numerical failures
//! (non-positive-definite pivots, asymmetric eigenvalue input) are [`LinalgError`]s.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use libm::{acos, cos, fabs, sqrt};

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// A pivot in the symmetric factorization was not strictly positive.
    NotPositiveDefinite,
    /// Input claimed symmetric deviates beyond tolerance.
    NotSymmetric,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotPositiveDefinite => write!(f, "matrix is not positive definite"),
            LinalgError::NotSymmetric => write!(f, "matrix is not symmetric within tolerance"),
        }
    }
}

impl core::error::Error for LinalgError {}

/// Dense real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(n: usize) -> Self {
        Vector { data: vec![0.0; n] }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Vector { data }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Vector { data: s.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.norm_sq())
    }

    pub fn scale(&self, c: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// `self += c * other`, in place.
    pub fn axpy(&mut self, c: f64, other: &Vector) {
        assert_eq!(self.len(), other.len(), "vector length mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Inner product. Lengths must match.
pub fn dot(x: &Vector, y: &Vector) -> f64 {
    assert_eq!(x.len(), y.len(), "dot: length mismatch");
    x.data.iter().zip(&y.data).map(|(a, b)| a * b).sum()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let nrows = rows.len();
        let ncols = if nrows > 0 { rows[0].len() } else { 0 };
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in rows {
            assert_eq!(r.len(), ncols, "ragged rows");
            data.extend_from_slice(r);
        }
        Matrix {
            rows: nrows,
            cols: ncols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Borrowed view of row `i`; O(1).
    pub fn row(&self, i: usize) -> &[f64] {
        assert!(i < self.rows, "row index out of range");
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Row `i` copied into a new Vector; O(cols).
    pub fn row_vector(&self, i: usize) -> Vector {
        Vector::from_slice(self.row(i))
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

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        sqrt(self.frobenius_norm_sq())
    }

    pub fn scale(&self, c: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| c * x).collect(),
        }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn mat_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "mat_mul: inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += aik * b;
                }
            }
        }
        out
    }

    /// `(M + M^T) / 2`, for square matrices.
    pub fn symmetrized(&self) -> Matrix {
        assert_eq!(self.rows, self.cols, "symmetrized: square only");
        Matrix::from_fn(self.rows, self.cols, |i, j| {
            0.5 * (self[(i, j)] + self[(j, i)])
        })
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Matrix-vector product `A x`.
pub fn mat_vec(a: &Matrix, x: &Vector) -> Vector {
    assert_eq!(a.cols(), x.len(), "mat_vec: dimension mismatch");
    let mut out = Vector::zeros(a.rows());
    for i in 0..a.rows() {
        out[i] = a
            .row(i)
            .iter()
            .zip(x.as_slice())
            .map(|(aij, xj)| aij * xj)
            .sum();
    }
    out
}

/// Squared Frobenius norm, free function form.
pub fn frobenius_norm_sq(a: &Matrix) -> f64 {
    a.frobenius_norm_sq()
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(m: &Matrix) -> Result<Matrix, LinalgError> {
    assert_eq!(m.rows(), m.cols(), "cholesky: square only");
    let n = m.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(LinalgError::NotPositiveDefinite);
                }
                l[(i, i)] = sqrt(s);
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Ok(l)
}

/// Solve `M X = B` for symmetric positive definite `M` via Cholesky.
///
/// No explicit inverse is formed; the factorization is reused across the
/// columns of `B`.
pub fn solve_spd(m: &Matrix, b: &Matrix) -> Result<Matrix, LinalgError> {
    assert_eq!(m.rows(), b.rows(), "solve_spd: dimension mismatch");
    let l = cholesky(m)?;
    let n = m.rows();
    let mut x = b.clone();
    // L y = b (forward), then L^T x = y (backward), per column.
    for c in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Solve `M x = b` for SPD `M` and a single right-hand side.
pub fn solve_spd_vec(m: &Matrix, b: &Vector) -> Result<Vector, LinalgError> {
    let bm = Matrix::from_fn(b.len(), 1, |i, _| b[i]);
    let x = solve_spd(m, &bm)?;
    Ok(Vector::from_vec((0..b.len()).map(|i| x[(i, 0)]).collect()))
}

const SYM_TOL: f64 = 1e-9;

/// Eigenvalues of a 3x3 symmetric matrix, ascending.
///
/// Closed-form (Cardano) solve of the characteristic cubic, falling back to
/// cyclic Jacobi sweeps when the roots are nearly repeated and the trigonometric
/// form loses accuracy.
pub fn sym_eig3(m: &Matrix) -> Result<Vector, LinalgError> {
    assert_eq!((m.rows(), m.cols()), (3, 3), "sym_eig3: 3x3 only");
    let scale = m.frobenius_norm();
    let asym = fabs(m[(0, 1)] - m[(1, 0)])
        .max(fabs(m[(0, 2)] - m[(2, 0)]))
        .max(fabs(m[(1, 2)] - m[(2, 1)]));
    if asym > SYM_TOL * (1.0 + scale) {
        return Err(LinalgError::NotSymmetric);
    }

    let a11 = m[(0, 0)];
    let a22 = m[(1, 1)];
    let a33 = m[(2, 2)];
    let a12 = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    let a13 = 0.5 * (m[(0, 2)] + m[(2, 0)]);
    let a23 = 0.5 * (m[(1, 2)] + m[(2, 1)]);

    let p1 = a12 * a12 + a13 * a13 + a23 * a23;
    if p1 == 0.0 {
        let mut d = [a11, a22, a33];
        d.sort_by(|a, b| a.partial_cmp(b).unwrap());
        return Ok(Vector::from_slice(&d));
    }

    let q = (a11 + a22 + a33) / 3.0;
    let p2 = (a11 - q) * (a11 - q) + (a22 - q) * (a22 - q) + (a33 - q) * (a33 - q) + 2.0 * p1;
    let p = sqrt(p2 / 6.0);
    // B = (A - q I) / p
    let b11 = (a11 - q) / p;
    let b22 = (a22 - q) / p;
    let b33 = (a33 - q) / p;
    let b12 = a12 / p;
    let b13 = a13 / p;
    let b23 = a23 / p;
    let det_b = b11 * (b22 * b33 - b23 * b23) - b12 * (b12 * b33 - b23 * b13)
        + b13 * (b12 * b23 - b22 * b13);
    let r = (det_b / 2.0).clamp(-1.0, 1.0);

    // Near-repeated roots: the acos branch is ill-conditioned there.
    if 1.0 - fabs(r) < 1e-6 {
        return Ok(jacobi_eig3([a11, a22, a33, a12, a13, a23]));
    }

    let phi = acos(r) / 3.0;
    let two_pi_3 = 2.0 * core::f64::consts::PI / 3.0;
    let e1 = q + 2.0 * p * cos(phi);
    let e3 = q + 2.0 * p * cos(phi + two_pi_3);
    let e2 = 3.0 * q - e1 - e3;
    Ok(Vector::from_slice(&[e3, e2, e1]))
}

/// Cyclic Jacobi on a 3x3 symmetric matrix packed as
/// `[a11, a22, a33, a12, a13, a23]`.
fn jacobi_eig3(packed: [f64; 6]) -> Vector {
    let mut a = [
        [packed[0], packed[3], packed[4]],
        [packed[3], packed[1], packed[5]],
        [packed[4], packed[5], packed[2]],
    ];
    let scale: f64 = a.iter().flatten().map(|x| x * x).sum::<f64>();
    let tol = 1e-30 * (1.0 + scale);
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= tol {
            break;
        }
        for (p, q) in [(0usize, 1usize), (0, 2), (1, 2)] {
            let apq = a[p][q];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * apq);
            let t = if theta >= 0.0 {
                1.0 / (theta + sqrt(1.0 + theta * theta))
            } else {
                1.0 / (theta - sqrt(1.0 + theta * theta))
            };
            let c = 1.0 / sqrt(1.0 + t * t);
            let s = t * c;
            // Apply the rotation on both sides.
            for k in 0..3 {
                let akp = a[k][p];
                let akq = a[k][q];
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let apk = a[p][k];
                let aqk = a[q][k];
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
        }
    }
    let mut d = [a[0][0], a[1][1], a[2][2]];
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Vector::from_slice(&d)
}
