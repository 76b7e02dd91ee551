//! Small dense linear algebra: a column-major matrix, Cholesky factorization and
//! Gaussian draws in canonical (precision) form.

use std::ops::{Index, IndexMut};

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from its columns; every column must have the same length.
    pub fn from_columns(rows: usize, columns: Vec<Vec<T>>) -> Self {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for col in columns {
            assert_eq!(col.len(), rows, "ragged column");
            data.extend(col);
        }
        Matrix { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| if r == c { T::one() } else { T::zero() })
    }

    pub fn fill(rows: usize, cols: usize, value: T) -> Self {
        Matrix { rows, cols, data: vec![value; rows * cols] }
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
    pub fn col(&self, c: usize) -> &[T] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.rows..(c + 1) * self.rows]
    }

    pub fn row(&self, r: usize) -> Vec<T> {
        (0..self.cols).map(|c| self[(r, c)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn matmul(&self, other: &Matrix<T>) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        for c in 0..other.cols {
            for k in 0..self.cols {
                let w = other[(k, c)];
                if w == T::zero() {
                    continue;
                }
                let src = self.col(k);
                for (o, &s) in out.col_mut(c).iter_mut().zip(src) {
                    *o = *o + s * w;
                }
            }
        }
        out
    }

    /// `selfᵀ self`.
    pub fn gram(&self) -> Self {
        let mut out = Matrix::zeros(self.cols, self.cols);
        for a in 0..self.cols {
            for b in a..self.cols {
                let v = dot(self.col(a), self.col(b));
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| (0..r).all(|c| (self[(r, c)] - self[(c, r)]).abs() <= tol))
    }

    /// Applies a symmetric permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Self {
        assert_eq!(self.rows, self.cols);
        Self::from_fn(self.rows, self.cols, |r, c| self[(perm[r], perm[c])])
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[c * self.rows + r]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[c * self.rows + r]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lower Cholesky factor `L` with `a = L Lᵀ`.
pub fn cholesky<T: Real>(a: &Matrix<T>) -> Result<Matrix<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::InvalidInput("cholesky of a non-square matrix".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > T::zero()) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place<T: Real>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `L`.
pub fn solve_lower_transpose_in_place<T: Real>(l: &Matrix<T>, b: &mut [T]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// `log det(a)` from its Cholesky factor.
pub fn log_det_from_cholesky<T: Real>(l: &Matrix<T>) -> T {
    (0..l.rows()).map(|i| l[(i, i)].ln()).sum::<T>() * T::lit(2.0)
}

/// Draws `x ~ N(Q⁻¹ m, Q⁻¹)` for a dense symmetric positive definite precision `Q`.
pub fn sample_canonical<T: Real, R: Rng + ?Sized>(
    precision: &Matrix<T>,
    linear: &[T],
    rng: &mut R,
) -> Result<Vec<T>> {
    let l = cholesky(precision)?;
    let mut x = linear.to_vec();
    solve_lower_in_place(&l, &mut x);
    for xi in x.iter_mut() {
        *xi = *xi + T::std_normal(rng);
    }
    solve_lower_transpose_in_place(&l, &mut x);
    Ok(x)
}

/// Draws `x ~ N(Q⁻¹ m, Q⁻¹)` for `Q = diag(d) − b·v vᵀ` in O(dim).
///
/// Writing `u = D^{-1/2} v`, the precision factors as `Q = L Lᵀ` with
/// `L = D^{1/2}(I − e u uᵀ)` and `e = (1 − √(1 − b‖u‖²)) / ‖u‖²`, so both the
/// mean and the noise term reduce to rank-one corrections.
pub fn sample_diag_minus_rank_one<T: Real, R: Rng + ?Sized>(
    d: &[T],
    b: T,
    v: &[T],
    linear: &[T],
    rng: &mut R,
) -> Result<Vec<T>> {
    let dim = d.len();
    debug_assert!(v.len() == dim && linear.len() == dim);
    if d.iter().any(|&di| !(di > T::zero()) || !di.is_finite()) {
        return Err(Error::NotPositiveDefinite);
    }
    let inv_sqrt_d: Vec<T> = d.iter().map(|&di| T::one() / di.sqrt()).collect();
    let u: Vec<T> = v.iter().zip(&inv_sqrt_d).map(|(&vi, &s)| vi * s).collect();
    let uu = dot(&u, &u);
    let slack = T::one() - b * uu;
    if !(slack > T::zero()) || !slack.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    let m_tilde: Vec<T> = linear.iter().zip(&inv_sqrt_d).map(|(&m, &s)| m * s).collect();
    let mean_coef = b * dot(&u, &m_tilde) / slack;
    let z: Vec<T> = (0..dim).map(|_| T::std_normal(rng)).collect();
    let e_prime = if uu > T::zero() {
        let e = (T::one() - slack.sqrt()) / uu;
        e / (T::one() - e * uu)
    } else {
        T::zero()
    };
    let noise_coef = e_prime * dot(&u, &z);
    Ok((0..dim)
        .map(|i| inv_sqrt_d[i] * (m_tilde[i] + u[i] * mean_coef + z[i] + u[i] * noise_coef))
        .collect())
}
