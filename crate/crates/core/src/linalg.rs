//! Small dense complex matrices and a Hermitian Cholesky solver.
//!
//! Sizes here are tiny (N up to a few hundred, K a handful), so a plain
//! row-major layout and textbook loops are adequate.

use std::ops::{Index, IndexMut};

use num_complex::Complex;

use crate::{Error, Real, Result};

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given equal-length vectors.
    pub fn from_columns(columns: &[Vec<Complex<T>>]) -> Self {
        let rows = columns.first().map_or(0, Vec::len);
        assert!(columns.iter().all(|c| c.len() == rows), "ragged columns");
        Self::from_fn(rows, columns.len(), |i, j| columns[j][i])
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, j: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self^H * other`.
    pub fn conj_transpose_mul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "inner dimension mismatch");
        Self::from_fn(self.cols, other.cols, |i, j| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for k in 0..self.rows {
                acc += self[(k, i)].conj() * other[(k, j)];
            }
            acc
        })
    }

    pub fn mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.cols, x.len(), "dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let row = &self.data[i * self.cols..(i + 1) * self.cols];
                row.iter()
                    .zip(x)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `self^H * x`.
    pub fn conj_transpose_mul_vec(&self, x: &[Complex<T>]) -> Vec<Complex<T>> {
        assert_eq!(self.rows, x.len(), "dimension mismatch");
        (0..self.cols)
            .map(|j| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for i in 0..self.rows {
                    acc += self[(i, j)].conj() * x[i];
                }
                acc
            })
            .collect()
    }

    /// Max absolute column sum.
    pub fn one_norm(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].norm()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn is_hermitian(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| {
                (0..=i).all(|j| (self[(i, j)] - self[(j, i)].conj()).norm() <= tol)
            })
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = Complex<T>;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex<T> {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[i * self.cols + j]
    }
}

/// Cholesky factor `A = L L^H` of a Hermitian positive-definite matrix.
///
/// Only the lower triangle of the input is read.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    lower: Vec<Complex<T>>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(a: &CMatrix<T>) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Shape(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut l = vec![Complex::new(T::zero(), T::zero()); n * n];
        for j in 0..n {
            let mut diag = a[(j, j)].re;
            for k in 0..j {
                diag -= l[j * n + k].norm_sqr();
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = Complex::new(ljj, T::zero());
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { n, lower: l })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.n;
        assert_eq!(b.len(), n, "rhs length mismatch");
        let l = &self.lower;
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= l[i * n + k] * b[k];
            }
            b[i] = s / l[i * n + i].re;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= l[k * n + i].conj() * b[k];
            }
            b[i] = s / l[i * n + i].re;
        }
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &CMatrix<T>) -> CMatrix<T> {
        let cols: Vec<_> = (0..b.cols()).map(|j| self.solve(&b.column(j))).collect();
        CMatrix::from_columns(&cols)
    }

    /// `||A^-1||_1`, from one solve per unit vector.
    pub fn inverse_one_norm(&self) -> T {
        let zero = Complex::new(T::zero(), T::zero());
        (0..self.n)
            .map(|j| {
                let mut e = vec![zero; self.n];
                e[j] = Complex::new(T::one(), T::zero());
                self.solve_in_place(&mut e);
                e.iter().map(|z| z.norm()).sum::<T>()
            })
            .fold(T::zero(), T::max)
    }
}

/// 1-norm condition number `||A||_1 ||A^-1||_1` of a factored HPD matrix.
pub fn condition_one_norm<T: Real>(a: &CMatrix<T>, chol: &Cholesky<T>) -> T {
    a.one_norm() * chol.inverse_one_norm()
}
