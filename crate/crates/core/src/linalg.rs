//! Dense row-major matrices and an LU solver generic over [`Scalar`].
//!
//! Eigenvalue work is delegated to `nalgebra` in `f64`; everything that feeds
//! value computations stays in the caller's scalar type.

use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim("Matrix::from_row_major", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    /// Builds from nested rows; all rows must share one length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim("Matrix::from_rows", cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
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

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len(), "mul_vec dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ A`, returned as a vector.
    pub fn vec_mul(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.rows, x.len(), "vec_mul dimension");
        let mut out = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            if xi == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += xi * a;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn scale(&self, c: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Induced ∞-norm (max absolute row sum).
    pub fn norm_inf(&self) -> T {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    /// Induced 1-norm (max absolute column sum).
    pub fn norm_1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].to_f64_lossy())
    }

    /// Moduli of all eigenvalues, sorted descending.
    pub fn eigen_moduli(&self) -> Vec<f64> {
        assert!(self.is_square(), "eigenvalues need a square matrix");
        let mut m: Vec<f64> = self.to_f64().complex_eigenvalues().iter().map(|z| z.norm()).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        m
    }

    /// Real parts of all eigenvalues, sorted descending.
    pub fn eigen_real_parts(&self) -> Vec<f64> {
        let mut m: Vec<f64> = self.to_f64().complex_eigenvalues().iter().map(|z| z.re).collect();
        m.sort_by(|a, b| b.total_cmp(a));
        m
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_l2<T: Scalar>(x: &[T]) -> T {
    x.iter().map(|&v| v * v).sum::<T>().sqrt()
}

pub fn norm_sup<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

pub fn sub_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    assert_eq!(a.len(), b.len(), "sub_vec dimension");
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn add_vec<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    assert_eq!(a.len(), b.len(), "add_vec dimension");
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    norm_1: T,
}

impl<T: Scalar> Lu<T> {
    pub fn factor(a: &Matrix<T>) -> Result<Self> {
        check_dim("Lu::factor", a.rows(), a.cols())?;
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (p, pmax) =
                (k..n)
                    .map(|i| (i, lu[(i, k)].abs()))
                    .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() || !pmax.is_finite() {
                return Err(Error::IllConditioned {
                    context: "LU pivot",
                    condition: f64::INFINITY,
                });
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == T::zero() {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            norm_1: a.norm_1(),
        })
    }

    /// Factors and rejects systems whose 1-norm condition estimate exceeds
    /// [`Scalar::COND_LIMIT`].
    pub fn factor_checked(a: &Matrix<T>, context: &'static str) -> Result<Self> {
        let lu = Self::factor(a).map_err(|_| Error::IllConditioned {
            context,
            condition: f64::INFINITY,
        })?;
        let cond = lu.condition_estimate();
        if !(cond <= T::COND_LIMIT) {
            return Err(Error::IllConditioned {
                context,
                condition: cond,
            });
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Lu::solve dimension");
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    #[allow(clippy::needless_range_loop)]
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n, "Lu::solve_transpose dimension");
        // Uᵀ y = b, then Lᵀ z = y, then x = Pᵀ z.
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu[(k, i)] * y[k];
            }
            y[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)] * y[k];
            }
            y[i] = s;
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }

    pub fn inverse(&self) -> Matrix<T> {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e[j] = T::one();
            let col = self.solve(&e);
            e[j] = T::zero();
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv
    }

    /// Hager's estimate of `‖A‖₁ ‖A⁻¹‖₁`.
    pub fn condition_estimate(&self) -> f64 {
        let n = self.dim();
        if n == 0 {
            return 1.0;
        }
        let mut x = vec![T::one() / T::from_usize_lossy(n); n];
        let mut est = T::zero();
        for _ in 0..5 {
            let y = self.solve(&x);
            est = y.iter().map(|v| v.abs()).sum();
            let xi: Vec<T> = y
                .iter()
                .map(|&v| if v >= T::zero() { T::one() } else { -T::one() })
                .collect();
            let z = self.solve_transpose(&xi);
            let (j, zmax) = z
                .iter()
                .enumerate()
                .map(|(j, v)| (j, v.abs()))
                .fold((0, T::zero()), |b, c| if c.1 > b.1 { c } else { b });
            if zmax <= dot(&z, &x) {
                break;
            }
            x = vec![T::zero(); n];
            x[j] = T::one();
        }
        (est * self.norm_1).to_f64_lossy()
    }
}
