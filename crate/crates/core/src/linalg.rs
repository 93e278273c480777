//! Small dense linear algebra over real or complex entries.
//!
//! Everything here is sized for desk-scale chains (a few hundred sites at most):
//! row-major storage, partial-pivoting LU, and a Padé scaling-and-squaring
//! matrix exponential.

use std::ops::{Index, IndexMut};

use num_traits::{Float, ToPrimitive, Zero};
use thiserror::Error;

use crate::scalar::{Entry, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is singular to working precision (pivot {pivot:e} at column {column})")]
    Singular { column: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Entry> DenseMatrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![S::zero_entry(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one_entry();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Dimension {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<S> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn map<R: Entry>(&self, f: impl Fn(S) -> R) -> DenseMatrix<R> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(v.len(), self.cols, "mul_vec dimension mismatch");
        (0..self.rows)
            .map(|r| {
                let mut acc = S::zero_entry();
                for (a, &b) in self.row(r).iter().zip(v) {
                    acc += *a * b;
                }
                acc
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == S::zero_entry() {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: S) -> Self {
        self.map(|x| x * s)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(S, S) -> S) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> S::Real {
        (0..self.cols)
            .map(|c| {
                (0..self.rows)
                    .map(|r| self[(r, c)].modulus())
                    .fold(<S::Real as Zero>::zero(), |a, b| a + b)
            })
            .fold(<S::Real as Zero>::zero(), Float::max)
    }

    pub fn max_abs(&self) -> S::Real {
        self.data
            .iter()
            .map(|x| x.modulus())
            .fold(<S::Real as Zero>::zero(), Float::max)
    }

    pub fn lu(&self) -> Result<Lu<S>, LinalgError> {
        Lu::factor(self)
    }

    pub fn solve(&self, b: &[S]) -> Result<Vec<S>, LinalgError> {
        Ok(self.lu()?.solve(b))
    }

    pub fn inverse(&self) -> Result<Self, LinalgError> {
        let lu = self.lu()?;
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        let mut e = vec![S::zero_entry(); n];
        for c in 0..n {
            e.iter_mut().for_each(|x| *x = S::zero_entry());
            e[c] = S::one_entry();
            let col = lu.solve(&e);
            for r in 0..n {
                inv[(r, c)] = col[r];
            }
        }
        Ok(inv)
    }

    /// Matrix exponential by scaling and squaring with a diagonal Padé(6) approximant.
    pub fn expm(&self) -> Result<Self, LinalgError> {
        assert_eq!(self.rows, self.cols, "expm needs a square matrix");
        let n = self.rows;
        let half = S::Real::lit(0.5);
        let norm = self.norm_1();
        let mut squarings = 0i32;
        if norm > half {
            squarings = (norm / half).log2().ceil().to_i32().unwrap_or(0).max(0);
        }
        let a = self.scale(S::from_real(S::Real::lit(2.0).powi(-squarings)));

        // Padé(6,6) coefficients c_k = (12-k)! 6! / (12! k! (6-k)!).
        const Q: usize = 6;
        let mut coeff = [1.0f64; Q + 1];
        for k in 1..=Q {
            coeff[k] = coeff[k - 1] * ((Q - k + 1) as f64) / ((k * (2 * Q - k + 1)) as f64);
        }
        let ident = Self::identity(n);
        let mut numer = ident.clone();
        let mut denom = ident.clone();
        let mut power = ident;
        for (k, &c) in coeff.iter().enumerate().skip(1) {
            power = power.matmul(&a);
            let term = power.scale(S::from_real(S::Real::lit(c)));
            numer = numer.add(&term);
            if k % 2 == 0 {
                denom = denom.add(&term);
            } else {
                denom = denom.sub(&term);
            }
        }
        let lu = denom.lu()?;
        let mut result = Self::zeros(n, n);
        for c in 0..n {
            let col = lu.solve(&numer.column(c));
            for r in 0..n {
                result[(r, c)] = col[r];
            }
        }
        for _ in 0..squarings {
            result = result.matmul(&result);
        }
        Ok(result)
    }
}

impl<S> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for DenseMatrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

/// LU factorisation with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<S> {
    factors: DenseMatrix<S>,
    perm: Vec<usize>,
}

impl<S: Entry> Lu<S> {
    fn factor(a: &DenseMatrix<S>) -> Result<Self, LinalgError> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut m = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        let threshold = scale * S::Real::eps() * S::Real::from_usize_lossy(n.max(1));
        for k in 0..n {
            let (p, pivot) = (k..n)
                .map(|r| (r, m[(r, k)].modulus()))
                .fold((k, S::Real::lit(-1.0)), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
            if pivot <= threshold || pivot == <S::Real as Zero>::zero() {
                return Err(LinalgError::Singular {
                    column: k,
                    pivot: pivot.as_f64(),
                });
            }
            if p != k {
                perm.swap(p, k);
                for c in 0..n {
                    let tmp = m[(k, c)];
                    m[(k, c)] = m[(p, c)];
                    m[(p, c)] = tmp;
                }
            }
            let d = m[(k, k)];
            for r in k + 1..n {
                let f = m[(r, k)] / d;
                m[(r, k)] = f;
                if f == S::zero_entry() {
                    continue;
                }
                for c in k + 1..n {
                    let v = m[(k, c)];
                    m[(r, c)] -= f * v;
                }
            }
        }
        Ok(Self { factors: m, perm })
    }

    pub fn solve(&self, b: &[S]) -> Vec<S> {
        let n = self.perm.len();
        assert_eq!(b.len(), n, "LU solve dimension mismatch");
        let mut x: Vec<S> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let mut acc = x[r];
            for c in 0..r {
                acc -= self.factors[(r, c)] * x[c];
            }
            x[r] = acc;
        }
        for r in (0..n).rev() {
            let mut acc = x[r];
            for c in r + 1..n {
                acc -= self.factors[(r, c)] * x[c];
            }
            x[r] = acc / self.factors[(r, r)];
        }
        x
    }
}
