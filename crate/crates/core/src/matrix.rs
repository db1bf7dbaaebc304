//! Dense square matrices over an enumerated state space.

use std::fmt::Display;
use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Copy + Zero> DenseMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }
}

impl<T: Copy> DenseMatrix<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> DenseMatrix<U> {
        DenseMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut data = self.data.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                data[j * self.dim + i] = self.get(i, j);
            }
        }
        Self { dim: self.dim, data }
    }
}

impl<T: Copy + Zero + Add<Output = T> + Mul<Output = T>> DenseMatrix<T> {
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let idx = i * n + j;
                    out.data[idx] = out.data[idx] + a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn apply(&self, v: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
            .collect()
    }

    /// `vᵀ M`.
    pub fn apply_left(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o = *o + vi * a;
            }
        }
        out
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.dim)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, &a| acc + a))
            .collect()
    }
}

impl DenseMatrix<f64> {
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn from_int(m: &DenseMatrix<i64>) -> Self {
        m.map(|v| v as f64)
    }
}

impl<T: Copy + Display> DenseMatrix<T> {
    /// Space-separated rows.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for i in 0..self.dim {
            let row: Vec<String> = self.row(i).iter().map(|v| v.to_string()).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }
}

/// Perron eigenpair of a nonnegative matrix by power iteration on `M + I`
/// (the shift removes periodicity). The eigenvector is normalized to sum 1.
pub fn power_iteration(m: &DenseMatrix<f64>, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let n = m.dim();
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let mut w = m.apply(&v);
        for (wi, vi) in w.iter_mut().zip(&v) {
            *wi += vi;
        }
        let s: f64 = w.iter().sum();
        if s <= 0.0 {
            return Err(Error::Convergence("power iteration collapsed to zero".into()));
        }
        w.iter_mut().for_each(|x| *x /= s);
        let delta = w.iter().zip(&v).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        v = w;
        lambda = s - 1.0;
        if delta < tol {
            return Ok((lambda, v));
        }
    }
    Err(Error::Convergence(format!(
        "power iteration did not settle in {max_iter} steps (λ≈{lambda})"
    )))
}

/// Determinant of a small complex matrix given by rows, by Gaussian
/// elimination with partial pivoting.
pub fn complex_det(mut rows: Vec<Vec<Complex64>>) -> Complex64 {
    let n = rows.len();
    let mut det = Complex64::new(1.0, 0.0);
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| rows[i][c].norm().total_cmp(&rows[j][c].norm()))
            .expect("non-empty range");
        if rows[p][c].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if p != c {
            rows.swap(p, c);
            det = -det;
        }
        let pivot = rows[c][c];
        det *= pivot;
        for r in c + 1..n {
            let factor = rows[r][c] / pivot;
            for k in c..n {
                let v = rows[c][k];
                rows[r][k] -= factor * v;
            }
        }
    }
    det
}
