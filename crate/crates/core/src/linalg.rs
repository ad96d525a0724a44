//! Dense row-major `f64` vectors and matrices.
//!
//! The free functions (`matvec`, `hadamard`, ...) are pure and validate their
//! operands. The `*_into` / `*_assign` methods are the unchecked-allocation
//! variants used on the training hot path; they still check dimensions.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector must have positive length"));
        }
        Ok(Self { data })
    }

    /// # Panics
    /// If `len == 0`.
    pub fn zeros(len: usize) -> Self {
        Self::filled(len, 0.0)
    }

    /// # Panics
    /// If `len == 0`.
    pub fn filled(len: usize, value: f64) -> Self {
        assert!(len > 0, "vector must have positive length");
        Self {
            data: vec![value; len],
        }
    }

    pub(crate) fn from_raw(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
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

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Vector {
        Vector::from_raw(self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_len("dot", self.len(), other.len())?;
        Ok(dot(&self.data, &other.data))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// `self += alpha * x`
    pub fn axpy_assign(&mut self, alpha: f64, x: &Vector) -> Result<()> {
        check_len("axpy_assign", self.len(), x.len())?;
        axpy_slice(alpha, &x.data, &mut self.data);
        Ok(())
    }

    pub fn scale_assign(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    /// Index of the largest entry; ties resolve to the lowest index and NaN
    /// entries never win.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.data.iter().enumerate().skip(1) {
            if v > self.data[best] {
                best = i;
            }
        }
        best
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

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("matrix dimensions must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::dim("Matrix::new", rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::dim("Matrix::from_rows", cols, bad.len()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
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

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
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

    /// Matrix product `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_len("matmul", self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                axpy_slice(a, other.row(k), dst);
            }
        }
        Ok(out)
    }

    /// `out += self · v`
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec", self.cols, v.len())?;
        check_len("matvec", self.rows, out.len())?;
        for (o, row) in out.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *o += dot(row, v);
        }
        Ok(())
    }

    /// `out += selfᵀ · v`
    pub fn matvec_transposed_acc(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        check_len("matvec_transposed", self.rows, v.len())?;
        check_len("matvec_transposed", self.cols, out.len())?;
        for (&vi, row) in v.iter().zip(self.data.chunks_exact(self.cols)) {
            axpy_slice(vi, row, out);
        }
        Ok(())
    }

    /// `self += a ⊗ b`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) -> Result<()> {
        check_len("add_outer", self.rows, a.len())?;
        check_len("add_outer", self.cols, b.len())?;
        for (&ai, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            axpy_slice(ai, b, row);
        }
        Ok(())
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

fn check_len(op: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim(op, expected, got))
    }
}

/// Dot product with four independent accumulators. The summation order is
/// fixed, so results are reproducible run to run.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn axpy_slice(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn matvec(m: &Matrix, v: &Vector) -> Result<Vector> {
    check_len("matvec", m.cols, v.len())?;
    let mut out = vec![0.0; m.rows];
    m.matvec_acc(v.as_slice(), &mut out)?;
    Ok(Vector::from_raw(out))
}

pub fn matvec_transposed(m: &Matrix, v: &Vector) -> Result<Vector> {
    check_len("matvec_transposed", m.rows, v.len())?;
    let mut out = vec![0.0; m.cols];
    m.matvec_transposed_acc(v.as_slice(), &mut out)?;
    Ok(Vector::from_raw(out))
}

pub fn hadamard(a: &Vector, b: &Vector) -> Result<Vector> {
    check_len("hadamard", a.len(), b.len())?;
    Ok(Vector::from_raw(
        a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    ))
}

/// `alpha · x + y`
pub fn axpy(alpha: f64, x: &Vector, y: &Vector) -> Result<Vector> {
    let mut out = y.clone();
    out.axpy_assign(alpha, x)?;
    Ok(out)
}

pub fn outer(a: &Vector, b: &Vector) -> Matrix {
    let mut m = Matrix::zeros(a.len(), b.len());
    m.add_outer(a.as_slice(), b.as_slice())
        .expect("shape derived from operands");
    m
}
