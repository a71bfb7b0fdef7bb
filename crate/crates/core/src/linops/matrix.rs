use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Dense double-precision vector.
#[derive(Clone, PartialEq, Default)]
pub struct DenseVector {
    data: Vec<f64>,
}

/// Dense row-major double-precision matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        DenseVector {
            data: vec![0.0; len],
        }
    }

    pub fn filled(len: usize, value: f64) -> Self {
        DenseVector {
            data: vec![value; len],
        }
    }

    /// Wraps `data`, rejecting NaN and infinite entries.
    pub fn from_vec(data: Vec<f64>) -> Result<Self> {
        check_finite(&data)?;
        Ok(DenseVector { data })
    }

    /// Wraps `data` without the finiteness check. Used on hot paths where the
    /// values come from arithmetic on already-validated inputs.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        DenseVector { data }
    }

    pub fn from_fn(len: usize, f: impl FnMut(usize) -> f64) -> Self {
        DenseVector {
            data: (0..len).map(f).collect(),
        }
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

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn norm_l1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `self += alpha * x`
    pub fn axpy(&mut self, alpha: f64, x: &DenseVector) {
        debug_assert_eq!(self.len(), x.len());
        for (s, v) in self.data.iter_mut().zip(&x.data) {
            *s += alpha * v;
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseVector {
        DenseVector::from_vec_unchecked(self.data.iter().map(|v| alpha * v).collect())
    }

    pub fn sub(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.len(), other.len());
        DenseVector::from_vec_unchecked(
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn add(&self, other: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.len(), other.len());
        DenseVector::from_vec_unchecked(
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        )
    }

    /// Outer product `self * other^T`.
    pub fn outer(&self, other: &DenseVector) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.len(), other.len());
        m.add_outer(1.0, self, other);
        m
    }

    pub fn max_abs_diff(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Concatenates `self` and `other`.
    pub fn concat(&self, other: &DenseVector) -> DenseVector {
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        DenseVector::from_vec_unchecked(data)
    }
}

impl Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

impl fmt::Debug for DenseVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.data).finish()
    }
}

impl From<DenseVector> for Vec<f64> {
    fn from(v: DenseVector) -> Self {
        v.data
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = DenseMatrix::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Builds a matrix from row-major `data`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::from_vec",
                format!("{} values for {rows}x{cols}", rows * cols),
                data.len(),
            ));
        }
        check_finite(&data)?;
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged rows".into()));
        }
        DenseMatrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Matrix whose columns are the given vectors (all of equal length).
    pub fn from_columns(columns: &[DenseVector]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::InvalidArgument("columns of unequal length".into()));
        }
        Ok(DenseMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
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

    pub fn column(&self, j: usize) -> DenseVector {
        DenseVector::from_fn(self.rows, |i| self[(i, j)])
    }

    pub fn columns(&self) -> Vec<DenseVector> {
        (0..self.cols).map(|j| self.column(j)).collect()
    }

    pub fn transpose(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims(
                "matmul",
                format!("lhs cols = rhs rows = {}", self.cols),
                format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        Ok(self.mul(other))
    }

    /// Unchecked product for internal callers whose shapes are already validated.
    pub(crate) fn mul(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other` without materialising the transpose.
    pub(crate) fn tmul(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let rhs = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(rhs) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T` without materialising the transpose.
    pub(crate) fn mul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        debug_assert_eq!(self.cols, other.cols);
        DenseMatrix::from_fn(self.rows, other.rows, |i, j| {
            self.row(i).iter().zip(other.row(j)).map(|(a, b)| a * b).sum()
        })
    }

    /// Matrix-vector product `self * x`.
    pub fn matvec(&self, x: &DenseVector) -> Result<DenseVector> {
        if self.cols != x.len() {
            return Err(Error::dims(
                "matvec",
                format!("vector of length {}", self.cols),
                x.len(),
            ));
        }
        Ok(self.mv(x))
    }

    pub(crate) fn mv(&self, x: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.cols, x.len());
        DenseVector::from_fn(self.rows, |i| {
            self.row(i).iter().zip(x.as_slice()).map(|(a, b)| a * b).sum()
        })
    }

    /// Transposed matrix-vector product `self^T * x`.
    pub(crate) fn tmv(&self, x: &DenseVector) -> DenseVector {
        debug_assert_eq!(self.rows, x.len());
        let mut out = DenseVector::zeros(self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.as_mut_slice().iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    /// `out += self * x`
    pub(crate) fn mv_acc(&self, x: &DenseVector, out: &mut DenseVector) {
        debug_assert_eq!(self.cols, x.len());
        debug_assert_eq!(self.rows, out.len());
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            *o += self.row(i).iter().zip(x.as_slice()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out += self^T * x`
    pub(crate) fn tmv_acc(&self, x: &DenseVector, out: &mut DenseVector) {
        debug_assert_eq!(self.rows, x.len());
        debug_assert_eq!(self.cols, out.len());
        for (i, &xi) in x.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            for (o, a) in out.as_mut_slice().iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
    }

    /// `self += alpha * u v^T`
    pub(crate) fn add_outer(&mut self, alpha: f64, u: &DenseVector, v: &DenseVector) {
        debug_assert_eq!(self.rows, u.len());
        debug_assert_eq!(self.cols, v.len());
        for (i, &ui) in u.iter().enumerate() {
            let s = alpha * ui;
            if s == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.cols..(i + 1) * self.cols];
            for (r, vj) in row.iter_mut().zip(v.as_slice()) {
                *r += s * vj;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) {
        debug_assert_eq!(self.shape(), other.shape());
        for (s, o) in self.data.iter_mut().zip(&other.data) {
            *s += alpha * o;
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Adds `value` to every diagonal entry.
    pub fn add_diag(&mut self, value: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += value;
        }
    }

    /// Frobenius inner product `<self, other>`.
    pub fn inner(&self, other: &DenseMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::dims("vstack", self.cols, other.cols));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(DenseMatrix {
            rows: self.rows + other.rows,
            cols: self.cols,
            data,
        })
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}
