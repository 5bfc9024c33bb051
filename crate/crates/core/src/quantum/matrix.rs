//! Small dense complex matrices, a thin domain layer over `nalgebra`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix(DMatrix<C64>);

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&d))
    }

    /// Builds a matrix from rows. Panics if the rows are ragged or not square.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Self {
        let dim = rows.len();
        assert!(
            rows.iter().all(|r| r.len() == dim),
            "matrix rows must form a square"
        );
        Self(DMatrix::from_fn(dim, dim, |r, c| rows[r][c]))
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect())
                .collect(),
        )
    }

    pub(crate) fn from_nalgebra(m: DMatrix<C64>) -> Self {
        assert!(m.is_square());
        Self(m)
    }

    pub(crate) fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    /// |v⟩⟨w|
    pub fn outer(v: &[C64], w: &[C64]) -> Self {
        assert_eq!(v.len(), w.len());
        let v = DVector::from_column_slice(v);
        let w = DVector::from_column_slice(w);
        Self(&v * w.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(self.0.map(|z| z * factor))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Kronecker product with `self` as the most significant factor.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        Self(self.0.kronecker(&other.0))
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim());
        (&self.0 * DVector::from_column_slice(v))
            .as_slice()
            .to_vec()
    }

    /// ⟨v|M|v⟩, real part. Only meaningful for Hermitian `M`.
    pub fn expectation(&self, v: &[C64]) -> f64 {
        let v = DVector::from_column_slice(v);
        v.dotc(&(&self.0 * &v)).re
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        (&self.0 - &other.0).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// ‖M − M†‖_max
    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn column(&self, c: usize) -> Vec<C64> {
        self.0.column(c).iter().copied().collect()
    }

    /// 2×2 determinant of the restriction to an orthonormal pair, ⟨a|M|a⟩⟨b|M|b⟩ − |⟨a|M|b⟩|².
    pub fn restricted_det2(&self, a: &[C64], b: &[C64]) -> f64 {
        let a = DVector::from_column_slice(a);
        let b = DVector::from_column_slice(b);
        let (ma, mb) = (&self.0 * &a, &self.0 * &b);
        (a.dotc(&ma) * b.dotc(&mb) - a.dotc(&mb) * b.dotc(&ma)).re
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 * &rhs.0)
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 + &rhs.0)
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        Matrix(&self.0 - &rhs.0)
    }
}
